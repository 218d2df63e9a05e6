"""winr: complex-wavelet implicit neural representations.

A numpy library for building, training, initializing, and spectrally
verifying INRs whose first layer applies a template function (gaussian,
Gabor, complex Meyer, ...) and whose hidden layers are complex MLPs with
analytic activations.
"""

from . import (  # noqa: F401
    expansion,
    init,
    model,
    numerics,
    signals,
    spectral,
    templates,
    training,
)

__version__ = "0.1.0"
