"""Critical band masking toolkit for image classifiers.

Measures the spatial-frequency channel of any classifier by injecting
band-limited noise, locating 50%-accuracy thresholds per band, and fitting
a Gaussian channel whose full width at half maximum (in octaves) is the
model's bandwidth.  Companion modules compute OOD accuracy and shape bias
and run the cross-model regression/correlation analyses.
"""

__version__ = "0.1.0"
