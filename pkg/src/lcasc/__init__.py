"""Low-complexity acoustic scene classification toolkit.

Spectrogram front-ends (mel, gammatone, pseudo-CQT), a small numpy CNN
engine with CNN-7 variants, mixup/spectrum augmentation, patch averaging,
product late fusion and a trainable-parameter auditor.
"""

__version__ = "0.1.0"
