"""Noisy-label tooling for segmentation masks.

Noise transition matrices, label corruption, spatial density analysis of
meta-structures, and an unsupervised binary segmentation loop.
"""

from metastruct.ntm import NTMError, crd, ntm_rank, validate_ntm

__version__ = "0.1.0"

__all__ = ["NTMError", "crd", "ntm_rank", "validate_ntm", "__version__"]
