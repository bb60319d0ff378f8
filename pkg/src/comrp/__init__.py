"""comrp: clustering object masks for road parsing.

Pipeline toolkit that turns class-agnostic mask proposals plus per-region
feature vectors into semantic pseudo-labels via seeded unsupervised
clustering and human-guided cluster merging, evaluates them, and drives an
iterative self-training loop around an external trainer."""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
