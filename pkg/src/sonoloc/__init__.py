"""sonoloc: interactive shape sonification and localization-task simulation.

A virtual probe is steered over hidden target shapes; probe-to-target
distances drive one of several sound models, and user (or scripted agent)
markings of the inferred margin and seed are scored with segmentation
overlap metrics.
"""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
