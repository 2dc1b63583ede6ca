"""Counterfactual image generation over an attribute SCM, and classifier fairness audits."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
