"""Numpy-backed reverse-mode autodiff used by every model in the package."""

from . import nn, ops
from .gradcheck import check_gradients, rel_error, run_suite
from .tensor import Tensor, as_tensor, no_grad

__all__ = ["Tensor", "as_tensor", "no_grad", "ops", "nn",
           "check_gradients", "rel_error", "run_suite"]
