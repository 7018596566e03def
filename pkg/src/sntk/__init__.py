"""Sparse-bias one-hidden-layer ReLU networks: training, NTK, and bound checks."""

from ._backend import BACKEND
from .data import Dataset
from .model import InitScheme, ModelState
from .numerics import RngStream, SymMatrix

__version__ = "0.1.0"

__all__ = ["BACKEND", "Dataset", "InitScheme", "ModelState", "RngStream", "SymMatrix"]
