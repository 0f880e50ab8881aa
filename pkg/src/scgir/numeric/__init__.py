"""Minimal dense-tensor compute layer: immutable float64 tensors, a
recording tape with explicit adjoint rules, and a seeded deterministic
random generator. Everything downstream builds on this module."""

from . import ops
from .rng import Rng
from .tensor import GradTape, Tensor, backward

__all__ = ["Tensor", "GradTape", "backward", "Rng", "ops"]
