"""Optimal spot-market liquidation of a finite energy store."""
from .model import Model, ModelError, build_model, build_custom_model

__all__ = ["Model", "ModelError", "build_model", "build_custom_model"]
