"""Transonic shock flows in divergent nozzles."""

from .gas import FlowState, GasModel, MachClass

__version__ = "0.1.0"

__all__ = ["FlowState", "GasModel", "MachClass", "__version__"]
