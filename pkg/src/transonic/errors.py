"""Exception hierarchy.

Every failure raised by the solver derives from :class:`TransonicError`.  The
``stage`` attribute names the pipeline stage so the CLI can report it, and
``exit_code`` is the process status used for that failure class.
"""

from __future__ import annotations


class TransonicError(Exception):
    stage = "core"
    exit_code = 10

    def __init__(self, *args: object, stage: str | None = None):
        super().__init__(*args)
        if stage is not None:
            self.stage = stage


class CavitationError(TransonicError, ValueError):
    stage = "gas"
    exit_code = 11


class SonicSingularityError(TransonicError, ArithmeticError):
    stage = "radial"
    exit_code = 12


class PressureOutOfRangeError(TransonicError, ValueError):
    stage = "radial"
    exit_code = 13


class NoRootError(TransonicError, ValueError):
    stage = "radial"
    exit_code = 14


class NotSupersonicError(TransonicError, ValueError):
    stage = "jump"
    exit_code = 15


class DegenerateShockError(TransonicError, ArithmeticError):
    stage = "jump"
    exit_code = 16


class DomainError(TransonicError, ValueError):
    stage = "jump"
    exit_code = 17


class EllipticityLossError(TransonicError, ArithmeticError):
    stage = "elliptic"
    exit_code = 20


class ObliquenessError(TransonicError, ArithmeticError):
    stage = "elliptic"
    exit_code = 21


class SolverDivergenceError(TransonicError, ArithmeticError):
    stage = "elliptic"
    exit_code = 22


class NoConvergenceError(TransonicError, RuntimeError):
    stage = "elliptic"
    exit_code = 23


class TrustRegionError(NoConvergenceError):
    exit_code = 24


class FrontEscapeError(NoConvergenceError):
    exit_code = 25


class PerturbationTooLargeError(NoConvergenceError):
    exit_code = 26


class RadialFloorError(TransonicError, ArithmeticError):
    stage = "transport"
    exit_code = 30


class StepFailureError(TransonicError, ArithmeticError):
    stage = "transport"
    exit_code = 31


class ModeSolveError(TransonicError, ArithmeticError):
    stage = "inversion"
    exit_code = 40


class NearSingularError(TransonicError, ArithmeticError):
    stage = "inversion"
    exit_code = 41


class ConfigError(TransonicError, ValueError):
    stage = "config"
    exit_code = 2


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class IoError(TransonicError, OSError):
    stage = "io"
    exit_code = 3
