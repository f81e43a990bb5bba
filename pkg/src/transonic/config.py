"""Run configuration: TOML or JSON by extension, validated with field paths."""

from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ParseError, ValidationError
from .gas import FlowState, GasModel, MachClass, mach_class
from .perturbation import DEFORMATIONS, UPSTREAMS

MODES = ("background", "locate-shock", "solve", "sweep", "check", "demo-isentropic")
EXIT_KINDS = ("constant", "cosine", "samples")


@dataclass(frozen=True)
class GasSection:
    gamma: float = 1.4


@dataclass(frozen=True)
class NozzleSection:
    r0: float = 1.0
    r1: float = 2.0
    n: int = 2
    theta: float = math.pi / 6
    delta: float | None = None


@dataclass(frozen=True)
class InflowSection:
    rho: float = 1.0
    u: float = 2.0
    p: float = 1.0


@dataclass(frozen=True)
class BackgroundSection:
    r_s: float | None = 1.5
    p_c: float | None = None


@dataclass(frozen=True)
class PerturbationSection:
    deformation: str = "identity"
    deformation_amplitude: float = 0.0
    deformation_mode: int = 1
    upstream: str = "radial"
    upstream_amplitude: float = 0.0
    upstream_mode: int = 1


@dataclass(frozen=True)
class ExitSection:
    kind: str = "constant"
    p_c: float | None = None
    amplitude: float = 0.0
    mode: int = 1
    samples: tuple[float, ...] | None = None


@dataclass(frozen=True)
class NumericsSection:
    nr: int = 41
    ntheta: int = 21
    modes: int = 32
    step: float | None = None
    tol_outer: float = 1e-10
    tol_lin: float = 1e-9
    tol_newton: float = 1e-9
    max_outer: int = 60
    max_newton: int = 12
    sigma: float = 0.1


@dataclass(frozen=True)
class SweepSection:
    r_s_min: float = 1.2
    r_s_max: float = 1.8
    count: int = 50
    isentropic_flux: float = 0.3


@dataclass(frozen=True)
class RunConfig:
    mode: str = "background"
    seed: int = 0
    gas: GasSection = field(default_factory=GasSection)
    nozzle: NozzleSection = field(default_factory=NozzleSection)
    inflow: InflowSection = field(default_factory=InflowSection)
    background: BackgroundSection = field(default_factory=BackgroundSection)
    perturbation: PerturbationSection = field(default_factory=PerturbationSection)
    exit: ExitSection = field(default_factory=ExitSection)
    numerics: NumericsSection = field(default_factory=NumericsSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    @property
    def gas_model(self) -> GasModel:
        return GasModel.from_state(self.gas.gamma, self.inflow_state)

    @property
    def inflow_state(self) -> FlowState:
        return FlowState(self.inflow.rho, self.inflow.u, self.inflow.p)

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["exit"]["samples"] is not None:
            out["exit"]["samples"] = list(out["exit"]["samples"])
        return out


_SECTIONS = {f.name: f.type for f in fields(RunConfig)}
_SECTION_TYPES = {
    "gas": GasSection, "nozzle": NozzleSection, "inflow": InflowSection,
    "background": BackgroundSection, "perturbation": PerturbationSection,
    "exit": ExitSection, "numerics": NumericsSection, "sweep": SweepSection,
}
_INT_FIELDS = {"n", "deformation_mode", "upstream_mode", "mode", "nr", "ntheta", "modes",
               "max_outer", "max_newton", "count", "seed"}
_STR_FIELDS = {"deformation", "upstream", "kind"}


def _coerce(path: str, name: str, value: Any):
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise ValidationError(path, "expected a string")
        return value
    if name == "samples":
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ValidationError(path, "expected a list of numbers")
        return tuple(float(v) for v in value)
    if isinstance(value, bool):
        raise ValidationError(path, "expected a number, got a boolean")
    if name in _INT_FIELDS:
        if not isinstance(value, int):
            raise ValidationError(path, "expected an integer")
        return value
    if not isinstance(value, (int, float)):
        raise ValidationError(path, "expected a number")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(path, "must be finite")
    return value


def from_dict(raw: dict) -> RunConfig:
    """Build and validate a config from a parsed document."""
    if not isinstance(raw, dict):
        raise ValidationError("<root>", "expected a table")
    top: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in _SECTIONS:
            raise ValidationError(key, "unknown key")
        if key == "mode":
            if not isinstance(value, str):
                raise ValidationError("mode", "expected a string")
            top["mode"] = value
        elif key == "seed":
            top["seed"] = _coerce("seed", "seed", value)
        else:
            if not isinstance(value, dict):
                raise ValidationError(key, "expected a table")
            cls = _SECTION_TYPES[key]
            names = {f.name for f in fields(cls)}
            kwargs = {}
            for sub, v in value.items():
                if sub not in names:
                    raise ValidationError(f"{key}.{sub}", "unknown key")
                kwargs[sub] = _coerce(f"{key}.{sub}", sub, v)
            top[key] = cls(**kwargs)
    cfg = RunConfig(**top)
    validate(cfg)
    return cfg


def _positive(path: str, value) -> None:
    if value is not None and not value > 0.0:
        raise ValidationError(path, f"must be positive, got {value!r}")


def validate(cfg: RunConfig) -> None:
    if cfg.mode not in MODES:
        raise ValidationError("mode", f"must be one of {', '.join(MODES)}")
    if cfg.seed < 0:
        raise ValidationError("seed", "must be non-negative")
    if not cfg.gas.gamma > 1.0:
        raise ValidationError("gas.gamma", "must exceed 1")
    nz = cfg.nozzle
    _positive("nozzle.r0", nz.r0)
    if not nz.r1 > nz.r0:
        raise ValidationError("nozzle.r1", "must exceed nozzle.r0")
    if nz.n not in (2, 3):
        raise ValidationError("nozzle.n", "must be 2 or 3")
    if not 0.0 < nz.theta < 2.0 * math.pi:
        raise ValidationError("nozzle.theta", "must lie in (0, 2*pi)")
    _positive("nozzle.delta", nz.delta)
    for name in ("rho", "u", "p"):
        _positive(f"inflow.{name}", getattr(cfg.inflow, name))
    if mach_class(cfg.gas_model, cfg.inflow_state) is not MachClass.SUPERSONIC:
        raise ValidationError("inflow", "inflow state must be supersonic for the configured gas")
    bg = cfg.background
    if bg.r_s is not None and not nz.r0 < bg.r_s < nz.r1:
        raise ValidationError("background.r_s", "must lie strictly between r0 and r1")
    _positive("background.p_c", bg.p_c)
    pt = cfg.perturbation
    if pt.deformation not in DEFORMATIONS:
        raise ValidationError("perturbation.deformation", f"must be one of {DEFORMATIONS}")
    if pt.upstream not in UPSTREAMS:
        raise ValidationError("perturbation.upstream", f"must be one of {UPSTREAMS}")
    for name in ("deformation_mode", "upstream_mode"):
        if getattr(pt, name) < 0:
            raise ValidationError(f"perturbation.{name}", "must be non-negative")
    ex = cfg.exit
    if ex.kind not in EXIT_KINDS:
        raise ValidationError("exit.kind", f"must be one of {EXIT_KINDS}")
    _positive("exit.p_c", ex.p_c)
    if ex.mode < 0:
        raise ValidationError("exit.mode", "must be non-negative")
    num = cfg.numerics
    if ex.kind == "samples":
        if ex.samples is None or len(ex.samples) != num.ntheta:
            raise ValidationError("exit.samples", "needs exactly numerics.ntheta values")
        if any(not v > 0.0 for v in ex.samples):
            raise ValidationError("exit.samples", "pressures must be positive")
    for name in ("nr", "ntheta"):
        if getattr(num, name) < 8:
            raise ValidationError(f"numerics.{name}", "grid sizes must be at least 8")
    if num.modes < 1:
        raise ValidationError("numerics.modes", "must be at least 1")
    for name in ("tol_outer", "tol_lin", "tol_newton", "sigma", "step"):
        _positive(f"numerics.{name}", getattr(num, name))
    for name in ("max_outer", "max_newton"):
        if getattr(num, name) < 1:
            raise ValidationError(f"numerics.{name}", "must be at least 1")
    sw = cfg.sweep
    if not nz.r0 < sw.r_s_min < sw.r_s_max < nz.r1:
        raise ValidationError("sweep", "need r0 < r_s_min < r_s_max < r1")
    if sw.count < 2:
        raise ValidationError("sweep.count", "must be at least 2")
    if not sw.isentropic_flux >= 0.0:
        raise ValidationError("sweep.isentropic_flux", "must be non-negative")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            raw = tomllib.loads(text.decode("utf-8"))
        elif suffix == ".json":
            raw = json.loads(text)
        else:
            raise ParseError(f"{path}: unsupported extension {suffix!r} (use .toml or .json)")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return from_dict(raw)


def with_overrides(cfg: RunConfig, mode: str | None = None, grid: tuple[int, int] | None = None,
                   modes: int | None = None, seed: int | None = None) -> RunConfig:
    num = cfg.numerics
    if grid is not None:
        num = replace(num, nr=grid[0], ntheta=grid[1])
    if modes is not None:
        num = replace(num, modes=modes)
    out = replace(cfg, numerics=num, mode=mode or cfg.mode,
                  seed=cfg.seed if seed is None else seed)
    validate(out)
    return out
