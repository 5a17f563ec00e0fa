"""Strict JSON experiment configuration.

One JSON document describes one experiment.  Unknown keys and wrongly typed
values are rejected with :class:`ParseError` (carrying the line of the
offending key when it can be located); semantic problems such as an
inadmissible power or a non-positive time step raise :class:`ValidationError`.

Minimal example::

    {"kind": "GroundState", "params": {"N": 2, "p": 9, "n": 256, "L": 16}}
"""

from __future__ import annotations

import enum
import json
import re
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticError

from .errors import BadResolution, InadmissiblePower, ParseError, ValidationError
from .spectral import make_grid

__all__ = [
    "Kind",
    "InitKind",
    "Nonlinearity",
    "ParamsConfig",
    "GroundStateConfig",
    "InitConfig",
    "RunConfig",
    "SweepConfig",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]


class Kind(str, enum.Enum):
    GROUND_STATE = "GroundState"
    EVOLVE = "Evolve"
    DICHOTOMY_SWEEP = "DichotomySweep"
    VIRIAL_CHECK = "VirialCheck"


class InitKind(str, enum.Enum):
    SCALED_GROUND_STATE = "ScaledGroundState"
    GAUSSIAN = "Gaussian"
    FROM_CHECKPOINT = "FromCheckpoint"


class Nonlinearity(str, enum.Enum):
    FOCUSING = "focusing"
    DEFOCUSING = "defocusing"
    FREE = "free"

    @property
    def kappa(self):
        return {"focusing": 1.0, "defocusing": -1.0, "free": 0.0}[self.value]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, strict=True)


class ParamsConfig(_Strict):
    N: int
    p: float
    n: int
    L: float


class GroundStateConfig(_Strict):
    tol: float = 1e-10
    maxit: int = 500
    pad: int = 1
    shell_tol: float | None = 1e-4


class InitConfig(_Strict):
    kind: InitKind = InitKind.SCALED_GROUND_STATE
    amplitude: float = 1.0
    width: float | None = None
    path: str | None = None


class RunConfig(_Strict):
    dt: float = 1e-3
    T: float = 1.0
    snapshot_every: int = 10
    radii: list[float] = Field(default_factory=list)
    amp_factor: float = 1e3
    energy_tol: float = 1e-4
    nonlinearity: Nonlinearity = Nonlinearity.FOCUSING
    dealias: bool = True


class SweepConfig(_Strict):
    amplitudes: list[float] = Field(default_factory=list)
    workers: int = 1


class ExperimentConfig(_Strict):
    kind: Kind
    params: ParamsConfig
    groundstate: GroundStateConfig = Field(default_factory=GroundStateConfig)
    init: InitConfig = Field(default_factory=InitConfig)
    run: RunConfig = Field(default_factory=RunConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    out_dir: str | None = None
    seed: int = 0

    def grid(self):
        p = self.params
        return make_grid(p.N, p.p, p.n, p.L)

    def echo(self):
        """Plain JSON-ready copy of the configuration."""
        return self.model_dump(mode="json")


def _key_line(text, key):
    m = re.search(r'"' + re.escape(str(key)) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _dotted(loc):
    return ".".join(str(part) for part in loc)


def parse_config(text, base_dir=None):
    """Parse and validate a JSON configuration string."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(raw, dict):
        raise ParseError("top-level JSON value must be an object", line=1)
    try:
        cfg = ExperimentConfig.model_validate_json(text)
    except PydanticError as exc:
        err = exc.errors()[0]
        name = _dotted(err["loc"])
        leaf = err["loc"][-1] if err["loc"] else None
        line = _key_line(text, leaf) if isinstance(leaf, str) else None
        if err["type"] == "extra_forbidden":
            msg = f"unknown key {name!r}"
        elif err["type"] == "missing":
            msg = f"missing required key {name!r}"
        else:
            msg = f"bad value for {name!r}: {err['msg']}"
        raise ParseError(msg, line=line, field=name) from exc
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    _validate(cfg, base)
    if cfg.init.path is not None:
        full = str((base / cfg.init.path).resolve())
        cfg = cfg.model_copy(update={"init": cfg.init.model_copy(update={"path": full})})
    return cfg


def load_config(path):
    """Read, parse and validate the JSON configuration at ``path``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


def _check(cond, msg, field):
    if not cond:
        raise ValidationError(msg, field=field)


def _validate(cfg, base_dir):
    try:
        prm = cfg.grid()
    except InadmissiblePower as exc:
        raise ValidationError(f"inadmissible power: {exc}", field="params.p") from exc
    except BadResolution as exc:
        raise ValidationError(f"bad resolution: {exc}", field="params.n") from exc

    gs = cfg.groundstate
    _check(gs.tol > 0, "groundstate.tol must be > 0", "groundstate.tol")
    _check(gs.maxit >= 1, "groundstate.maxit must be >= 1", "groundstate.maxit")
    _check(gs.pad in (1, 2, 4), "groundstate.pad must be 1, 2 or 4", "groundstate.pad")

    init = cfg.init
    _check(init.amplitude > 0, "init.amplitude a must be > 0", "init.amplitude")
    if init.width is not None:
        _check(init.width > 0, "init.width must be > 0", "init.width")
    if init.kind is InitKind.FROM_CHECKPOINT:
        _check(init.path is not None, "FromCheckpoint needs init.path", "init.path")
    if init.path is not None:
        full = base_dir / init.path
        _check(full.is_file(), f"init.path {init.path!r} does not exist", "init.path")

    run = cfg.run
    _check(run.dt > 0, "run.dt must be > 0", "run.dt")
    _check(run.T >= 0, "run.T must be >= 0", "run.T")
    _check(run.snapshot_every >= 1, "run.snapshot_every must be >= 1", "run.snapshot_every")
    _check(run.amp_factor > 1, "run.amp_factor must be > 1", "run.amp_factor")
    _check(run.energy_tol > 0, "run.energy_tol must be > 0", "run.energy_tol")
    for R in run.radii:
        _check(0 < R <= prm.L, f"radius {R} outside (0, L={prm.L}]", "run.radii")

    sweep = cfg.sweep
    for a in sweep.amplitudes:
        _check(a > 0, f"sweep amplitude a={a} must be > 0", "sweep.amplitudes")
    _check(sweep.workers >= 1, "sweep.workers must be >= 1", "sweep.workers")
    if cfg.kind is Kind.DICHOTOMY_SWEEP:
        _check(sweep.amplitudes, "DichotomySweep needs sweep.amplitudes", "sweep.amplitudes")
