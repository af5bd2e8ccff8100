"""Scenario files: schema, validation and construction of model and state."""

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import conservation as cons
from . import dynamics as dyn
from . import expr as ex
from . import geometry as geo
from . import thermo as th

# Applied to scheduled laws that have no tolerance in the file.
DEFAULT_TOLERANCES = {
    "energy": 1e-2,
    "eulerian_energy": 1e-2,
    "mass_translation": 1e-2,
    "bernoulli": 1e-10,
    "symplecticity_tm": 1e-2,
    "symplecticity_mm": 1e-2,
    "ertel_pv": 1e-2,
    "vorticity_dragging": 1e-2,
    "vorticity_drift": 1e-2,
    "helicity": 1e-2,
    "clebsch_reconstruction": 1e-2,
    "clebsch_oracle": 1e-2,
}


class ScenarioError(ValueError):
    """A scenario file failed validation; ``errors`` holds ``(key path, message)``."""

    def __init__(self, errors, source=None):
        self.errors = errors
        where = f"{source}: " if source else ""
        lines = [f"{'.'.join(str(p) for p in loc) or '<root>'}: {msg}" for loc, msg in errors]
        super().__init__(where + "invalid scenario\n  " + "\n  ".join(lines))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    n: Literal[2, 3]
    sizes: list[int]
    dm: Optional[list[float]] = None
    lengths: Optional[list[float]] = None
    fd_order: Literal[2, 4] = 4

    @model_validator(mode="after")
    def _shape(self):
        if len(self.sizes) != self.n:
            raise ValueError(f"sizes needs {self.n} entries")
        if any(s < 8 for s in self.sizes):
            raise ValueError("every grid size must be >= 8")
        if self.dm is not None and self.lengths is not None:
            raise ValueError("give dm or lengths, not both")
        for name in ("dm", "lengths"):
            v = getattr(self, name)
            if v is not None and (len(v) != self.n or any(not h > 0 for h in v)):
                raise ValueError(f"{name} needs {self.n} positive entries")
        return self

    def spacing(self):
        if self.dm is not None:
            return tuple(self.dm)
        lengths = self.lengths or [1.0] * self.n
        return tuple(L / s for L, s in zip(lengths, self.sizes))


class ThermoSpec(_Strict):
    gamma: float = 1.4
    c_v: float = 1.0
    A0: float = 1.0


class ZeroPotentialSpec(_Strict):
    kind: Literal["zero"] = "zero"


class UniformPotentialSpec(_Strict):
    kind: Literal["uniform"]
    g: list[float]


class ExpressionPotentialSpec(_Strict):
    kind: Literal["expression"]
    expr: str


PotentialSpec = Union[ZeroPotentialSpec, UniformPotentialSpec, ExpressionPotentialSpec]


class InitialSpec(_Strict):
    displacement: Optional[list[str]] = None
    phi: str = "0"
    r: str = "0"
    S: str = "0"
    lamt: Optional[list[str]] = None
    mu: Optional[list[str]] = None
    velocity: Optional[list[str]] = None

    @model_validator(mode="after")
    def _pairs(self):
        if (self.lamt is None) != (self.mu is None):
            raise ValueError("lamt and mu must be given together")
        if self.lamt is not None and len(self.lamt) != len(self.mu):
            raise ValueError("lamt and mu need the same number of entries")
        return self


class TimeSpec(_Strict):
    integrator: Literal["rk4", "leapfrog"] = "rk4"
    dt: float = Field(gt=0)
    t_end: float = Field(ge=0)


class DiagnosticsSpec(_Strict):
    laws: list[str] = Field(default_factory=lambda: list(cons.LAWS))
    cadence: int = Field(default=1, gt=0)
    tolerances: dict[str, float] = Field(default_factory=dict)

    @field_validator("laws")
    @classmethod
    def _known(cls, v):
        bad = [name for name in v if name not in cons.LAWS]
        if bad:
            raise ValueError(f"unknown laws {bad}; known: {list(cons.LAWS)}")
        if len(set(v)) != len(v):
            raise ValueError("laws listed more than once")
        return v

    @field_validator("tolerances")
    @classmethod
    def _tol(cls, v):
        bad = [name for name in v if name not in cons.LAWS]
        if bad:
            raise ValueError(f"tolerances for unknown laws {bad}")
        if any(not t > 0 for t in v.values()):
            raise ValueError("tolerances must be positive")
        return v

    def tolerance(self, law):
        return self.tolerances.get(law, DEFAULT_TOLERANCES[law])


class OutputSpec(_Strict):
    dir: str = "out"


class Scenario(_Strict):
    name: str = "scenario"
    grid: GridSpec
    thermo: ThermoSpec = Field(default_factory=ThermoSpec)
    potential: PotentialSpec = Field(default_factory=ZeroPotentialSpec, discriminator="kind")
    initial: InitialSpec = Field(default_factory=InitialSpec)
    time: TimeSpec
    diagnostics: DiagnosticsSpec = Field(default_factory=DiagnosticsSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    seed: int = 0

    @model_validator(mode="after")
    def _expressions(self):
        n = self.grid.n
        labels = [f"m{i + 1}" for i in range(n)]
        ini = self.initial
        checks = [("initial.phi", ini.phi), ("initial.r", ini.r), ("initial.S", ini.S)]
        for key in ("displacement", "velocity", "lamt", "mu"):
            items = getattr(ini, key)
            if items is None:
                continue
            if key in ("displacement", "velocity") and len(items) != n:
                raise ValueError(f"initial.{key} needs {n} components")
            checks += [(f"initial.{key}[{k}]", e) for k, e in enumerate(items)]
        for where, text in checks:
            _parse(where, text, labels)
        if isinstance(self.potential, ExpressionPotentialSpec):
            _parse("potential.expr", self.potential.expr, [f"x{i + 1}" for i in range(n)])
        if isinstance(self.potential, UniformPotentialSpec) and len(self.potential.g) != n:
            raise ValueError(f"potential.g needs {n} components")
        return self


def _parse(where, text, allowed):
    try:
        ex.parse_expr(text, allowed)
    except ex.ExprError as err:
        raise ValueError(f"{where}: {err}") from None


def parse_scenario(data, source=None):
    try:
        return Scenario.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(
            [(tuple(e["loc"]), e["msg"]) for e in err.errors()], source
        ) from None


def load_scenario(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ScenarioError([((), f"not valid JSON: {err}")], path) from None
    return parse_scenario(data, path)


def build_model(sc):
    grid = geo.LabelGrid(tuple(sc.grid.sizes), sc.grid.spacing(), sc.grid.fd_order)
    thermo = th.ThermoModel(sc.thermo.gamma, sc.thermo.c_v, sc.thermo.A0)
    pot = sc.potential
    if pot.kind == "zero":
        potential = dyn.ZeroPotential()
    elif pot.kind == "uniform":
        potential = dyn.UniformPotential(pot.g)
    else:
        potential = dyn.ExpressionPotential(pot.expr, sc.grid.n)
    return dyn.GasModel(grid, thermo, potential)


def build_state(sc, model):
    ini = sc.initial
    return dyn.init_clebsch(
        model,
        displacement=ini.displacement,
        phi=ini.phi,
        r=ini.r,
        S=ini.S,
        lamt=ini.lamt,
        mu=ini.mu,
        K_lin=len(ini.lamt) if ini.lamt is not None else 1,
        velocity=ini.velocity,
    )
