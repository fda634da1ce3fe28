"""Scenario files: schema, defaults and construction of model objects."""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import ConfigDict, Field, TypeAdapter, ValidationError
from pydantic.dataclasses import dataclass as strict_dataclass

from .errors import ConfigError
from .expr import Expr, index_function, matrix_function, time_function, vector_function
from .majorant import (ClosedFormMajorant, MajorantFn, PdeMajorantSpec, SequenceMajorant,
                       build_pde_majorant, build_smoluchowski_bounds, example512_majorant,
                       pde_weight_profile)
from .models import (PdeModelSpec, StabilitySystem, constant_coefficients, example512_rhs,
                     expression_coefficients, pde_rhs, smoluchowski_rhs)
from .seqspace import NONNEG, SYMMETRIC, WeightProfile
from .solver import PAPER_FAITHFUL, StepControl
from .system import LinearRhs, RhsSystem

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


_strict = strict_dataclass(config=ConfigDict(extra="forbid"))


@_strict
class PdeModel:
    kind: Literal["pde"] = "pde"
    m: int = 0
    N: int = 1
    a: str = "1"
    b: str = "0"
    forcing: list[str] = field(default_factory=list)
    gauge: Literal["u", "v"] = "u"
    period: Optional[float] = None
    a_star: float = 1.0
    seeds: list[float] = field(default_factory=lambda: [1.0])
    cap: int = 128
    radius: float = 2.0


@_strict
class SmoluchowskiModel:
    kind: Literal["smoluchowski"] = "smoluchowski"
    c: str = "1/k**2"
    b: str = "4*i*j"
    C: str = "1/k**2"
    B: str = "4*i*j"
    beta: str = "4*k**2"
    band: Optional[int] = 2
    tail_decay: Optional[tuple[float, float]] = None
    truncation: Literal["paper-faithful", "mass-conserving"] = PAPER_FAITHFUL
    period: Optional[float] = None
    kernel_csv: Optional[str] = None
    bound_csv: Optional[str] = None


@_strict
class StabilityModel:
    kind: Literal["stability"] = "stability"
    A: list[list[str]] = field(default_factory=lambda: [["-1", "0"], ["0", "-1"]])
    psi: list[str] = field(default_factory=list)
    c: float = 0.0
    lam: float = 2.0
    r: float = 1.0
    x_hat: float = 1.0
    horizon: float = 10.0
    asymptotic: bool = False
    quad_tol: float = 1e-10
    period: Optional[float] = None
    A_csv: Optional[str] = None


@_strict
class Example512Model:
    kind: Literal["example512"] = "example512"
    initial_grid: list[tuple[float, float]] = field(default_factory=lambda: [
        (a, b) for a in (-1.0, 0.0, 1.0) for b in (-1.0, 0.0, 1.0)])


@_strict
class LinearModel:
    kind: Literal["custom-linear"] = "custom-linear"
    A: list[list[str]] = field(default_factory=lambda: [["-1"]])
    forcing: list[str] = field(default_factory=list)
    period: Optional[float] = None
    bound: list[str] = field(default_factory=lambda: ["1"])
    bound_deriv: list[str] = field(default_factory=list)
    A_csv: Optional[str] = None


ModelConfig = Annotated[Union[PdeModel, SmoluchowskiModel, StabilityModel, Example512Model,
                              LinearModel], Field(discriminator="kind")]


@_strict
class RunConfig:
    T: float = 1.0
    n_start: int = 8
    n_max: Optional[int] = None
    tol: float = 1e-6
    mode: Optional[Literal["symmetric", "nonneg"]] = None
    penalty: bool = False
    epsilon: float = 1e-3
    nonneg_clip: bool = False
    initial: Optional[list[float]] = None
    initial_fraction: float = 0.5
    output_points: int = 101
    atol: float = 1e-10
    rtol: float = 1e-8
    max_wall_time: Optional[float] = None
    max_steps: int = 2_000_000


@_strict
class CertifyConfig:
    face_samples: int = 128
    grid_points: int = 101
    lower: bool = False


@_strict
class PeriodicConfig:
    omega: Optional[float] = None
    tol: float = 1e-8
    max_iter: int = 200
    orbit_points: int = 101


@_strict
class OutputConfig:
    dir: str = "out"


@_strict
class ScenarioConfig:
    model: ModelConfig
    name: str = "scenario"
    seed: int = 0
    run: RunConfig = field(default_factory=RunConfig)
    certify: CertifyConfig = field(default_factory=CertifyConfig)
    periodic: PeriodicConfig = field(default_factory=PeriodicConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def step_control(self) -> StepControl:
        return StepControl(atol=self.run.atol, rtol=self.run.rtol, max_steps=self.run.max_steps,
                           max_wall_time=self.run.max_wall_time)


MODEL_KINDS = {"pde": PdeModel, "smoluchowski": SmoluchowskiModel, "stability": StabilityModel,
               "example512": Example512Model, "custom-linear": LinearModel}


_ADAPTER = TypeAdapter(ScenarioConfig)


def _format_errors(exc: ValidationError, source: str) -> str:
    lines = [f"{source}: invalid scenario"]
    for e in exc.errors():
        loc = ".".join(str(p) for p in e["loc"])
        lines.append(f"  {loc}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict, source: str = "<config>") -> ScenarioConfig:
    try:
        return _ADAPTER.validate_python(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, source)) from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    cfg = parse_config(data, str(path))
    _resolve_paths(cfg, path.parent)
    return cfg


_CSV_FIELDS = ("kernel_csv", "bound_csv", "A_csv")


def _resolve_paths(cfg: ScenarioConfig, base: Path):
    for name in _CSV_FIELDS:
        v = getattr(cfg.model, name, None)
        if v is not None and not Path(v).is_absolute():
            setattr(cfg.model, name, str(base / v))


def load_matrix_csv(path) -> np.ndarray:
    """A square matrix from a headerless comma-separated file."""
    try:
        M = np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if M.shape[0] != M.shape[1]:
        raise ConfigError(f"{path}: matrix is {M.shape[0]}x{M.shape[1]}, expected square")
    return M


def _constant_matrix(M: np.ndarray):
    return lambda t: M


def defaults(kind: str) -> dict:
    """Every field of a scenario for ``kind`` with its default value."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}")
    cfg = ScenarioConfig(model=MODEL_KINDS[kind]())
    return _drop_none(_ADAPTER.dump_python(cfg, mode="json"))


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    return d


@dataclass
class Built:
    """Model objects assembled from a scenario."""

    system: RhsSystem
    majorant: MajorantFn | None
    weights: WeightProfile
    mode: str
    initial: list
    n: int
    extra: dict


def _initial(cfg: ScenarioConfig, X: MajorantFn, n: int) -> np.ndarray:
    if cfg.run.initial is not None:
        x = np.zeros(n)
        v = np.asarray(cfg.run.initial, dtype=float)[:n]
        x[: v.size] = v
        return x
    return cfg.run.initial_fraction * X.values(0.0, n)


def build(cfg: ScenarioConfig) -> Built:
    m = cfg.model
    n = cfg.run.n_max or cfg.run.n_start
    mode = cfg.run.mode
    if isinstance(m, PdeModel):
        a, b = time_function(m.a), time_function(m.b)
        zero_b = Expr(m.b).constant and b(0.0) == 0.0
        spec = PdeModelSpec(m.m, m.N, a=a, b=None if zero_b else b,
                            forcing=[time_function(s) for s in m.forcing], gauge=m.gauge,
                            period=m.period)
        f = pde_rhs(spec)
        U = build_pde_majorant(PdeMajorantSpec(m.m, m.N, m.a_star, tuple(m.seeds)),
                               max(m.cap, n))
        if m.gauge == "v":
            X = SequenceMajorant.exp_scaled(U.coeffs, lambda t: f.b_int(t) + t,
                                            lambda t: float(b(t)) + 1.0, warnings=U.warnings)
        else:
            X = U
        w = pde_weight_profile(U, m.radius)
        x0 = _initial(cfg, X, n)
        return Built(f, X, w, mode or SYMMETRIC, [x0], n, {"majorant_warnings": U.warnings})
    if isinstance(m, SmoluchowskiModel):
        Bsrc = load_matrix_csv(m.bound_csv) if m.bound_csv else index_function(m.B, ("i", "j"))
        bounds = build_smoluchowski_bounds(index_function(m.C), Bsrc, index_function(m.beta), n,
                                           band=m.band, tail_decay=m.tail_decay)
        c, bfun, autonomous = expression_coefficients(m.c, m.b)
        if m.kernel_csv:
            _, bfun = constant_coefficients([], load_matrix_csv(m.kernel_csv))
            autonomous = "t" not in Expr(m.c, ("t", "k")).names
        f = smoluchowski_rhs(c, bfun, bounds, m.truncation, m.band, m.period, autonomous)
        X = bounds.majorant()
        x0 = _initial(cfg, X, n)
        return Built(f, X, bounds.weight_profile(), mode or NONNEG, [x0], n,
                     {"bounds_notes": bounds.notes})
    if isinstance(m, StabilityModel):
        A = _constant_matrix(load_matrix_csv(m.A_csv)) if m.A_csv else matrix_function(m.A)
        dim = A(0.0).shape[0]
        psi = None
        if m.psi:
            if len(m.psi) != dim:
                raise ConfigError("psi needs one expression per row of A")
            names = ("t",) + tuple(f"x{k}" for k in range(1, dim + 1))
            exprs = [Expr(s, names) for s in m.psi]
            psi = lambda t, x: np.array([float(e(t=t, **{f"x{k + 1}": x[k] for k in range(dim)}))
                                         for e in exprs])
        f = StabilitySystem(A, psi, m.c, m.lam, m.r, m.period)
        x0 = _initial(cfg, SequenceMajorant(np.full(dim, m.x_hat)), dim)
        return Built(f, None, WeightProfile.uniform(), mode or SYMMETRIC, [x0], dim, {})
    if isinstance(m, Example512Model):
        X = example512_majorant()
        inits = [np.array(p, dtype=float) for p in m.initial_grid]
        if cfg.run.initial is not None:
            inits = [np.array(cfg.run.initial, dtype=float)]
        return Built(example512_rhs(), X, WeightProfile.uniform(), mode or SYMMETRIC, inits, 2, {})
    if isinstance(m, LinearModel):
        A = _constant_matrix(load_matrix_csv(m.A_csv)) if m.A_csv else matrix_function(m.A)
        dim = A(0.0).shape[0]
        g = vector_function(m.forcing) if m.forcing else None
        f = LinearRhs(A, g, m.period)
        if len(m.bound) != dim:
            raise ConfigError("bound needs one expression per row of A")
        funcs = [time_function(s) for s in m.bound]
        if m.bound_deriv:
            if len(m.bound_deriv) != dim:
                raise ConfigError("bound_deriv needs one expression per row of A")
            dfuncs = [time_function(s) for s in m.bound_deriv]
        else:
            if not all(Expr(s).constant for s in m.bound):
                raise ConfigError("time-dependent bounds need bound_deriv")
            dfuncs = [time_function("0")] * dim
        X = ClosedFormMajorant(funcs, dfuncs)
        x0 = _initial(cfg, X, dim)
        return Built(f, X, WeightProfile.uniform(), mode or SYMMETRIC, [x0], dim, {})
    raise ConfigError(f"unsupported model {m!r}")  # pragma: no cover
