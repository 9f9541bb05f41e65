"""Model parameters, potentials with the local-minimum assumption, the explicit
penalization potential, and the general nonlinearity abstraction."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ConditionFailure, ConfigurationError
from .grid import Grid

# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the penalized problem.

    ``kappa`` defaults to ``(alpha*(p-2) - 2s)/4``; an explicit value must
    agree with that formula.  ``nu`` (used by the small-t order condition on
    general nonlinearities) defaults to ``alpha/10``.
    """

    N: int = 1
    s: float = 0.25
    p: float = 3.5
    eps: float = 0.1
    alpha: float = 0.45
    kappa: Optional[float] = None
    beta: float = 0.05
    delta: float = 0.5
    barrier_R: float = 2.0
    nu: Optional[float] = None

    def __post_init__(self):
        N, s, p, a = self.N, self.s, self.p, self.alpha
        if N not in (1, 2):
            raise ConfigurationError(f"N must be 1 or 2, got {N}")
        if not (0 < s < 1):
            raise ConfigurationError(f"s must lie in (0,1), got {s}")
        if not N > 2 * s:
            raise ConfigurationError(f"need N > 2s, got N={N}, s={s}")
        lo, hi = self.p_window
        if not (lo < p < hi):
            raise ConfigurationError(f"p={p} outside ({lo:.6g}, {hi:.6g})")
        lo, hi = self.alpha_window
        if not (lo < a < hi):
            raise ConfigurationError(f"alpha={a} outside ({lo:.6g}, {hi:.6g})")
        k = (a * (p - 2) - 2 * s) / 4
        if self.kappa is None:
            object.__setattr__(self, "kappa", k)
        elif not math.isclose(self.kappa, k, rel_tol=1e-9, abs_tol=1e-12):
            raise ConfigurationError(f"kappa={self.kappa} differs from (alpha(p-2)-2s)/4={k}")
        if not self.kappa > 0:
            raise ConfigurationError(f"kappa must be positive, got {self.kappa}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if not (0 < self.delta < 1):
            raise ConfigurationError(f"delta must lie in (0,1), got {self.delta}")
        if not (0 < self.beta < 0.5):
            raise ConfigurationError(f"beta must lie in (0,1/2), got {self.beta}")
        if not self.barrier_R > 0:
            raise ConfigurationError(f"barrier_R must be positive, got {self.barrier_R}")
        if self.nu is None:
            object.__setattr__(self, "nu", a / 10)
        if not (0 < self.nu < a):
            raise ConfigurationError(f"nu must lie in (0, alpha), got {self.nu}")

    @property
    def crit_exponent(self) -> float:
        """Fractional Sobolev exponent 2N/(N-2s)."""
        return 2 * self.N / (self.N - 2 * self.s)

    @property
    def p_window(self) -> tuple[float, float]:
        return 2 + 2 * self.s / (self.N - 2 * self.s), self.crit_exponent

    @property
    def alpha_window(self) -> tuple[float, float]:
        return 2 * self.s / (self.p - 2), self.N - 2 * self.s

    @property
    def kappa_tilde(self) -> float:
        return (2 * self.s + 2 * self.kappa) / (self.alpha - self.nu)

    @property
    def energy_exponent(self) -> float:
        """Exponent in C(a) = C(1) a^{p/(p-2) - N/(2s)}."""
        return self.p / (self.p - 2) - self.N / (2 * self.s)

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        if any(k in changes for k in ("alpha", "p", "s")) and "kappa" not in changes:
            d["kappa"] = None
        if "alpha" in changes and "nu" not in changes:
            d["nu"] = None
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigurationError(f"unknown model keys: {sorted(unknown)}")
        return cls(**d)


DEFAULT_1D = dict(N=1, s=0.25, p=3.5, alpha=0.45, kappa=0.04375)
DEFAULT_2D = dict(N=2, s=0.5, p=3.5, alpha=0.8, kappa=0.05)


def default_params(dim: int = 1, **overrides) -> ModelParams:
    base = dict(DEFAULT_1D if dim == 1 else DEFAULT_2D)
    base.update(overrides)
    return ModelParams(**base)


# --------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise ConfigurationError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def _dist(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.sum((x - np.array(self.center)) ** 2, axis=-1))

    def contains(self, x) -> np.ndarray:
        return self._dist(x) < self.radius

    def closure_contains(self, x) -> np.ndarray:
        return self._dist(x) <= self.radius

    def boundary_distance(self, x) -> np.ndarray:
        return np.abs(self.radius - self._dist(x))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def to_dict(self) -> dict:
        return {"type": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(c) for c in np.atleast_1d(self.lo))
        hi = tuple(float(c) for c in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ConfigurationError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x > np.array(self.lo)) & (x < np.array(self.hi)), axis=-1)

    def closure_contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= np.array(self.lo)) & (x <= np.array(self.hi)), axis=-1)

    def boundary_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = np.minimum(np.abs(x - np.array(self.lo)), np.abs(np.array(self.hi) - x))
        inside = self.closure_contains(x)
        # outside points: distance to the box, approximated by the largest axis gap
        gap = np.max(np.maximum(np.array(self.lo) - x, x - np.array(self.hi)), axis=-1)
        return np.where(inside, np.min(d, axis=-1), gap)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lo), np.array(self.hi)

    def to_dict(self) -> dict:
        return {"type": "box", "lo": list(self.lo), "hi": list(self.hi)}


def region_from_dict(d: dict):
    kind = d.get("type")
    if kind == "ball":
        return Ball(tuple(d["center"]), float(d["radius"]))
    if kind == "box":
        return Box(tuple(d["lo"]), tuple(d["hi"]))
    raise ConfigurationError(f"unknown region type {kind!r}")


def compactly_contained(inner, outer) -> bool:
    """True when the closure of ``inner`` lies in the open set ``outer``."""
    if isinstance(outer, Ball):
        if isinstance(inner, Ball):
            return np.linalg.norm(np.subtract(inner.center, outer.center)) + inner.radius < outer.radius
        corners = np.array(np.meshgrid(*zip(inner.lo, inner.hi), indexing="ij")).reshape(inner.dim, -1).T
        return bool(np.all(outer.contains(corners)))
    lo, hi = inner.bounds()
    return bool(np.all(lo > np.array(outer.lo)) and np.all(hi < np.array(outer.hi)))


# --------------------------------------------------------------------------
# potentials

_POTENTIAL_DEFAULTS = {
    "compact_bump": {"base": 1.0, "curvature": 4.0, "radius": 3.0},
    "algebraic_decay": {"base": 1.0, "curvature": 4.0, "scale": 3.0, "power": 6.0},
    "positive_floor": {"base": 1.0, "curvature": 4.0, "width": 1.0},
}


@dataclass(frozen=True)
class PotentialSpec:
    """A potential V with the regions Lambda compactly inside U.

    Kinds (``r = |x - center|``):

    * ``compact_bump``: ``(base + curvature r^2) * max(0, 1 - (r/radius)^2)^2``
    * ``algebraic_decay``: ``(base + curvature r^2) / (1 + (r/scale)^power)``
    * ``positive_floor``: ``base + curvature r^2 / (1 + r^2/width^2)``
    """

    kind: str
    params: dict
    Lambda: object
    U: object
    center: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if self.kind not in _POTENTIAL_DEFAULTS:
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        merged = dict(_POTENTIAL_DEFAULTS[self.kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ConfigurationError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged.update({k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not (self.Lambda.dim == self.U.dim == len(self.center)):
            raise ConfigurationError("Lambda, U and center must share a dimension")
        if any(v < 0 for v in merged.values()):
            raise ConfigurationError("potential parameters must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.center)

    def __call__(self, x) -> np.ndarray:
        return evaluate_potential(self, x)

    @property
    def lambda_floor(self) -> float:
        """inf over Lambda of V, by dense sampling of the closure of Lambda."""
        lo, hi = self.Lambda.bounds()
        axes = [np.linspace(a, b, 2001 if self.dim == 1 else 401) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        pts = pts[self.Lambda.closure_contains(pts)]
        return float(np.min(evaluate_potential(self, pts)))

    def recentered(self, center) -> "PotentialSpec":
        return PotentialSpec(self.kind, dict(self.params), self.Lambda, self.U, tuple(np.atleast_1d(center)))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "Lambda": self.Lambda.to_dict(),
            "U": self.U.to_dict(),
            "center": list(self.center),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        unknown = set(d) - {"kind", "params", "Lambda", "U", "center"}
        if unknown:
            raise ConfigurationError(f"unknown potential keys: {sorted(unknown)}")
        dim = len(d.get("Lambda", {}).get("center", d.get("Lambda", {}).get("lo", [0.0])))
        return cls(
            d["kind"],
            dict(d.get("params", {})),
            region_from_dict(d["Lambda"]),
            region_from_dict(d["U"]),
            tuple(d.get("center", [0.0] * dim)),
        )


def default_potential(dim: int = 1, kind: str = "compact_bump", **params) -> PotentialSpec:
    """Default bump V = (1 + 4|x|^2) max(0, 1 - (|x|/3)^2)^2, Lambda = B(0,1), U = B(0,2)."""
    zero = (0.0,) * dim
    return PotentialSpec(kind, params, Ball(zero, 1.0), Ball(zero, 2.0), zero)


def evaluate_potential(spec: PotentialSpec, x) -> np.ndarray:
    """V at a point or an array of points with trailing axis ``dim``.

    1-D inputs may also be given as a plain array of coordinates.
    """
    x = np.asarray(x, dtype=float)
    if spec.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    r2 = np.sum((x - np.array(spec.center)) ** 2, axis=-1)
    q = spec.params
    if spec.kind == "compact_bump":
        cut = np.maximum(0.0, 1.0 - r2 / q["radius"] ** 2)
        v = (q["base"] + q["curvature"] * r2) * cut**2
    elif spec.kind == "algebraic_decay":
        v = (q["base"] + q["curvature"] * r2) / (1.0 + (np.sqrt(r2) / q["scale"]) ** q["power"])
    else:
        v = q["base"] + q["curvature"] * r2 / (1.0 + r2 / q["width"] ** 2)
    return v


@dataclass
class AssumptionReport:
    inf_lambda: float
    inf_shell: float
    argmin: tuple[float, ...]
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_assumption_A(spec: PotentialSpec, grid: Grid) -> AssumptionReport:
    """Grid check of ``0 < inf_Lambda V < inf_{U minus Lambda} V``.

    Nodes are classified by membership of the node itself.
    """
    if grid.dim != spec.dim:
        raise ConfigurationError("grid and potential dimensions differ")
    if not compactly_contained(spec.Lambda, spec.U):
        raise ConfigurationError("Lambda is not compactly contained in U")
    lo, hi = spec.U.bounds()
    if np.any(lo < -grid.L) or np.any(hi > grid.L):
        raise ConfigurationError("U extends beyond the grid box")
    pts = grid.points
    in_lam = spec.Lambda.contains(pts)
    shell = spec.U.contains(pts) & ~in_lam
    if not in_lam.any() or not shell.any():
        raise ConfigurationError("grid too coarse to resolve Lambda and U")
    V = evaluate_potential(spec, pts)
    i = int(np.argmin(np.where(in_lam, V, np.inf)))
    inf_lam = float(V[i])
    inf_shell = float(np.min(V[shell]))
    return AssumptionReport(inf_lam, inf_shell, tuple(float(c) for c in pts[i]), bool(0 < inf_lam < inf_shell))


# --------------------------------------------------------------------------
# penalization


def penalization_potential(params: ModelParams, spec: PotentialSpec, x) -> np.ndarray:
    """``eps^{2s+2kappa} |x|^{-(2s+kappa)}`` off Lambda, 0 on Lambda."""
    x = np.asarray(x, dtype=float)
    if spec.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    inside = spec.Lambda.contains(x)
    r = np.sqrt(np.sum(x**2, axis=-1))
    s, k = params.s, params.kappa
    with np.errstate(divide="ignore"):
        val = params.eps ** (2 * s + 2 * k) * np.where(inside, 1.0, r) ** (-(2 * s + k))
    return np.where(inside, 0.0, val)


@dataclass
class AdmissibilityReport:
    eps: list
    values: list
    expected: list
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_penalization_admissible(
    params: ModelParams, eps_list, spec: PotentialSpec | None = None, grid: Grid | None = None
) -> AdmissibilityReport:
    """Evaluate ``sup_{x not in Lambda} P_eps(x) eps^{-(2s+3kappa/2)} |x|^{2s+kappa}`` per eps.

    Passes when each value is within 1e-12 of ``eps^{kappa/2}`` and the
    sequence decreases.
    """
    spec = spec or default_potential(params.N)
    grid = grid or Grid(params.N, 4.0, 256 if params.N == 1 else 64)
    pts = grid.points
    out = ~spec.Lambda.contains(pts)
    r = np.sqrt(np.sum(pts[out] ** 2, axis=-1))
    s, k = params.s, params.kappa
    vals, expected = [], []
    for e in eps_list:
        P = penalization_potential(params.replace(eps=float(e)), spec, pts[out])
        vals.append(float(np.max(P * e ** (-(2 * s + 1.5 * k)) * r ** (2 * s + k))))
        expected.append(float(e ** (k / 2)))
    close = all(abs(v - w) <= 1e-12 for v, w in zip(vals, expected))
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    return AdmissibilityReport([float(e) for e in eps_list], vals, expected, bool(close and decreasing))


# --------------------------------------------------------------------------
# nonlinearities


class _Primitive:
    """F(t) = int_0^t f for a vectorized f, via an adaptive-quadrature table.

    Knots are geometric; F at the knots is accumulated with ``scipy.integrate.quad``
    and a query adds an 8-point Gauss-Legendre rule on the last partial interval.
    """

    def __init__(self, f, t_min=1e-10, t_max=1e6, ratio=1.05):
        self.f = f
        n = int(np.ceil(np.log(t_max / t_min) / np.log(ratio))) + 1
        self.knots = np.concatenate([[0.0], t_min * ratio ** np.arange(n)])
        pieces = np.zeros(self.knots.size)
        for i in range(1, self.knots.size):
            val, err = integrate.quad(f, self.knots[i - 1], self.knots[i], epsabs=0.0, epsrel=1e-13)
            pieces[i] = val
        self.table = np.cumsum(pieces)
        self.gx, self.gw = np.polynomial.legendre.leggauss(8)

    def __call__(self, t) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.knots.size - 1)
        a = self.knots[idx]
        half = 0.5 * (t - a)
        nodes = a[..., None] + half[..., None] * (self.gx + 1.0)
        return self.table[idx] + half * np.sum(self.f(nodes) * self.gw, axis=-1)


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """Odd nonlinearity f with primitive F and superquadraticity exponent theta.

    Use :func:`pure_power`, :func:`rational_nonlinearity` or
    :func:`general_nonlinearity` to build one.  ``p`` is the growth exponent
    in ``f(t)/t^p -> 0``.
    """

    kind: str
    p: float
    theta: float
    f: Callable = field(repr=False)
    F: Callable = field(repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (2 < self.theta <= self.p + 1):
            raise ConfigurationError(f"theta must lie in (2, p+1], got {self.theta}")

    def to_dict(self) -> dict:
        if self.kind == "general":
            raise ConfigurationError("callable nonlinearities cannot be serialized")
        return {"kind": self.kind, "p": self.p, "theta": self.theta, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "NonlinearitySpec":
        d = dict(d)
        kind = d.pop("kind")
        if kind == "pure_power":
            return pure_power(d.pop("p"), theta=d.pop("theta", None))
        if kind == "rational":
            return rational_nonlinearity(**d)
        raise ConfigurationError(f"cannot build nonlinearity of kind {kind!r} from JSON")


def pure_power(p: float, theta: float | None = None) -> NonlinearitySpec:
    """f(t) = |t|^{p-2} t, F(t) = |t|^p / p."""
    p = float(p)
    return NonlinearitySpec(
        "pure_power",
        p,
        float(theta if theta is not None else p),
        lambda t: np.abs(t) ** (p - 2) * t,
        lambda t: np.abs(t) ** p / p,
    )


def rational_nonlinearity(a: float = 3.0, b: float = 1.2, theta: float = 2.5, p: float = 3.5) -> NonlinearitySpec:
    """f(t) = sign(t) |t|^a / (1 + |t|^b); the primitive is tabulated."""

    def f(t):
        t = np.asarray(t, dtype=float)
        at = np.abs(t)
        return np.sign(t) * at**a / (1.0 + at**b)

    return NonlinearitySpec("rational", float(p), float(theta), f, _Primitive(f), {"a": a, "b": b})


def general_nonlinearity(f, theta: float, p: float, F=None) -> NonlinearitySpec:
    return NonlinearitySpec("general", float(p), float(theta), f, F if F is not None else _Primitive(f))


@dataclass
class NonlinearityReport:
    outcomes: dict
    offenders: dict
    small_t_slope: float
    required_slope: float

    @property
    def passed(self) -> bool:
        return all(self.outcomes.values())

    def to_dict(self) -> dict:
        return {
            "outcomes": self.outcomes,
            "offenders": {k: [float(t) for t in v[:10]] for k, v in self.offenders.items()},
            "small_t_slope": self.small_t_slope,
            "required_slope": self.required_slope,
            "passed": self.passed,
        }


def check_nonlinearity_conditions(
    nl: NonlinearitySpec,
    sample_ts=None,
    *,
    params: ModelParams | None = None,
    raise_on_failure: bool = True,
) -> NonlinearityReport:
    """Numerically check (f1)-(f4) on positive increasing samples.

    (f1) oddness and small-t order: the log-log slope over the first decade of
    samples must be at least ``0.95 (1 + kappa_tilde)``.  (f2) ``f(t)/t^p``
    decreasing on the last tenth of the samples.  (f3) ``0 <= theta F(t) <=
    f(t) t`` with F by adaptive quadrature (equality is accepted so that the
    pure power with ``theta = p`` qualifies).  (f4) ``f(t)/t`` strictly
    increasing between consecutive samples.
    """
    params = params or default_params()
    ts = np.logspace(-6, 3, 400) if sample_ts is None else np.asarray(sample_ts, dtype=float)
    if np.any(ts <= 0) or np.any(np.diff(ts) <= 0):
        raise ConfigurationError("sample_ts must be positive and increasing")
    f = nl.f
    ft = np.asarray(f(ts), dtype=float)
    offenders: dict[str, np.ndarray] = {}

    odd_bad = np.abs(f(-ts) + ft) > 1e-12 * np.maximum(np.abs(ft), 1e-300)
    small = ts <= ts[0] * 10.0
    if small.sum() < 2:
        small = np.arange(ts.size) < max(2, ts.size // 10)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = float(np.polyfit(np.log(ts[small]), np.log(np.abs(ft[small])), 1)[0])
    required = 1.0 + params.kappa_tilde
    f1_ok = not odd_bad.any() and slope >= 0.95 * required
    offenders["f1"] = ts[odd_bad] if odd_bad.any() else (ts[small] if not f1_ok else ts[:0])

    tail = np.arange(ts.size) >= int(0.9 * ts.size)
    ratio = ft[tail] / ts[tail] ** nl.p
    f2_bad = np.diff(ratio) >= 0
    offenders["f2"] = ts[tail][1:][f2_bad]

    Fq = np.array([integrate.quad(f, 0.0, t, epsabs=0.0, epsrel=1e-12, limit=200)[0] for t in ts])
    lhs = nl.theta * Fq
    f3_bad = (lhs < 0) | (lhs > ft * ts * (1 + 1e-10))
    offenders["f3"] = ts[f3_bad]

    q = ft / ts
    f4_bad = np.diff(q) <= 0
    offenders["f4"] = ts[1:][f4_bad]

    outcomes = {
        "f1": bool(f1_ok),
        "f2": not f2_bad.any(),
        "f3": not f3_bad.any(),
        "f4": not f4_bad.any(),
    }
    report = NonlinearityReport(outcomes, offenders, slope, required)
    if raise_on_failure and not report.passed:
        first = next(k for k, v in outcomes.items() if not v)
        err = ConditionFailure(first, offenders[first])
        err.report = report
        raise err
    return report
