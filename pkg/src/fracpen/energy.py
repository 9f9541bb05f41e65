"""Penalized nonlinearity, energy functionals, gradients and Nehari projection.

The penalized nonlinearity is

    g_eps(x, t) = f(t+)                     for x in Lambda,
    g_eps(x, t) = min(f(t+), P_eps(x) t+)   otherwise,

with ``f(t) = t^{p-1}`` for the pure power.  Its primitive in t is written
``G_eps``.  The functional

    J_eps(u) = eps^{2s}/2 [u]^2 + 1/2 int V u^2 - int G_eps(x, u)

is discretized with the grid weight ``h^N`` for every term, and its L^2
gradient is the residual ``eps^{2s} (-Delta)^s u + V u - g_eps(x, u)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import InputError, NumericalIntegrationError, ProjectionError
from .fracops import gagliardo_seminorm_sq
from .grid import Field, Grid
from .model import (
    ModelParams,
    NonlinearitySpec,
    PotentialSpec,
    evaluate_potential,
    penalization_potential,
)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    nonlinear: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# pointwise nonlinearity


def crossover(P, p: float):
    """Point where ``t^{p-1}`` meets ``P t``: ``P^{1/(p-2)}``."""
    return np.asarray(P, dtype=float) ** (1.0 / (p - 2.0))


def g_pointwise(t, P, inside, p: float) -> np.ndarray:
    """Pure-power g_eps for arrays of t, P_eps values and Lambda membership."""
    tp = np.maximum(np.asarray(t, dtype=float), 0.0)
    power = tp ** (p - 1.0)
    return np.where(inside, power, np.minimum(power, P * tp))


def G_pointwise(t, P, inside, p: float) -> np.ndarray:
    """Closed-form primitive of :func:`g_pointwise` in t."""
    tp = np.maximum(np.asarray(t, dtype=float), 0.0)
    full = tp**p / p
    ts = crossover(P, p)
    capped = ts**p * (1.0 / p - 0.5) + 0.5 * P * tp**2
    return np.where(inside | (tp <= ts), full, capped)


def _membership(params: ModelParams, spec: PotentialSpec, x):
    x = np.asarray(x, dtype=float)
    if spec.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return spec.Lambda.contains(x), penalization_potential(params, spec, x)


def g_eps(params: ModelParams, spec: PotentialSpec, x, t):
    inside, P = _membership(params, spec, x)
    return g_pointwise(t, P, inside, params.p)


def G_eps(params: ModelParams, spec: PotentialSpec, x, t):
    inside, P = _membership(params, spec, x)
    return G_pointwise(t, P, inside, params.p)


def general_crossover(nl: NonlinearitySpec, P, t_hi: float = 1e8) -> np.ndarray:
    """Solve ``f(t)/t = P`` for each entry of P by vectorized bisection.

    ``f(t)/t`` is increasing by (f4).  Entries with ``f(t_hi)/t_hi < P`` get
    ``inf`` (the cap never binds below ``t_hi``).
    """
    P = np.atleast_1d(np.asarray(P, dtype=float))
    lo = np.full(P.shape, 1e-14)
    hi = np.full(P.shape, t_hi)
    never = nl.f(hi) / hi < P
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        below = nl.f(mid) / mid < P
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi / lo - 1.0 < 1e-15):
            break
    out = np.sqrt(lo * hi)
    out[never] = np.inf
    return out


def general_g_pointwise(nl: NonlinearitySpec, t, P, inside) -> np.ndarray:
    tp = np.maximum(np.asarray(t, dtype=float), 0.0)
    ft = nl.f(tp)
    return np.where(inside, ft, np.minimum(ft, P * tp))


def general_G_pointwise(nl: NonlinearitySpec, t, P, inside, tstar) -> np.ndarray:
    """Primitive of :func:`general_g_pointwise`; ``tstar`` from :func:`general_crossover`."""
    tp = np.maximum(np.asarray(t, dtype=float), 0.0)
    Ft = nl.F(tp)
    fin = np.isfinite(tstar)
    ts = np.where(fin, tstar, 0.0)
    capped = nl.F(ts) + 0.5 * P * (tp**2 - ts**2)
    out = np.where(inside | ~fin | (tp <= ts), Ft, capped)
    if not np.all(np.isfinite(out)):
        raise NumericalIntegrationError("primitive of the nonlinearity is not finite")
    return out


def general_g_eps(params: ModelParams, spec: PotentialSpec, nl: NonlinearitySpec, x, t):
    inside, P = _membership(params, spec, x)
    return general_g_pointwise(nl, t, P, inside)


def general_G_eps(params: ModelParams, spec: PotentialSpec, nl: NonlinearitySpec, x, t):
    inside, P = _membership(params, spec, x)
    tstar = np.where(inside, np.inf, general_crossover(nl, np.where(inside, 1.0, P)).reshape(np.shape(P)))
    return general_G_pointwise(nl, t, P, inside, tstar)


# --------------------------------------------------------------------------
# energy context


class EnergyContext:
    """Grid-sampled data of one functional: ``eps``, V, P_eps and Lambda mask.

    Build with :meth:`penalized` or :meth:`limiting`.  ``nl=None`` selects the
    pure power with closed-form primitive.
    """

    def __init__(self, grid: Grid, s: float, p: float, eps: float, V, P, inside, nl=None):
        self.grid = grid
        self.s = float(s)
        self.p = float(p)
        self.eps = float(eps)
        self.V = np.broadcast_to(np.asarray(V, dtype=float), grid.shape)
        self.P = np.broadcast_to(np.asarray(P, dtype=float), grid.shape)
        self.inside = np.broadcast_to(np.asarray(inside, dtype=bool), grid.shape)
        self.nl = nl
        self.kin = self.eps ** (2 * self.s)
        self.symbol = self.kin * grid.symbol(self.s)
        self._tstar = None

    @classmethod
    def penalized(cls, params: ModelParams, spec: PotentialSpec, grid: Grid, nl=None) -> "EnergyContext":
        if grid.dim != params.N or spec.dim != params.N:
            raise InputError("grid, potential and parameters disagree on the dimension")
        pts = grid.points
        V = evaluate_potential(spec, pts).reshape(grid.shape)
        inside = spec.Lambda.contains(pts).reshape(grid.shape)
        P = penalization_potential(params, spec, pts).reshape(grid.shape)
        ctx = cls(grid, params.s, params.p, params.eps, V, P, inside, nl)
        ctx.params, ctx.spec = params, spec
        return ctx

    @classmethod
    def limiting(cls, a: float, s: float, p: float, grid: Grid) -> "EnergyContext":
        if not a > 0:
            raise InputError(f"a must be positive, got {a}")
        return cls(grid, s, p, 1.0, a, 0.0, True)

    @property
    def tstar(self) -> np.ndarray:
        if self._tstar is None:
            out = ~self.inside
            ts = np.full(self.grid.shape, np.inf)
            if self.nl is None:
                ts[out] = crossover(self.P[out], self.p)
            else:
                ts[out] = general_crossover(self.nl, self.P[out])
            self._tstar = ts
        return self._tstar

    # pointwise pieces ------------------------------------------------------
    def g(self, v: np.ndarray) -> np.ndarray:
        if self.nl is None:
            return g_pointwise(v, self.P, self.inside, self.p)
        return general_g_pointwise(self.nl, v, self.P, self.inside)

    def G(self, v: np.ndarray) -> np.ndarray:
        if self.nl is None:
            return G_pointwise(v, self.P, self.inside, self.p)
        return general_G_pointwise(self.nl, v, self.P, self.inside, self.tstar)

    def kinetic_op(self, v: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(np.fft.rfftn(v) * self.symbol, s=self.grid.shape, axes=tuple(range(self.grid.dim)))

    # functionals -----------------------------------------------------------
    def energy(self, u: Field) -> EnergyBreakdown:
        v = u.values
        w = self.grid.cell_volume
        kinetic = 0.5 * self.kin * gagliardo_seminorm_sq(u, self.s)
        potential = 0.5 * float(np.sum(self.V * v * v)) * w
        nonlinear = float(np.sum(self.G(v))) * w
        return EnergyBreakdown(kinetic, potential, nonlinear, kinetic + potential - nonlinear)

    def residual(self, u: Field) -> np.ndarray:
        v = u.values
        return self.kinetic_op(v) + self.V * v - self.g(v)

    def gradient(self, u: Field) -> Field:
        return Field(self.grid, self.residual(u))

    def quadratic_form(self, u: Field) -> float:
        """``eps^{2s}[u]^2 + int V u^2``."""
        v = u.values
        return self.kin * gagliardo_seminorm_sq(u, self.s) + float(np.sum(self.V * v * v)) * self.grid.cell_volume

    def fibering_derivative(self, u: Field, t: float, Q: Optional[float] = None) -> float:
        """``phi(t) = <J'(t u), u> = t Q(u) - int g(x, t u) u``."""
        Q = self.quadratic_form(u) if Q is None else Q
        return t * Q - float(np.sum(self.g(t * u.values) * u.values)) * self.grid.cell_volume


# --------------------------------------------------------------------------
# public wrappers


def penalized_energy(params: ModelParams, spec: PotentialSpec, u: Field, nl=None) -> EnergyBreakdown:
    return EnergyContext.penalized(params, spec, u.grid, nl).energy(u)


def penalized_gradient(params: ModelParams, spec: PotentialSpec, u: Field, nl=None) -> Field:
    """Residual ``eps^{2s}(-Delta)^s u + V u - g_eps(x,u)``."""
    return EnergyContext.penalized(params, spec, u.grid, nl).gradient(u)


def limiting_energy(a: float, s: float, p: float, v: Field) -> EnergyBreakdown:
    """``J_a(v) = 1/2 int |(-Delta)^{s/2} v|^2 + a v^2 - 1/p int v+^p``."""
    return EnergyContext.limiting(a, s, p, v.grid).energy(v)


def limiting_gradient(a: float, s: float, p: float, v: Field) -> Field:
    return EnergyContext.limiting(a, s, p, v.grid).gradient(v)


def nehari_project(
    ctx: EnergyContext, u: Field, rtol: float = 1e-12, guess: float | None = None
) -> tuple[float, Field]:
    """Scale ``u`` onto the Nehari set: the zero of ``t -> <J'(t u), u>``.

    The bracket starts at [1e-6, 1e6] and each end is expanded by a factor 10
    at most three times.  With ``guess`` the bracket ``[guess/2, 2 guess]`` is
    tried first.
    """
    if not np.any(u.values > 0):
        raise InputError("cannot project a field without a positive part")
    Q = ctx.quadratic_form(u)
    w = ctx.grid.cell_volume
    if ctx.nl is None:
        # for u >= 0 the integrand is min(t^{p-1} u^p, t P u^2) off Lambda
        up = np.maximum(u.values, 0.0)
        a = up**ctx.p
        A_in = float(np.sum(a[ctx.inside])) * w
        a_out = a[~ctx.inside]
        b_out = (ctx.P * up * up)[~ctx.inside]
        live = a_out > 0
        a_out, b_out = a_out[live], b_out[live]

        def phi(t):
            tp = t ** (ctx.p - 1.0)
            return t * Q - tp * A_in - float(np.sum(np.minimum(tp * a_out, t * b_out))) * w

    else:

        def phi(t):
            return ctx.fibering_derivative(u, t, Q)

    lo = hi = None
    if guess is not None and guess > 0:
        if phi(guess / 2) > 0 > phi(guess * 2):
            lo, hi = guess / 2, guess * 2
    if lo is None:
        lo, hi = 1e-6, 1e6
        for _ in range(3):
            if phi(lo) > 0:
                break
            lo /= 10.0
        for _ in range(3):
            if phi(hi) < 0:
                break
            hi *= 10.0
        flo, fhi = phi(lo), phi(hi)
        if not (flo > 0 > fhi):
            raise ProjectionError(
                f"fibering derivative has no sign change on [{lo:.1e}, {hi:.1e}] (phi={flo:.3e}, {fhi:.3e})"
            )
    t = optimize.brentq(phi, lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps), maxiter=500)
    return t, u * t
