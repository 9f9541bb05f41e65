"""Fast invariant suite behind ``fracpen selftest``."""

from __future__ import annotations

import numpy as np

from .energy import EnergyContext, G_pointwise, crossover, nehari_project
from .fracops import apply_fraclap_direct, apply_fraclap_spectral, gagliardo_seminorm_sq
from .grid import Field, Grid
from .model import default_params, default_potential


def _modes(rng) -> bool:
    g = Grid(1, np.pi, 64)
    worst = 0.0
    for k in (1, 3, 7, 20):
        for s in (0.25, 0.5, 0.75):
            u = Field.from_function(g, lambda x: np.cos(k * x))
            worst = max(worst, np.max(np.abs(apply_fraclap_spectral(u, s).values - k ** (2 * s) * u.values)))
    const = apply_fraclap_spectral(Field(g, np.full(g.shape, 3.0)), 0.5).max_abs()
    return worst < 1e-12 and const < 1e-12


def _self_adjoint(rng) -> bool:
    g = Grid(2, 5.0, 32)
    u, v = Field(g, rng.normal(size=g.shape)), Field(g, rng.normal(size=g.shape))
    a = apply_fraclap_spectral(u, 0.3).inner(v)
    b = u.inner(apply_fraclap_spectral(v, 0.3))
    return abs(a - b) <= 1e-10 * max(abs(a), 1.0)


def _parseval(rng) -> bool:
    g = Grid(1, 8.0, 256)
    u = Field.from_function(g, lambda x: np.exp(-x * x))
    q = gagliardo_seminorm_sq(u, 0.4)
    return abs(q - u.inner(apply_fraclap_spectral(u, 0.4))) <= 1e-12 * q


def _direct_vs_spectral(rng) -> bool:
    g = Grid(1, 40.0, 2048)
    u = Field.from_function(g, lambda x: np.exp(-x * x / 2))
    pts = g.h * np.arange(-64, 65, 16)[:, None]
    d = apply_fraclap_direct(u, 0.5, pts)
    sp = apply_fraclap_spectral(u, 0.5).values[[g.index_of(p) for p in pts]].ravel()
    return np.max(np.abs(d - sp)) < 1e-3


def _gradient(rng) -> bool:
    params, spec = default_params(1), default_potential(1)
    g = Grid(1, 4.0, 512)
    ctx = EnergyContext.penalized(params, spec, g)
    ok = True
    for _ in range(3):
        c = rng.uniform(0.5, 2.0, size=3)
        u = Field.from_function(g, lambda x: c[0] * np.exp(-c[1] * (x - 0.3 * c[2]) ** 2))
        phi = Field.from_function(g, lambda x: np.exp(-((x - c[2]) ** 2)) * np.cos(2 * x))
        tau = 1e-4
        fd = (ctx.energy(u + phi * tau).total - ctx.energy(u - phi * tau).total) / (2 * tau)
        an = ctx.gradient(u).inner(phi)
        ok &= abs(fd - an) <= 1e-5 * max(abs(an), 1e-12)
    return bool(ok)


def _branch_continuity(rng) -> bool:
    P = np.array([0.05, 0.1773, 0.9])
    ts = crossover(P, 3.5)
    lo = G_pointwise(ts * (1 - 1e-13), P, np.zeros(3, bool), 3.5)
    hi = G_pointwise(ts * (1 + 1e-13), P, np.zeros(3, bool), 3.5)
    return bool(np.all(np.abs(hi - lo) < 1e-12))


def _nehari(rng) -> bool:
    g = Grid(1, 10.0, 256)
    ctx = EnergyContext.limiting(1.5, 0.25, 3.5, g)
    u = Field.from_function(g, lambda x: np.exp(-x * x))
    t, _ = nehari_project(ctx, u)
    closed = (ctx.quadratic_form(u) / (np.sum(u.values**3.5) * g.h)) ** (1 / 1.5)
    return abs(t - closed) <= 1e-10 * closed


CHECKS = {
    "fourier_modes": _modes,
    "self_adjoint": _self_adjoint,
    "parseval": _parseval,
    "direct_vs_spectral": _direct_vs_spectral,
    "gradient_consistency": _gradient,
    "branch_continuity": _branch_continuity,
    "nehari_closed_form": _nehari,
}


def run_selftest(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    return {name: bool(fn(rng)) for name, fn in CHECKS.items()}
