"""Critical points: limiting ground states, penalized solutions and eps-sweeps.

All solves use Nehari-projected descent: the residual is preconditioned by
``(eps^{2s} |xi|^{2s} + c)^{-1}``, a backtracking line search on the energy
picks the step, and every trial point is clipped to ``u >= 0`` and scaled
back onto the Nehari set with :func:`~fracpen.energy.nehari_project`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .energy import EnergyBreakdown, EnergyContext, nehari_project
from .errors import (
    ConfigurationError,
    ExtentError,
    InputError,
    ProjectionError,
    SolverError,
    TrivialSolutionError,
)
from .fracops import fourier_interpolate, fourier_shift, resample
from .grid import Field, Grid
from .model import ModelParams, PotentialSpec, check_assumption_A, evaluate_potential

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    ``initial_guess`` is ``{"kind": "gaussian", "center", "width",
    "amplitude"}``, ``{"kind": "file", "path"}`` or ``{"kind": "rescaled"}``
    (rescaled limiting ground state; the default for penalized solves).
    Missing Gaussian entries are filled from the problem scale.
    """

    max_iters: int = 3000
    gradient_tol: float = 1e-8
    armijo: float = 1e-4
    initial_step: float = 1.0
    max_halvings: int = 40
    shift: Optional[float] = None
    initial_guess: dict = field(default_factory=lambda: {"kind": "rescaled"})
    seed: int = 0
    trivial_tol: float = 1e-8
    restart_factor: float = 4.0
    warm_start: bool = True

    def __post_init__(self):
        if not (0 < self.gradient_tol <= 1e-2):
            raise ConfigurationError(f"gradient_tol must lie in (0, 1e-2], got {self.gradient_tol}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not (0 < self.armijo < 0.5):
            raise ConfigurationError("armijo constant must lie in (0, 1/2)")
        if self.initial_guess.get("kind") not in ("gaussian", "file", "rescaled"):
            raise ConfigurationError(f"unknown initial guess {self.initial_guess!r}")

    def replace(self, **changes) -> "SolverConfig":
        d = asdict(self)
        d.update(changes)
        return SolverConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown solver keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SolverResult:
    solution: Field
    energy: EnergyBreakdown
    residual_norm: float
    iterations: int
    converged: bool
    peak_location: tuple
    peak_value: float
    params: dict
    history: list = field(default_factory=list)
    restarts: int = 0
    error: Optional[str] = None

    @property
    def mountain_pass_value(self) -> float:
        return self.energy.total

    @property
    def relative_residual(self) -> float:
        n = self.solution.norm()
        return self.residual_norm / n if n > 0 else float("inf")

    def summary(self) -> dict:
        return {
            "grid": self.solution.grid.to_dict(),
            "energy": self.energy.to_dict(),
            "mountain_pass_value": self.mountain_pass_value,
            "residual_norm": self.residual_norm,
            "relative_residual": self.relative_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "peak_location": [float(c) for c in self.peak_location],
            "peak_value": self.peak_value,
            "restarts": self.restarts,
            "error": self.error,
            "params": self.params,
        }

    def save(self, outdir, stem: str) -> list[Path]:
        """Write ``stem.json`` and a field dump; returns the written paths."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = [outdir / f"{stem}.json"]
        paths[0].write_text(json.dumps(self.summary(), indent=2, sort_keys=True))
        paths.extend(write_field(self.solution, outdir / stem))
        return paths

    @classmethod
    def load(cls, json_path) -> "SolverResult":
        json_path = Path(json_path)
        d = json.loads(json_path.read_text())
        u = read_field(json_path.with_suffix(""))
        return cls(
            solution=u,
            energy=EnergyBreakdown(**d["energy"]),
            residual_norm=d["residual_norm"],
            iterations=d["iterations"],
            converged=d["converged"],
            peak_location=tuple(d["peak_location"]),
            peak_value=d["peak_value"],
            params=d["params"],
            restarts=d.get("restarts", 0),
            error=d.get("error"),
        )


# --------------------------------------------------------------------------
# field dumps


def write_field(u: Field, stem) -> list[Path]:
    """CSV (``x,u`` columns, full precision) for 1-D; for 2-D a raw
    little-endian float64 row-major ``.bin`` with a ``.header.json`` sidecar.
    """
    stem = Path(stem)
    g = u.grid
    if g.dim == 1:
        path = stem.with_suffix(".csv")
        with open(path, "w") as fh:
            fh.write(f"# dim=1 L={g.L!r} M={g.M}\nx,u\n")
            for x, v in zip(g.x, u.values):
                fh.write(f"{float(x)!r},{float(v)!r}\n")
        return [path]
    path = stem.with_suffix(".bin")
    u.values.astype("<f8").tofile(path)
    header = stem.with_suffix(".header.json")
    header.write_text(json.dumps({**g.to_dict(), "dtype": "<f8", "order": "C"}, sort_keys=True))
    return [path, header]


def read_field(stem) -> Field:
    stem = Path(stem)
    csv = stem.with_suffix(".csv")
    if csv.exists():
        first = csv.read_text().splitlines()[0]
        meta = dict(kv.split("=") for kv in first.lstrip("# ").split())
        grid = Grid(1, float(meta["L"]), int(meta["M"]))
        data = np.loadtxt(csv, delimiter=",", skiprows=2)
        return Field(grid, data[:, 1])
    header = stem.with_suffix(".header.json")
    if not header.exists():
        raise InputError(f"no field dump found for {stem}")
    h = json.loads(header.read_text())
    grid = Grid(h["dim"], h["L"], h["M"])
    return Field(grid, np.fromfile(stem.with_suffix(".bin"), dtype="<f8"))


# --------------------------------------------------------------------------
# descent


def _descend(ctx: EnergyContext, u: Field, config: SolverConfig, shift: float):
    """Nehari-projected preconditioned descent from ``u``.

    Returns ``(u, energy, residual_norm, iterations, converged, history)``.
    """
    grid = ctx.grid
    w = grid.cell_volume
    precond = 1.0 / (ctx.symbol + shift)
    _, u = nehari_project(ctx, Field(grid, np.maximum(u.values, 0.0)))
    E = ctx.energy(u)
    history = [E.total]
    step = config.initial_step
    for it in range(config.max_iters + 1):
        r = ctx.residual(u)
        rnorm = float(np.sqrt(np.sum(r * r) * w))
        if rnorm <= config.gradient_tol * u.norm():
            return u, E, rnorm, it, True, history
        if it == config.max_iters:
            break
        d = -np.fft.irfftn(np.fft.rfftn(r) * precond, s=grid.shape, axes=tuple(range(grid.dim)))
        slope = float(np.sum(r * d)) * w
        tau = min(1.0, 2.0 * step)
        for _ in range(config.max_halvings):
            trial = np.maximum(u.values + tau * d, 0.0)
            try:
                _, cand = nehari_project(ctx, Field(grid, trial), guess=1.0)
            except ProjectionError:
                tau *= 0.5
                continue
            Ec = ctx.energy(cand)
            if Ec.total <= E.total + config.armijo * tau * slope:
                break
            if abs(tau * slope) < 1e-12 * max(abs(E.total), 1.0):
                # energy differences are at roundoff level: fall back to residual decrease
                rc = ctx.residual(cand)
                if np.sqrt(np.sum(rc * rc) * w) < rnorm:
                    break
            tau *= 0.5
        else:
            # no acceptable step: the energy is flat to roundoff
            log.debug("line search exhausted at iteration %d", it)
            return u, E, rnorm, it, False, history
        step = tau
        u, E = cand, Ec
        history.append(E.total)
    return u, E, rnorm, config.max_iters, False, history


def _gaussian(grid: Grid, center, width: float, amplitude: float) -> Field:
    c = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    r2 = sum((x - ci) ** 2 for x, ci in zip(grid.coords, c))
    return Field(grid, amplitude * np.exp(-r2 / (2.0 * width**2)))


def _peak(u: Field, mask=None):
    v = np.where(mask, u.values, -np.inf) if mask is not None else u.values
    idx = np.unravel_index(int(np.argmax(v)), u.grid.shape)
    return tuple(float(u.grid.x[i]) for i in idx), float(u.values[idx])


def _run(ctx, guess: Field, config: SolverConfig, shift: float):
    restarts = 0
    while True:
        u, E, rn, it, ok, hist = _descend(ctx, guess, config, shift)
        if u.max_abs() >= config.trivial_tol:
            return u, E, rn, it, ok, hist, restarts
        if restarts >= 1:
            raise TrivialSolutionError("descent collapsed to the zero field after a restart")
        restarts += 1
        guess = guess * config.restart_factor


# --------------------------------------------------------------------------
# limiting problem


def limiting_ground_state(
    a: float, s: float, p: float, grid: Grid, config: SolverConfig | None = None, initial: Field | None = None
) -> SolverResult:
    """Ground state of ``(-Delta)^s v + a v = |v|^{p-2} v`` on ``grid``."""
    config = config or SolverConfig(initial_guess={"kind": "gaussian"})
    if not a > 0:
        raise InputError(f"a must be positive, got {a}")
    ctx = EnergyContext.limiting(a, s, p, grid)
    if initial is None:
        initial = _initial_guess(config, grid, center=0.0, width=a ** (-1.0 / (2 * s)), amplitude=a ** (1.0 / (p - 2)))
    u, E, rn, it, ok, hist, restarts = _run(ctx, initial, config, config.shift or a)
    loc, val = _peak(u)
    if not ok:
        log.warning("limiting solve a=%g did not converge (relative residual %.2e)", a, rn / u.norm())
    return SolverResult(u, E, rn, it, ok, loc, val, {"a": a, "s": s, "p": p, "N": grid.dim}, hist, restarts)


def _initial_guess(config: SolverConfig, grid: Grid, center, width, amplitude) -> Field:
    g = dict(config.initial_guess)
    kind = g.pop("kind")
    if kind == "file":
        u = read_field(Path(g["path"]).with_suffix(""))
        if u.grid != grid:
            raise ConfigurationError("initial-guess field lives on a different grid")
        return u
    return _gaussian(grid, g.get("center", center), g.get("width", width), g.get("amplitude", amplitude))


def _interpolate(v: Field, axes_points) -> np.ndarray:
    # dense trigonometric evaluation is exact but costs O(points * M) per axis
    if max(len(p) for p in axes_points) * v.grid.M <= 2**24:
        return fourier_interpolate(v, axes_points)
    return resample(v, axes_points)


def rescaled_grid(grid: Grid, a: float, s: float) -> Grid:
    """Grid on which the rescaled ground state is sampled exactly."""
    return Grid(grid.dim, grid.L / a ** (1.0 / (2 * s)), grid.M)


def rescale_ground_state(
    v: Field, a: float, s: float, p: float, target: Grid | None = None, extent_tol: float = 1e-2
) -> Field:
    """``v_a(y) = a^{1/(p-2)} v(a^{1/(2s)} y)``.

    Without ``target`` the result lives on :func:`rescaled_grid`, where the
    map is exact node by node.  With ``target`` the dilated field is obtained
    by band-limited interpolation; target points whose preimage leaves the
    box are set to 0, which is allowed only when ``v`` is below
    ``extent_tol * max|v|`` on the boundary (otherwise :class:`ExtentError`).
    """
    if not a > 0:
        raise InputError(f"a must be positive, got {a}")
    k = a ** (1.0 / (2 * s))
    amp = a ** (1.0 / (p - 2))
    if target is None:
        return Field(rescaled_grid(v.grid, a, s), amp * v.values)
    if target.dim != v.grid.dim:
        raise InputError("target grid has a different dimension")
    src = k * target.x
    outside = (src < -v.grid.L) | (src > v.grid.L - v.grid.h)
    if outside.any() and v.boundary_max() > extent_tol * v.max_abs():
        raise ExtentError(
            f"dilation by {k:.4g} samples outside [-{v.grid.L}, {v.grid.L}) where the field is not negligible"
        )
    vals = _interpolate(v, [src] * target.dim)
    for axis in range(target.dim):
        shape = [1] * target.dim
        shape[axis] = -1
        vals = vals * (~outside).reshape(shape)
    return Field(target, amp * vals)


# --------------------------------------------------------------------------
# penalized problem

_LIMIT_CACHE: dict = {}


def _limiting_profile(a: float, s: float, p: float, grid: Grid, config: SolverConfig) -> Field:
    key = (round(a, 14), s, p, grid, config.gradient_tol)
    if key not in _LIMIT_CACHE:
        cfg = config.replace(initial_guess={"kind": "gaussian"}, gradient_tol=max(config.gradient_tol, 1e-6))
        _LIMIT_CACHE[key] = limiting_ground_state(a, s, p, grid, cfg).solution
    return _LIMIT_CACHE[key]


def concentrated_guess(params: ModelParams, spec: PotentialSpec, grid: Grid, config: SolverConfig) -> Field:
    """``v_{V(x0)}((x - x0)/eps)`` with ``x0`` the grid argmin of V on Lambda."""
    pts = grid.points
    inside = spec.Lambda.contains(pts)
    V = evaluate_potential(spec, pts)
    i = int(np.argmin(np.where(inside, V, np.inf)))
    x0, a = pts[i], float(V[i])
    # the nodes x_j/eps are exactly the nodes of the limiting grid below
    lgrid = Grid(grid.dim, grid.L / params.eps, grid.M)
    v = _limiting_profile(a, params.s, params.p, lgrid, config)
    shifted = fourier_shift(v, -x0 / params.eps) if np.any(x0 != 0) else v
    return Field(grid, shifted.values)


def penalized_solve(
    params: ModelParams,
    spec: PotentialSpec,
    grid: Grid,
    config: SolverConfig | None = None,
    initial: Field | None = None,
    nl=None,
) -> SolverResult:
    """Positive critical point of the penalized functional at the mountain-pass level."""
    config = config or SolverConfig()
    report = check_assumption_A(spec, grid)
    if not report.passed:
        raise ConfigurationError(f"potential violates the local-minimum assumption: {report}")
    if grid.h > params.eps / 10 * (1 + 1e-12):
        raise ConfigurationError(f"grid spacing {grid.h:.4g} exceeds eps/10 = {params.eps / 10:.4g}")
    ctx = EnergyContext.penalized(params, spec, grid, nl)
    if initial is None:
        if config.initial_guess["kind"] == "rescaled":
            initial = concentrated_guess(params, spec, grid, config)
        else:
            x0 = report.argmin
            initial = _initial_guess(config, grid, x0, params.eps, report.inf_lambda ** (1 / (params.p - 2)))
    try:
        u, E, rn, it, ok, hist, restarts = _run(ctx, initial, config, config.shift or report.inf_lambda)
    except ProjectionError as exc:
        raise SolverError(f"penalized solve at eps={params.eps}: {exc}") from exc
    from .verify import locate_peak

    loc, val = locate_peak(u, spec.Lambda, warn=False)
    if not ok:
        log.warning("penalized solve eps=%g did not converge (relative residual %.2e)", params.eps, rn / u.norm())
    echo = {"model": params.to_dict(), "potential": spec.to_dict()}
    if nl is not None:
        echo["nonlinearity"] = {"kind": nl.kind, "p": nl.p, "theta": nl.theta, **nl.params}
    return SolverResult(u, E, rn, it, ok, loc, val, echo, hist, restarts)


def _transfer(u: Field, grid: Grid) -> Field:
    if u.grid == grid:
        return u
    if u.grid.L != grid.L:
        raise ConfigurationError("warm start needs grids with the same extent")
    return Field(grid, _interpolate(u, [grid.x] * grid.dim))


def epsilon_sweep(
    params: ModelParams,
    spec: PotentialSpec,
    grid: Grid,
    eps_list,
    config: SolverConfig | None = None,
    nl=None,
) -> list[SolverResult]:
    """One penalized solve per eps (decreasing), warm-started in order.

    A failing entry is recorded as a non-converged result carrying the error
    message; the sweep continues from the last successful solution.
    """
    config = config or SolverConfig()
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError("eps_list must be strictly decreasing")
    if grid.h > min(eps_list) / 10 * (1 + 1e-12):
        raise ConfigurationError(f"grid spacing {grid.h:.4g} exceeds min(eps)/10")
    results: list[SolverResult] = []
    previous: Optional[Field] = None
    for eps in eps_list:
        p = params.replace(eps=eps)
        start = previous if (config.warm_start and previous is not None) else None
        try:
            res = penalized_solve(p, spec, grid, config, initial=start, nl=nl)
        except (SolverError, ProjectionError) as exc:
            log.error("sweep entry eps=%g failed: %s", eps, exc)
            z = Field(grid, np.zeros(grid.shape))
            res = SolverResult(
                z, EnergyBreakdown(0.0, 0.0, 0.0, 0.0), float("nan"), 0, False, (float("nan"),) * grid.dim,
                float("nan"), {"model": p.to_dict(), "potential": spec.to_dict()}, error=str(exc),
            )
        else:
            previous = res.solution
        results.append(res)
    return results
