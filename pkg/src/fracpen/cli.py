"""Command-line entry point.

Usage::

    fracpen <command> [--config FILE] [--set key.path=value ...] [--out DIR]

Commands: ``solve-limiting``, ``solve-penalized``, ``sweep``, ``verify``,
``selftest``.  Exit status: 0 when every requested check passes, 1 when a
check fails, 2 for an invalid configuration or missing inputs, 3 for a
numerical failure.  ``FRACPEN_OUTPUT_ROOT`` prefixes relative output
directories.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    FracPenError,
    InsufficientDataError,
    NumericalIntegrationError,
    ProjectionError,
    SolverError,
)
from .grid import Grid
from .model import ModelParams, NonlinearitySpec, PotentialSpec, default_potential

log = logging.getLogger("fracpen")

OUTPUT_ENV = "FRACPEN_OUTPUT_ROOT"

ALL_CHECKS = [
    "converged",
    "peaks_in_closure",
    "gap_nonincreasing",
    "gap_final",
    "outside_decay",
    "nondegenerate",
    "envelope_stable",
    "alpha_window",
    "boundary_clean",
    "consistency",
    "upper_bound",
    "barrier",
    "scaling",
]


def default_config(dim: int = 1) -> dict:
    """The default experiment as a plain JSON-ready dict."""
    if dim == 1:
        model = {"N": 1, "s": 0.25, "p": 3.5, "eps": 0.1, "alpha": 0.45, "kappa": 0.04375}
        grid = {"L": 4.0, "M": 16384}
        limiting_grid = {"L": 20.0, "M": 32768}
    else:
        model = {"N": 2, "s": 0.5, "p": 3.5, "eps": 0.2, "alpha": 0.8, "kappa": 0.05}
        grid = {"L": 4.0, "M": 512}
        limiting_grid = {"L": 20.0, "M": 512}
    return {
        "model": model,
        "potential": default_potential(dim).to_dict(),
        "nonlinearity": {"kind": "pure_power"},
        "grid": grid,
        "solver": {"max_iters": 3000, "gradient_tol": 1e-8},
        "limiting": {"a_list": [1.0, 2.0, 4.0], "grid": limiting_grid},
        "sweep": {"eps_list": [0.2, 0.1, 0.05], "warm_start": True},
        "verify": {
            "checks": list(ALL_CHECKS),
            "concentration": {"R": 10.0, "rho": 1.0, "gap_tol": 0.05, "decay_per_halving": 0.3},
            "decay": {"boundary_tol": 1e-8},
            "slack": {"0.2": 0.15, "0.1": 0.10, "0.05": 0.05},
            "barrier": {"radii": None},
        },
        "output": "fracpen-out",
        "seed": 0,
    }


_TOP_KEYS = set(default_config())
_BLOCK_KEYS = {
    "grid": {"L", "M"},
    "limiting": {"a_list", "grid"},
    "sweep": {"eps_list", "warm_start"},
    "verify": {"checks", "concentration", "decay", "slack", "barrier"},
}


@dataclass
class ExperimentConfig:
    raw: dict
    params: ModelParams
    spec: PotentialSpec
    nl: NonlinearitySpec | None
    grid: Grid
    solver: object
    a_list: list
    limiting_grid: Grid
    eps_list: list
    verify: dict
    output: Path
    seed: int


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("potential", "nonlinearity"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_override(cfg: dict, assignment: str) -> None:
    """Apply ``a.b.c=value``; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigurationError(f"override {assignment!r} is not of the form key=value")
    key, text = assignment.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    parts = key.strip().split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            if part in node and node[part] is not None:
                raise ConfigurationError(f"override {key}: {part} is not a block")
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value


def resolve_config(path: str | None = None, overrides=()) -> dict:
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigurationError(f"config file {p} does not exist")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError("config root must be a JSON object")
    dim = int(raw.get("model", {}).get("N", 1))
    for o in overrides:
        if o.startswith("model.N="):
            dim = int(json.loads(o.split("=", 1)[1]))
    cfg = _merge(default_config(dim), raw)
    for o in overrides:
        apply_override(cfg, o)
    return cfg


def build_config(cfg: dict) -> ExperimentConfig:
    """Validate every block; errors name the offending field."""
    from .solver import SolverConfig

    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    for block, keys in _BLOCK_KEYS.items():
        extra = set(cfg[block]) - keys
        if extra:
            raise ConfigurationError(f"unknown keys in {block}: {sorted(extra)}")

    def wrap(block, fn):
        try:
            return fn()
        except (ConfigurationError, TypeError, ValueError, KeyError) as exc:
            raise ConfigurationError(f"{block}: {exc}") from exc

    params = wrap("model", lambda: ModelParams.from_dict(cfg["model"]))
    spec = wrap("potential", lambda: PotentialSpec.from_dict(cfg["potential"]))
    nl_block = dict(cfg["nonlinearity"])
    if nl_block.get("kind") == "pure_power" and set(nl_block) <= {"kind", "p", "theta"}:
        nl = None
        if nl_block.get("p", params.p) != params.p:
            raise ConfigurationError("nonlinearity.p must match model.p for the pure power")
    else:
        nl_block.setdefault("p", params.p)
        nl = wrap("nonlinearity", lambda: NonlinearitySpec.from_dict(nl_block))
    grid = wrap("grid", lambda: Grid(params.N, float(cfg["grid"]["L"]), int(cfg["grid"]["M"])))
    lg = cfg["limiting"]["grid"]
    limiting_grid = wrap("limiting.grid", lambda: Grid(params.N, float(lg["L"]), int(lg["M"])))
    solver = wrap("solver", lambda: SolverConfig.from_dict(cfg["solver"]))
    a_list = wrap("limiting.a_list", lambda: [float(a) for a in cfg["limiting"]["a_list"]])
    if any(a <= 0 for a in a_list):
        raise ConfigurationError("limiting.a_list: values must be positive")
    eps_list = wrap("sweep.eps_list", lambda: [float(e) for e in cfg["sweep"]["eps_list"]])
    if not eps_list or any(b >= a for a, b in zip(eps_list, eps_list[1:])) or min(eps_list) <= 0:
        raise ConfigurationError("sweep.eps_list: must be positive and strictly decreasing")
    if not isinstance(cfg["sweep"]["warm_start"], bool):
        raise ConfigurationError("sweep.warm_start: must be true or false")
    solver = solver.replace(warm_start=cfg["sweep"]["warm_start"], seed=int(cfg["seed"]))
    checks = cfg["verify"]["checks"]
    bad = set(checks) - set(ALL_CHECKS)
    if bad:
        raise ConfigurationError(f"verify.checks: unknown checks {sorted(bad)}")
    if spec.dim != params.N:
        raise ConfigurationError("potential: dimension differs from model.N")
    out = Path(cfg["output"])
    root = os.environ.get(OUTPUT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return ExperimentConfig(cfg, params, spec, nl, grid, solver, a_list, limiting_grid, eps_list, cfg["verify"], out,
                            int(cfg["seed"]))


# --------------------------------------------------------------------------
# outputs


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _to_jsonable(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return obj


def emit_outputs(results: dict, reports: dict, outdir, config: dict | None = None) -> list[dict]:
    """Write result summaries, field dumps and reports; return the manifest.

    ``results`` maps a stem to a SolverResult; ``reports`` maps a name to a
    report object (JSON via ``to_dict``) and, for concentration reports, an
    additional CSV table.  ``manifest.json`` lists every artifact with its
    SHA-256 and embeds the resolved configuration.
    """
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {outdir}: {exc}") from exc
    written: list[Path] = []
    for stem, res in results.items():
        written.extend(res.save(outdir, stem))
    for name, rep in reports.items():
        path = outdir / f"{name}.json"
        path.write_text(json.dumps(_to_jsonable(rep), indent=2, sort_keys=True, default=float))
        written.append(path)
        if hasattr(rep, "to_csv"):
            cpath = outdir / f"{name}.csv"
            cpath.write_text(rep.to_csv())
            written.append(cpath)
    manifest = [{"path": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size} for p in written]
    (outdir / "manifest.json").write_text(
        json.dumps({"artifacts": manifest, "config": config}, indent=2, sort_keys=True)
    )
    return manifest


# --------------------------------------------------------------------------
# commands


class CheckFailure(Exception):
    pass


def _stem(prefix: str, value: float) -> str:
    return f"{prefix}{value:g}".replace(".", "p")


def _requested(exp: ExperimentConfig) -> set:
    return set(exp.verify["checks"])


def _slack(exp: ExperimentConfig) -> dict:
    return {float(k): float(v) for k, v in exp.verify["slack"].items()}


def cmd_solve_limiting(exp: ExperimentConfig):
    from .solver import limiting_ground_state
    from .verify import scaling_law_check

    s, p = exp.params.s, exp.params.p
    cfg = exp.solver.replace(initial_guess={"kind": "gaussian"}) if exp.solver.initial_guess["kind"] == "rescaled" \
        else exp.solver
    results = {_stem("limiting_a", a): limiting_ground_state(a, s, p, exp.limiting_grid, cfg) for a in exp.a_list}
    reports, failed = {}, []
    if len(exp.a_list) >= 3:
        rep = scaling_law_check(list(results.values()), s, p, exp.params.N)
        reports["scaling"] = rep
        if "scaling" in _requested(exp) and not rep.passed:
            failed.append(f"scaling: slope {rep.slope:.5f} vs {rep.expected:.5f}")
    if "converged" in _requested(exp):
        failed += [f"converged: {k}" for k, r in results.items() if not r.converged]
    return results, reports, failed


def cmd_solve_penalized(exp: ExperimentConfig):
    from .solver import penalized_solve
    from .verify import penalization_consistency_check

    res = penalized_solve(exp.params, exp.spec, exp.grid, exp.solver, nl=exp.nl)
    results = {_stem("penalized_eps", exp.params.eps): res}
    cons = penalization_consistency_check(res.solution, exp.params, exp.spec, exp.nl)
    failed = []
    if "converged" in _requested(exp) and not res.converged:
        failed.append("converged: penalized solve")
    if "consistency" in _requested(exp) and not cons.passed:
        failed.append(f"consistency: {cons.n_violations} nodes with active cap")
    return results, {"consistency": cons}, failed


def _limiting_reference(exp: ExperimentConfig) -> dict:
    """C(min V) and the peak of the a=1 profile (peak of v_a over a^{1/(p-2)})."""
    from .solver import limiting_ground_state

    a = exp.spec.lambda_floor
    cfg = exp.solver.replace(initial_guess={"kind": "gaussian"})
    res = limiting_ground_state(a, exp.params.s, exp.params.p, exp.limiting_grid, cfg)
    return {"a": a, "energy": res.energy.total, "profile_peak": res.peak_value / a ** (1 / (exp.params.p - 2))}


def _verify_sweep(exp: ExperimentConfig, results: list, ref: dict | None):
    from .verify import (
        BarrierSpec,
        barrier_supersolution_check,
        concentration_check,
        energy_upper_bound_check,
        penalization_consistency_check,
    )

    req = _requested(exp)
    ckw = dict(exp.verify["concentration"])
    if ref is not None:
        ckw.setdefault("profile_peak", ref["profile_peak"])
    rep = concentration_check(results, exp.spec, boundary_tol=exp.verify["decay"]["boundary_tol"], **ckw)
    reports = {"concentration": rep}
    failed = [f"concentration: {k}" for k, ok in rep.checks.items() if k in req and not ok]
    eps_min = min(float(e["eps"]) for e in rep.entries)
    cons = {}
    for r in results:
        mp = ModelParams.from_dict(r.params["model"])
        cons[_stem("eps", mp.eps)] = penalization_consistency_check(r.solution, mp, exp.spec, exp.nl).to_dict()
    reports["consistency"] = cons
    if "consistency" in req:
        # the pointwise certificate is required at the smallest eps
        smallest = cons[_stem("eps", eps_min)]
        if not smallest["passed"]:
            failed.append("consistency: cap active at the smallest eps")
    if ref is not None and "upper_bound" in req:
        ub = energy_upper_bound_check(rep, ref["energy"], _slack(exp))
        reports["upper_bound"] = ub
        if "upper_bound" in req and not ub.passed:
            failed.append("upper_bound: normalized energy outside the slack band")
    if "barrier" in req:
        x_eps = rep.entries[-1]["x_eps"]
        b = barrier_supersolution_check(
            BarrierSpec.from_params(exp.params), exp.params.replace(eps=eps_min), exp.spec,
            sample_points=exp.verify["barrier"]["radii"], x_eps=x_eps,
        )
        reports["barrier"] = b
        if not b.passed:
            failed.append("barrier: supersolution inequality violated")
    return reports, failed


def cmd_sweep(exp: ExperimentConfig):
    from .solver import epsilon_sweep

    sweep = epsilon_sweep(exp.params, exp.spec, exp.grid, exp.eps_list, exp.solver, nl=exp.nl)
    failures = [r.error for r in sweep if r.error]
    if failures:
        raise SolverError("; ".join(failures))
    ref = _limiting_reference(exp) if exp.nl is None else None
    results = {_stem("sweep_eps", e): r for e, r in zip(exp.eps_list, sweep)}
    reports, failed = _verify_sweep(exp, sweep, ref)
    if ref is not None:
        reports["limiting_reference"] = ref
    return results, reports, failed


def cmd_verify(exp: ExperimentConfig):
    from .solver import SolverResult

    files = sorted(exp.output.glob("sweep_eps*.json")) if exp.output.exists() else []
    if len(files) < 2:
        raise InsufficientDataError(f"verify needs at least 2 sweep result files in {exp.output}")
    results = [SolverResult.load(f) for f in files]
    results.sort(key=lambda r: -float(r.params["model"]["eps"]))
    path = exp.output / "limiting_reference.json"
    ref = json.loads(path.read_text()) if path.exists() else None
    if ref is None and exp.nl is None:
        ref = _limiting_reference(exp)
    reports, failed = _verify_sweep(exp, results, ref)
    return {}, {f"verify_{k}": v for k, v in reports.items()}, failed


def cmd_selftest(exp: ExperimentConfig):
    from .selftest import run_selftest

    outcomes = run_selftest()
    failed = [f"selftest: {k}" for k, ok in outcomes.items() if not ok]
    return {}, {"selftest": outcomes}, failed


COMMANDS = {
    "solve-limiting": cmd_solve_limiting,
    "solve-penalized": cmd_solve_penalized,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "selftest": cmd_selftest,
}


def run_command(command: str, config_path: str | None = None, overrides=(), outdir: str | None = None) -> int:
    try:
        cfg = resolve_config(config_path, overrides)
        if outdir is not None:
            cfg["output"] = outdir
        exp = build_config(cfg)
    except (ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        results, reports, failed = COMMANDS[command](exp)
    except (ConfigurationError, InsufficientDataError, FileNotFoundError) as exc:
        print(f"{command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ProjectionError, NumericalIntegrationError, FracPenError) as exc:
        print(f"{command}: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"{command}: unreadable input: {exc}", file=sys.stderr)
        return 2
    if results or reports:
        emit_outputs(results, reports, exp.output, exp.raw)
    for f in failed:
        print(f"FAIL {f}", file=sys.stderr)
    print(f"{command}: {'ok' if not failed else f'{len(failed)} check(s) failed'} -> {exp.output}")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fracpen", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-path override, e.g. model.eps=0.05 (repeatable)")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.seterr(over="ignore")
    return run_command(args.command, args.config, args.overrides, args.out)


if __name__ == "__main__":
    sys.exit(main())
