"""Benchmark configurations, runners and report files.

A configuration is a flat TOML file::

    problem = "poisson_varcoef"
    arch = [2, 800, 50, 1]
    R = [3.0, 0.005]
    Q1 = 30
    seed = 10
    sweep_Q1 = [5, 10, 15, 20, 25, 30]

Presets for the benchmark tables ship with the package (``list_presets``).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from .detune import DeOptions, tune_hidden_magnitudes, write_history
from .lstsq import NlsqOptions
from .netcore import CONVENTIONAL, HLCONC, assign_random_coefficients, basis_for_mode
from .pdespec import (ResidualSystem, build_collocation, exact_residual, required_keys,
                      uniform_grid)
from .problems import PROBLEM_IDS, get_problem
from .solver import (DEFAULT_Q2, DecompositionSpec, PiecewiseField, SolveReport,
                     block_time_march, interface_jumps, solve_decomposed, solve_single,
                     subdomain_nets)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ["Q1", "M", "max_error", "rms_error", "train_seconds", "mode", "seed"]
MANUFACTURED_TOL = 1e-10


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkConfig:
    problem: str
    arch: tuple
    R: tuple
    Q1: int
    Q2: int = DEFAULT_Q2
    mode: str = HLCONC
    seed: int = 0
    blocks: int = 1
    t_final: Optional[float] = None
    breakpoints: Optional[tuple] = None
    continuity: int = 1
    max_iterations: int = 50
    sweep_Q1: tuple = ()
    sweep_M: tuple = ()
    sweep_layer: int = -1
    tune_bounds: tuple = ()
    tune_generations: int = 10
    tune_population: Optional[int] = None
    tune_Q1: Optional[int] = None
    tune_seed: int = 0
    tune_objective: Optional[str] = None
    name: str = ""

    def __post_init__(self):
        if self.problem not in PROBLEM_IDS:
            raise ConfigError(f"unknown problem {self.problem!r}; "
                              f"choose from {', '.join(PROBLEM_IDS)}")
        for key in ("arch", "R", "sweep_Q1", "sweep_M"):
            object.__setattr__(self, key, tuple(getattr(self, key)))
        if self.breakpoints is not None:
            object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "tune_bounds", tuple(tuple(b) for b in self.tune_bounds))
        if len(self.arch) < 3 or self.arch[0] != 2 or self.arch[-1] != 1:
            raise ConfigError(f"arch must be [2, hidden..., 1], got {list(self.arch)}")
        if len(self.R) != len(self.arch) - 2:
            raise ConfigError(f"R needs one entry per hidden layer ({len(self.arch) - 2}), "
                              f"got {len(self.R)}")
        if self.mode not in (HLCONC, CONVENTIONAL):
            raise ConfigError(f"mode must be {HLCONC!r} or {CONVENTIONAL!r}")
        if self.Q1 < 2 or self.Q2 < 2:
            raise ConfigError("Q1 and Q2 must be >= 2")
        if self.blocks < 1:
            raise ConfigError("blocks must be >= 1")
        if self.problem == "burgers_full" and (self.breakpoints is None or self.blocks < 2):
            raise ConfigError("burgers_full needs a decomposition (breakpoints) and blocks > 1")
        if self.sweep_Q1 and self.sweep_M:
            raise ConfigError("sweep over Q1 or over M, not both")
        if not -(len(self.arch) - 2) <= self.sweep_layer < len(self.arch) - 2:
            raise ConfigError("sweep_layer must index a hidden layer")

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "BenchmarkConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def load_config(path) -> BenchmarkConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    data.setdefault("name", os.path.splitext(os.path.basename(str(path)))[0])
    return BenchmarkConfig.from_dict(data)


def list_presets() -> list:
    files = resources.files("hlconcelm") / "presets"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".toml"))


def load_preset(name: str) -> BenchmarkConfig:
    path = resources.files("hlconcelm") / "presets" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    with resources.as_file(path) as p:
        return load_config(p)


# ---------------------------------------------------------------------------
# running

def build_problem(cfg: BenchmarkConfig):
    kwargs = {} if cfg.t_final is None else {"t_final": cfg.t_final}
    if cfg.problem in ("poisson_varcoef", "helmholtz_nl", "kdv") and kwargs:
        raise ConfigError(f"t_final does not apply to {cfg.problem}")
    return get_problem(cfg.problem, **kwargs)


def check_manufactured(prob, Q1: int = 12) -> float:
    """Largest residual of the exact solution on a ``Q1`` grid; raises if too big."""
    err = float(np.abs(exact_residual(prob, build_collocation(prob.domain, Q1))).max())
    if err > MANUFACTURED_TOL:
        raise RuntimeError(f"{prob.name}: exact solution leaves residual {err:.3e}")
    return err


def solve_config(cfg: BenchmarkConfig) -> SolveReport:
    """Dispatch one configuration to the single, block or decomposed driver."""
    prob = build_problem(cfg)
    check_manufactured(prob)
    nlsq = NlsqOptions(max_iterations=cfg.max_iterations)
    decomp = None
    nets = None
    if cfg.breakpoints is not None:
        decomp = DecompositionSpec(cfg.breakpoints, cfg.continuity)
        nets = subdomain_nets(cfg.arch, cfg.R, cfg.seed, decomp.n_sub)
    net = assign_random_coefficients(cfg.arch, cfg.R, cfg.seed)
    if prob.time_dependent:
        return block_time_march(prob, cfg.blocks, net, cfg.Q1, cfg.mode, nlsq, cfg.Q2,
                                decomp, nets)
    if cfg.blocks != 1:
        raise ConfigError(f"{cfg.problem} is not time dependent; blocks must be 1")
    if decomp is not None:
        return solve_decomposed(prob, decomp, nets, cfg.Q1, cfg.mode, nlsq, cfg.Q2)
    return solve_single(prob, net, build_collocation(prob.domain, cfg.Q1), cfg.mode, nlsq,
                        cfg.Q2)


def _sweep_value(cfg: BenchmarkConfig):
    return cfg.arch[1:-1][cfg.sweep_layer]


def sweep_configs(cfg: BenchmarkConfig) -> list:
    if cfg.sweep_Q1:
        return [cfg.replace(Q1=int(q)) for q in cfg.sweep_Q1]
    if cfg.sweep_M:
        layer = cfg.sweep_layer % (len(cfg.arch) - 2) + 1
        return [cfg.replace(arch=cfg.arch[:layer] + (int(m),) + cfg.arch[layer + 1:])
                for m in cfg.sweep_M]
    return [cfg]


def sweep_row(cfg: BenchmarkConfig, rep: SolveReport) -> dict:
    return {"Q1": cfg.Q1, "M": _sweep_value(cfg), "max_error": rep.max_error,
            "rms_error": rep.rms_error, "train_seconds": rep.wall_time,
            "mode": cfg.mode, "seed": cfg.seed}


# ---------------------------------------------------------------------------
# output files

def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_sweep_dat(path, rows, key: str = "Q1") -> None:
    with open(path, "w") as fh:
        fh.write(f"# {key} max_error rms_error train_seconds\n")
        for row in rows:
            fh.write(f"{row[key]} {row['max_error']:.8e} {row['rms_error']:.8e} "
                     f"{row['train_seconds']:.6e}\n")


def write_field_dat(path, prob, solution, Q2: int) -> None:
    """Grid data for gnuplot ``splot``: x t|y u_num u_exact |error|.

    Scan lines are separated by blank lines.
    """
    pts = uniform_grid(prob.domain, Q2)
    u = solution(pts)
    ue = prob.exact.value(pts) if prob.exact is not None else np.full_like(u, np.nan)
    data = np.column_stack([pts, u, ue, np.abs(u - ue)])
    with open(path, "w") as fh:
        fh.write("# x y u_num u_exact abs_error\n")
        for i in range(Q2):
            np.savetxt(fh, data[i * Q2:(i + 1) * Q2], fmt="%.10e")
            fh.write("\n")


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=float)
        fh.write("\n")


def run_benchmark(cfg: BenchmarkConfig, out_dir, field_data: bool = True) -> dict:
    """Solve one configuration; writes ``report.json``, ``sweep.csv`` and plot data.

    A failed solve still leaves a report with ``status = "failed"`` and
    re-raises.
    """
    os.makedirs(out_dir, exist_ok=True)
    report = {"config": cfg.to_dict(), "status": "running"}
    try:
        rep = solve_config(cfg)
    except Exception as exc:
        report.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        write_json(os.path.join(out_dir, "report.json"), report)
        raise
    report.update(status="ok", result=rep.to_dict())
    prob = build_problem(cfg)
    if cfg.breakpoints is not None and cfg.blocks == 1 \
            and isinstance(rep.solution, PiecewiseField):
        report["result"]["interface_jumps"] = list(interface_jumps(rep.solution, prob.domain))
    write_sweep_csv(os.path.join(out_dir, "sweep.csv"), [sweep_row(cfg, rep)])
    if field_data:
        write_field_dat(os.path.join(out_dir, "solution.dat"), prob, rep.solution, cfg.Q2)
    write_json(os.path.join(out_dir, "report.json"), report)
    return report


def run_sweep(cfg: BenchmarkConfig, out_dir, workers: int = 1) -> dict:
    """Solve every sweep point; rows keep the sweep order whatever ``workers`` is."""
    os.makedirs(out_dir, exist_ok=True)
    configs = sweep_configs(cfg)
    key = "M" if cfg.sweep_M else "Q1"
    rows, error = [], None

    def one(c):
        return sweep_row(c, solve_config(c))

    try:
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                for row in pool.map(one, configs):
                    rows.append(row)
        else:
            for c in configs:
                rows.append(one(c))
                log.info("%s=%s  max error %.3e", key, rows[-1][key], rows[-1]["max_error"])
    except Exception as exc:
        error = f"{type(exc).__name__}: {exc}"
    write_sweep_csv(os.path.join(out_dir, "sweep.csv"), rows)
    write_sweep_dat(os.path.join(out_dir, "sweep.dat"), rows, key)
    report = {"config": cfg.to_dict(), "status": "failed" if error else "ok", "rows": rows}
    if error:
        report["error"] = error
    write_json(os.path.join(out_dir, "report.json"), report)
    if error:
        raise RuntimeError(error)
    return report


def run_tune(cfg: BenchmarkConfig, out_dir) -> dict:
    """Differential-evolution search for ``R`` at the reduced fidelity ``tune_Q1``."""
    if not cfg.tune_bounds:
        raise ConfigError("tuning needs tune_bounds, one [low, high] pair per hidden layer")
    os.makedirs(out_dir, exist_ok=True)
    prob = build_problem(cfg)
    if prob.time_dependent and (cfg.blocks > 1 or cfg.breakpoints is not None):
        log.warning("tuning uses a single domain solve over the whole domain")
    opts = DeOptions(bounds=cfg.tune_bounds, population_size=cfg.tune_population,
                     generations=cfg.tune_generations, objective=cfg.tune_objective,
                     seed=cfg.tune_seed, net_seed=cfg.seed, Q2=cfg.Q2, mode=cfg.mode,
                     nlsq=NlsqOptions(max_iterations=min(cfg.max_iterations, 20)))
    colloc = build_collocation(prob.domain, cfg.tune_Q1 or cfg.Q1)
    R_star, history = tune_hidden_magnitudes(prob, cfg.arch, colloc, opts)
    write_history(os.path.join(out_dir, "tuning_history.csv"), history)
    with open(os.path.join(out_dir, "tuning_history.dat"), "w") as fh:
        fh.write("# generation best_objective\n")
        for gen, best, _ in history:
            fh.write(f"{gen} {best:.8e}\n")
    report = {"config": cfg.to_dict(), "status": "ok", "R_star": list(R_star),
              "best_objective": history[-1][1]}
    write_json(os.path.join(out_dir, "report.json"), report)
    return report


# ---------------------------------------------------------------------------
# verification

def jacobian_check(prob, arch=None, Q1: int = 6, n_beta: int = 5, seed: int = 0,
                   h: float = 1e-6, mode: str = HLCONC) -> float:
    """Worst relative difference between the assembled and a central-FD Jacobian."""
    arch = arch or [prob.dim, 10, 8, 1]
    net = assign_random_coefficients(arch, [1.0] * (len(arch) - 2), seed)
    net = net.with_input_box(prob.domain)
    colloc = build_collocation(prob.domain, Q1)
    basis = basis_for_mode(net, colloc.points, sorted(required_keys(prob)), mode)
    system = ResidualSystem(prob, colloc, basis)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_beta):
        beta = rng.uniform(-1.0, 1.0, system.n_cols)
        J = system.jacobian(beta)
        fd = np.empty_like(J)
        for j in range(system.n_cols):
            e = np.zeros(system.n_cols)
            e[j] = h
            fd[:, j] = (system.residual(beta + e) - system.residual(beta - e)) / (2 * h)
        worst = max(worst, float(np.linalg.norm(fd - J) / np.linalg.norm(J)))
    return worst


def verify(problem_ids=PROBLEM_IDS) -> list:
    """Manufactured-residual and Jacobian checks; one result dict per problem."""
    results = []
    for pid in problem_ids:
        prob = get_problem(pid)
        res = float(np.abs(exact_residual(prob, build_collocation(prob.domain, 12))).max())
        jac = jacobian_check(prob)
        results.append({"problem": pid, "manufactured_residual": res, "jacobian_rel_err": jac,
                        "ok": res <= MANUFACTURED_TOL and jac <= 1e-6})
    return results
