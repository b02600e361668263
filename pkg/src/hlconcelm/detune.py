"""Differential-evolution search for the hidden magnitude vector.

Classic DE/rand/1/bin: for every target vector a mutant ``a + F (b - c)``
is built from three other distinct members, crossed over component-wise
with probability ``CR`` (one component always taken from the mutant),
clipped to the bounds and kept only if it scores no worse than the target.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .lstsq import NlsqOptions
from .netcore import HLCONC, assign_random_coefficients
from .pdespec import CollocationSet, ProblemSpec, offset_collocation
from .solver import NetworkField, field_errors, prepare_system, solve_system

log = logging.getLogger(__name__)

EXACT_ERROR = "exact_error"
VALIDATION_RESIDUAL = "validation_residual"


@dataclass(frozen=True)
class DeOptions:
    bounds: tuple
    population_size: Optional[int] = None
    generations: int = 20
    F: float = 0.7
    CR: float = 0.9
    objective: Optional[str] = None
    seed: int = 0
    net_seed: Optional[int] = None
    Q2: int = 101
    nlsq: NlsqOptions = field(default_factory=lambda: NlsqOptions(max_iterations=20))
    mode: str = HLCONC
    workers: int = 1

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] == 0:
            raise ValueError("bounds must be a sequence of (low, high) pairs")
        if not np.all(np.isfinite(b)) or np.any(b[:, 1] <= b[:, 0]):
            raise ValueError(f"bounds must be finite with positive width: {self.bounds}")
        object.__setattr__(self, "bounds", tuple(map(tuple, b.tolist())))
        if self.population_size is not None and self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if not 0 < self.F < 2:
            raise ValueError("F must lie in (0, 2)")
        if not 0 < self.CR <= 1:
            raise ValueError("CR must lie in (0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.objective not in (None, EXACT_ERROR, VALIDATION_RESIDUAL):
            raise ValueError(f"unknown objective {self.objective!r}")

    @property
    def pop_size(self) -> int:
        return self.population_size or max(4, 10 * len(self.bounds))


@dataclass
class DeResult:
    x: np.ndarray
    fun: float
    history: list       # (generation, best objective, best x) per generation
    evaluated: np.ndarray


def differential_evolution(func: Callable, opts: DeOptions) -> DeResult:
    """Minimise ``func`` over the box ``opts.bounds``.

    Non-finite scores and exceptions raised by ``func`` count as ``+inf``.
    """
    rng = np.random.default_rng(opts.seed)
    lo, hi = np.array(opts.bounds).T
    n, dim = opts.pop_size, len(lo)

    def score(x):
        try:
            v = float(func(x))
        except Exception as exc:  # a failed candidate is only rejected
            log.debug("candidate %s failed: %s", x, exc)
            return np.inf
        return v if np.isfinite(v) else np.inf

    def score_all(xs):
        if opts.workers > 1:
            with ThreadPoolExecutor(opts.workers) as pool:
                return np.array(list(pool.map(score, xs)))
        return np.array([score(x) for x in xs])

    pop = lo + rng.random((n, dim)) * (hi - lo)
    fit = score_all(pop)
    evaluated = [pop.copy()]
    best = int(np.argmin(fit))
    history = [(0, float(fit[best]), pop[best].copy())]
    for gen in range(1, opts.generations + 1):
        trials = np.empty_like(pop)
        for i in range(n):
            a, b, c = rng.choice([j for j in range(n) if j != i], 3, replace=False)
            mutant = pop[a] + opts.F * (pop[b] - pop[c])
            cross = rng.random(dim) < opts.CR
            cross[rng.integers(dim)] = True
            trials[i] = np.clip(np.where(cross, mutant, pop[i]), lo, hi)
        trial_fit = score_all(trials)
        evaluated.append(trials.copy())
        better = trial_fit <= fit
        pop[better], fit[better] = trials[better], trial_fit[better]
        best = int(np.argmin(fit))
        history.append((gen, float(fit[best]), pop[best].copy()))
        log.info("generation %d  best %.3e at %s", gen, fit[best], np.round(pop[best], 5))
    return DeResult(pop[best].copy(), float(fit[best]), history, np.concatenate(evaluated))


def candidate_objective(prob: ProblemSpec, arch, colloc: CollocationSet,
                        opts: DeOptions) -> Callable:
    """Map a magnitude vector to the objective of one reduced-fidelity solve."""
    objective = opts.objective or (EXACT_ERROR if prob.exact is not None
                                   else VALIDATION_RESIDUAL)
    if objective == EXACT_ERROR and prob.exact is None:
        raise ValueError("objective 'exact_error' needs an exact solution")
    net_seed = opts.seed if opts.net_seed is None else opts.net_seed
    valid = offset_collocation(prob.domain, colloc.Q1) if objective == VALIDATION_RESIDUAL else None
    # the uniform draws do not depend on R, so draw them once
    xi = assign_random_coefficients(arch, [1.0] * (len(arch) - 2), net_seed).xi

    def evaluate(R):
        net = assign_random_coefficients(arch, list(R), net_seed, xi=xi)
        net, system = prepare_system(prob, net, colloc, opts.mode)
        beta = solve_system(system, opts.nlsq)[0]
        if objective == EXACT_ERROR:
            return field_errors(prob, NetworkField(net, beta, opts.mode), None, opts.Q2)[0]
        _, vsys = prepare_system(prob, net, valid, opts.mode, normalize=False)
        r = vsys.residual(beta)
        return float(np.sqrt(np.mean(r * r)))

    return evaluate


def tune_hidden_magnitudes(prob: ProblemSpec, arch: Sequence[int], colloc: CollocationSet,
                           opts: DeOptions):
    """DE search for ``R``; returns ``(R_star, history)``.

    Each candidate is a full solve on ``colloc`` (keep it coarse) with the
    Gauss-Newton budget in ``opts.nlsq``.
    """
    if len(opts.bounds) != len(arch) - 2:
        raise ValueError(f"need {len(arch) - 2} bounds, one per hidden layer")
    res = differential_evolution(candidate_objective(prob, arch, colloc, opts), opts)
    return tuple(float(v) for v in res.x), res.history


def write_history(path, history) -> None:
    """Tuning history as CSV: generation, best_objective, R_1 .. R_n."""
    n = len(history[0][2]) if history else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "best_objective"] + [f"R_{i + 1}" for i in range(n)])
        for gen, best, x in history:
            w.writerow([gen, repr(best)] + [repr(float(v)) for v in x])
