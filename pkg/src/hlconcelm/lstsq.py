"""Dense least-squares kernels.

``linear_least_squares`` returns the minimum-norm solution through LAPACK's
SVD-based driver.  Singular values below ``rcond * sigma_max`` are dropped,
with ``rcond = eps`` by default; random-feature matrices are numerically
rank deficient, and the accuracy of the whole method depends on this
cutoff.  The looser ``max(m, n) * eps`` costs more than an order of
magnitude of accuracy on the benchmarks.

``gauss_newton_trust_region`` solves ``min 0.5 * ||r(beta)||^2`` by
Gauss-Newton steps restricted to a trust region.  The constrained subproblem
is solved exactly in the SVD basis of the Jacobian, searching the
Levenberg parameter ``lam`` so that the damped step lands on the region
boundary whenever the plain Gauss-Newton step is too long.  The region
starts at radius ``max(||beta0||, 1)`` and at most doubles per iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when the nonlinear iteration meets non-finite data."""

    def __init__(self, message, beta=None, iterations=0):
        super().__init__(message)
        self.beta = beta
        self.iterations = iterations


def default_rcond(shape=None) -> float:
    return float(np.finfo(float).eps)


def _check_finite(a, name):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


def linear_least_squares(A, b, rcond: Optional[float] = None) -> np.ndarray:
    """Minimum-norm minimizer of ``||A x - b||_2``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    _check_finite(A, "A")
    _check_finite(b, "b")
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]}")
    if rcond is None:
        rcond = default_rcond(A.shape)
    x, *_ = scipy.linalg.lstsq(A, b, cond=rcond, lapack_driver="gelsd",
                               check_finite=False)
    return x


@dataclass(frozen=True)
class NlsqOptions:
    max_iterations: int = 50
    residual_tolerance: float = 1e-12
    step_tolerance: float = 1e-12
    cost_tolerance: float = 1e-14
    initial_trust_radius: Optional[float] = None
    accept_threshold: float = 1e-4
    shrink_threshold: float = 0.25
    expand_threshold: float = 0.75
    rcond: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("residual_tolerance", "step_tolerance", "cost_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.accept_threshold < self.shrink_threshold < self.expand_threshold < 1:
            raise ValueError("need 0 <= accept < shrink < expand < 1")


@dataclass
class NlsqReport:
    iterations: int
    cost: float
    residual_norm: float
    reason: str
    accepted_costs: list
    n_evaluations: int


def _tr_step(s, V, c, radius, rcond):
    """Minimize ``||J d + r||`` over ``||d|| <= radius`` given ``J = U S V^T``.

    ``c = U^T r``.  Returns the step and its predicted cost reduction.
    """
    keep = s > rcond * (s[0] if s.size else 0.0)
    s, c, V = s[keep], c[keep], V[:, keep]
    if s.size == 0:
        return np.zeros(V.shape[0]), 0.0
    gn = c / s
    lam = 0.0
    if np.linalg.norm(gn) > radius:
        # Newton iteration on 1/||d(lam)|| - 1/radius (More's secular equation)
        lam_lo, lam_hi = 0.0, np.linalg.norm(s * c) / radius
        lam = 0.0
        for _ in range(60):
            if not lam_lo <= lam <= lam_hi or lam == 0.0:
                lam = max(np.sqrt(lam_lo * lam_hi), 1e-3 * lam_hi)
            denom = s * s + lam
            d = s * c / denom
            nd = np.linalg.norm(d)
            phi = nd - radius
            if abs(phi) < 1e-3 * radius:
                break
            if phi > 0:
                lam_lo = lam
            else:
                lam_hi = lam
            dphi = -np.sum(d * d / denom) / nd
            lam = lam - (phi / dphi) * (nd / radius)
        coef = s * c / (s * s + lam)
    else:
        coef = gn
    step = -(V @ coef)
    # predicted reduction of 0.5 ||J d + r||^2 in the retained subspace
    pred = 0.5 * np.sum(c * c) - 0.5 * np.sum((c - s * coef) ** 2)
    return step, pred


def gauss_newton_trust_region(residual_fn: Callable, jacobian_fn: Callable, beta0,
                              opts: NlsqOptions = NlsqOptions()):
    """Trust-region Gauss-Newton iteration.

    Returns ``(beta, report)``; the cost ``0.5 ||r||^2`` never increases
    between accepted iterates.
    """
    beta = np.array(beta0, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta0 must be finite")
    r = np.asarray(residual_fn(beta), dtype=float)
    n_eval = 1
    if not np.all(np.isfinite(r)):
        raise SolverError("non-finite residual at the initial iterate", beta, 0)
    cost = 0.5 * float(r @ r)
    accepted = [cost]
    # a small starting region keeps beta from running off along directions
    # that only the smallest retained singular values resolve
    radius = opts.initial_trust_radius
    if radius is None:
        radius = max(float(np.linalg.norm(beta)), 1.0)
    reason = "max_iterations"
    it = 0
    J = None
    while it < opts.max_iterations:
        if np.sqrt(2 * cost) <= opts.residual_tolerance:
            reason = "residual_tolerance"
            break
        if J is None:
            J = np.asarray(jacobian_fn(beta), dtype=float)
            if not np.all(np.isfinite(J)):
                raise SolverError("non-finite Jacobian", beta, it)
            U, s, Vt = scipy.linalg.svd(J, full_matrices=False, check_finite=False,
                                        lapack_driver="gesdd")
            c = U.T @ r
            rcond = opts.rcond if opts.rcond is not None else default_rcond(J.shape)
        it += 1
        step, pred = _tr_step(s, Vt.T, c, radius, rcond)
        step_norm = np.linalg.norm(step)
        if step_norm <= opts.step_tolerance * (opts.step_tolerance + np.linalg.norm(beta)):
            reason = "step_tolerance"
            break
        trial = beta + step
        r_new = np.asarray(residual_fn(trial), dtype=float)
        n_eval += 1
        if not np.all(np.isfinite(r_new)):
            radius = 0.25 * step_norm
            continue
        cost_new = 0.5 * float(r_new @ r_new)
        actual = cost - cost_new
        rho = actual / pred if pred > 0 else -np.inf
        if rho < opts.shrink_threshold:
            radius = 0.25 * step_norm
        elif rho > opts.expand_threshold and step_norm >= 0.99 * radius:
            radius = 2.0 * radius
        log.debug("iter %d cost %.3e trial %.3e rho %.3f radius %.3e",
                  it, cost, cost_new, rho, radius)
        if rho > opts.accept_threshold and cost_new <= cost:
            converged = actual <= opts.cost_tolerance * cost
            beta, r, cost = trial, r_new, cost_new
            accepted.append(cost)
            J = None
            if converged:
                reason = "cost_tolerance"
                break
    return beta, NlsqReport(it, cost, float(np.sqrt(2 * cost)), reason, accepted, n_eval)
