"""Solve drivers: single domain, block time marching and domain decomposition.

Every driver maps the (sub)domain it works on affinely onto ``[-1, 1]^d``
before the first hidden layer (``normalize=True``), so one hidden magnitude
vector serves every block and subdomain.

Errors are measured on a uniform ``Q2 x Q2`` grid per block or subdomain
and aggregated as the max of the maxima and the rms over the union of all
evaluation points.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import lstsq
from .lstsq import NlsqOptions
from .netcore import HLCONC, NetworkCoefficients, assign_random_coefficients, basis_for_mode
from .pdespec import (BoundaryCondition, CollocationSet, ProblemSpec, ResidualSystem,
                      build_collocation, required_keys, uniform_grid)

log = logging.getLogger(__name__)

DEFAULT_Q2 = 101


class SolveError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# trained fields

class NetworkField:
    """Trained network viewed as a function of the physical coordinates."""

    def __init__(self, net: NetworkCoefficients, beta, mode: str = HLCONC):
        self.net, self.beta, self.mode = net, np.asarray(beta, dtype=float), mode

    def derivative(self, points, key) -> np.ndarray:
        keys = [key] if key[1] > 0 else []
        basis = basis_for_mode(self.net, np.atleast_2d(points), keys, self.mode)
        return basis.get(key) @ self.beta

    def __call__(self, points) -> np.ndarray:
        return self.derivative(points, (0, 0))


class PiecewiseField:
    """Fields glued along one coordinate at the given breakpoints.

    A point on a breakpoint belongs to the piece on its left.
    """

    def __init__(self, fields: Sequence, breaks: Sequence[float], coord: int):
        self.fields, self.breaks, self.coord = list(fields), np.asarray(breaks, float), coord

    def _piece(self, points):
        inner = self.breaks[1:-1]
        return np.searchsorted(inner, points[:, self.coord], side="left")

    def derivative(self, points, key) -> np.ndarray:
        points = np.atleast_2d(points)
        which = self._piece(points)
        out = np.empty(points.shape[0])
        for k, f in enumerate(self.fields):
            sel = which == k
            if sel.any():
                out[sel] = f.derivative(points[sel], key)
        return out

    def __call__(self, points) -> np.ndarray:
        return self.derivative(points, (0, 0))


@dataclass
class SolveReport:
    beta: np.ndarray
    residual_norm: float
    max_error: float
    rms_error: float
    iterations: int
    wall_time: float
    mode: str
    termination: str = ""
    details: dict = field(default_factory=dict)
    solution: object = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "max_error": self.max_error,
            "rms_error": self.rms_error,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "mode": self.mode,
            "termination": self.termination,
            "n_output_coeffs": int(self.beta.size),
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# errors

def _grid_errors(exact, fld, box, Q2):
    pts = uniform_grid(box, Q2)
    return np.abs(fld(pts) - exact.value(pts))


def _aggregate(err_arrays):
    if not err_arrays:
        return float("nan"), float("nan")
    allerr = np.concatenate(err_arrays)
    return float(allerr.max()), float(np.sqrt(np.mean(allerr ** 2)))


def field_errors(prob: ProblemSpec, fld, boxes=None, Q2: int = DEFAULT_Q2):
    """Max and rms error of ``fld`` against the exact solution over ``boxes``."""
    if prob.exact is None:
        raise ValueError(f"problem {prob.name!r} has no exact solution")
    boxes = [prob.domain] if boxes is None else boxes
    return _aggregate([_grid_errors(prob.exact, fld, b, Q2) for b in boxes])


def evaluate_errors(prob: ProblemSpec, net: NetworkCoefficients, beta, Q2: int = DEFAULT_Q2,
                    mode: str = HLCONC):
    return field_errors(prob, NetworkField(net, beta, mode), None, Q2)


# ---------------------------------------------------------------------------
# single domain

def prepare_system(prob: ProblemSpec, net: NetworkCoefficients, colloc: CollocationSet,
                   mode: str = HLCONC, normalize: bool = True, extra_keys=()):
    """Evaluate the basis once and wrap it in a residual system."""
    if net.dim != prob.dim:
        raise ValueError(f"network input dimension {net.dim} != problem dimension {prob.dim}")
    if normalize:
        net = net.with_input_box(prob.domain)
    keys = required_keys(prob) | set(extra_keys)
    basis = basis_for_mode(net, colloc.points, sorted(keys), mode)
    if not all(np.all(np.isfinite(m)) for m in [basis.psi, *basis.derivs.values()]):
        raise SolveError("hidden-layer fields are not finite; reduce the hidden magnitudes")
    return net, ResidualSystem(prob, colloc, basis)


def solve_system(system, nlsq: NlsqOptions, beta0=None):
    """Least-squares solve of a residual system -> (beta, residual norm, iterations, reason)."""
    if system.is_linear:
        A = system.jacobian()
        b = -system.residual(np.zeros(A.shape[1]))
        beta = lstsq.linear_least_squares(A, b, rcond=nlsq.rcond)
        return beta, float(np.linalg.norm(A @ beta - b)), 1, "linear"
    if beta0 is None:
        beta0 = np.zeros(system.n_cols)
    beta, rep = lstsq.gauss_newton_trust_region(system.residual, system.jacobian, beta0, nlsq)
    return beta, rep.residual_norm, rep.iterations, rep.reason


def solve_single(prob: ProblemSpec, net: NetworkCoefficients, colloc: CollocationSet,
                 mode: str = HLCONC, nlsq: NlsqOptions = NlsqOptions(), Q2: int = DEFAULT_Q2,
                 normalize: bool = True, beta0=None) -> SolveReport:
    """Train one network on one collocation set.

    Linear problems go through one minimum-norm least-squares solve;
    nonlinear ones through trust-region Gauss-Newton starting from ``beta0``
    (zero by default).
    """
    t0 = time.perf_counter()
    net, system = prepare_system(prob, net, colloc, mode, normalize)
    beta, res, its, reason = solve_system(system, nlsq, beta0)
    wall = time.perf_counter() - t0
    fld = NetworkField(net, beta, mode)
    emax, erms = (field_errors(prob, fld, None, Q2) if prob.exact is not None
                  else (float("nan"), float("nan")))
    return SolveReport(beta, res, emax, erms, its, wall, mode, reason,
                       {"rows": system.n_rows, "cols": system.n_cols}, fld)


# ---------------------------------------------------------------------------
# domain decomposition

@dataclass(frozen=True)
class DecompositionSpec:
    """Subdomain breakpoints along ``coord`` and the interface continuity order."""

    breakpoints: tuple
    continuity: int = 1
    coord: int = 0

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        if len(bp) < 2 or any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError(f"breakpoints must be strictly increasing: {self.breakpoints}")
        if self.continuity not in (0, 1):
            raise ValueError("continuity order must be 0 or 1")
        object.__setattr__(self, "breakpoints", bp)

    @property
    def n_sub(self) -> int:
        return len(self.breakpoints) - 1

    def boxes(self, domain) -> list:
        out = []
        for lo, hi in zip(self.breakpoints, self.breakpoints[1:]):
            box = list(domain)
            box[self.coord] = (lo, hi)
            out.append(tuple(box))
        return out


def _subproblem(prob: ProblemSpec, decomp: DecompositionSpec, i: int) -> ProblemSpec:
    c, last = decomp.coord, decomp.n_sub - 1
    bcs = []
    for bc in prob.boundary_conditions:
        if bc.periodic_with is not None and (bc.face[0] == c or bc.periodic_with[0] == c):
            raise ValueError("periodic conditions across the decomposed coordinate "
                             "are not supported")
        if bc.face[0] == c and not ((bc.face[1] == 0 and i == 0) or
                                    (bc.face[1] == 1 and i == last)):
            continue
        bcs.append(bc)
    return prob.replace(domain=decomp.boxes(prob.domain)[i], boundary_conditions=tuple(bcs))


class JointSystem:
    """Subdomain systems stacked with interface continuity rows.

    For each pair of neighbours the rows read ``D u_left - D u_right = 0`` at
    the shared face points, for ``D`` in the identity and, with ``C^1``
    coupling, the first derivative across the interface.
    """

    def __init__(self, parts: Sequence[ResidualSystem], decomp: DecompositionSpec):
        self.parts = list(parts)
        self.widths = [p.n_cols for p in self.parts]
        self.offsets = np.concatenate([[0], np.cumsum(self.widths)])
        self.n_cols = int(self.offsets[-1])
        c = decomp.coord
        keys = [(0, 0)] + ([(c, 1)] if decomp.continuity == 1 else [])
        self.couplings = []
        for i in range(len(self.parts) - 1):
            left, right = self.parts[i], self.parts[i + 1]
            rl, rr = left.colloc.faces[(c, 1)], right.colloc.faces[(c, 0)]
            if not np.allclose(left.colloc.points[rl], right.colloc.points[rr]):
                raise ValueError(f"interface points of subdomains {i} and {i + 1} do not match")
            for key in keys:
                self.couplings.append(
                    (i, left.basis.get(key)[rl], i + 1, right.basis.get(key)[rr]))
        self.n_rows = (sum(p.n_rows for p in self.parts)
                       + sum(m.shape[0] for _, m, _, _ in self.couplings))

    @property
    def is_linear(self) -> bool:
        return all(p.is_linear for p in self.parts)

    def split(self, beta):
        return [beta[self.offsets[k]:self.offsets[k + 1]] for k in range(len(self.parts))]

    def residual(self, beta) -> np.ndarray:
        betas = self.split(np.asarray(beta, dtype=float))
        out = [p.residual(b) for p, b in zip(self.parts, betas)]
        out += [ml @ betas[i] - mr @ betas[j] for i, ml, j, mr in self.couplings]
        return np.concatenate(out)

    def jacobian(self, beta=None) -> np.ndarray:
        betas = self.split(np.zeros(self.n_cols) if beta is None else np.asarray(beta, float))
        J = np.zeros((self.n_rows, self.n_cols))
        row = 0
        for k, (p, b) in enumerate(zip(self.parts, betas)):
            J[row:row + p.n_rows, self.offsets[k]:self.offsets[k + 1]] = p.jacobian(b)
            row += p.n_rows
        for i, ml, j, mr in self.couplings:
            n = ml.shape[0]
            J[row:row + n, self.offsets[i]:self.offsets[i + 1]] = ml
            J[row:row + n, self.offsets[j]:self.offsets[j + 1]] = -mr
            row += n
        return J


def subdomain_nets(arch, R, seed: int, n_sub: int) -> list:
    """One randomly initialised network per subdomain (seeds ``seed + i``)."""
    return [assign_random_coefficients(arch, R, seed + i) for i in range(n_sub)]


def solve_decomposed(prob: ProblemSpec, decomp: DecompositionSpec, nets: Sequence,
                     Q1: int, mode: str = HLCONC, nlsq: NlsqOptions = NlsqOptions(),
                     Q2: int = DEFAULT_Q2, normalize: bool = True, beta0=None) -> SolveReport:
    """Joint least-squares solve over all subdomains with ``C^k`` coupling.

    ``beta0`` (stacked subdomain coefficients) seeds Gauss-Newton for
    nonlinear problems.
    """
    if len(nets) != decomp.n_sub:
        raise ValueError(f"need {decomp.n_sub} networks, got {len(nets)}")
    t0 = time.perf_counter()
    extra = [(decomp.coord, 1)] if decomp.continuity == 1 else []
    parts, used_nets = [], []
    for i, net in enumerate(nets):
        sub = _subproblem(prob, decomp, i)
        try:
            n, system = prepare_system(sub, net, build_collocation(sub.domain, Q1), mode,
                                       normalize, extra)
        except SolveError as exc:
            raise SolveError(f"subdomain {i}: {exc}") from exc
        parts.append(system)
        used_nets.append(n)
    joint = JointSystem(parts, decomp)
    beta, res, its, reason = solve_system(parts[0] if len(parts) == 1 else joint, nlsq, beta0)
    wall = time.perf_counter() - t0
    fields = [NetworkField(n, b, mode) for n, b in zip(used_nets, joint.split(beta))]
    fld = fields[0] if len(fields) == 1 else PiecewiseField(fields, decomp.breakpoints,
                                                          decomp.coord)
    emax, erms = (field_errors(prob, fld, decomp.boxes(prob.domain), Q2)
                  if prob.exact is not None else (float("nan"), float("nan")))
    return SolveReport(beta, res, emax, erms, its, wall, mode, reason,
                       {"rows": joint.n_rows, "cols": joint.n_cols,
                        "subdomains": decomp.n_sub}, fld)


def interface_jumps(fld: PiecewiseField, domain, n_points: int = DEFAULT_Q2):
    """Largest jump of ``u`` and of its derivative across the piece interfaces."""
    c = fld.coord
    other = [k for k in range(len(domain)) if k != c]
    jump_u = jump_du = 0.0
    for k, xb in enumerate(fld.breaks[1:-1]):
        box = [domain[j] for j in other]
        pts_other = uniform_grid(box, n_points)
        pts = np.empty((pts_other.shape[0], len(domain)))
        pts[:, other] = pts_other
        pts[:, c] = xb
        left, right = fld.fields[k], fld.fields[k + 1]
        jump_u = max(jump_u, float(np.abs(left(pts) - right(pts)).max()))
        jump_du = max(jump_du, float(np.abs(left.derivative(pts, (c, 1))
                                            - right.derivative(pts, (c, 1))).max()))
    return jump_u, jump_du


# ---------------------------------------------------------------------------
# block time marching

def _with_initial_data(prob: ProblemSpec, data) -> ProblemSpec:
    bcs = tuple(dataclasses.replace(bc, data=data) if bc.kind == "initial" else bc
                for bc in prob.boundary_conditions)
    return prob.replace(boundary_conditions=bcs)


def block_time_march(prob: ProblemSpec, blocks: int, net: Optional[NetworkCoefficients],
                     Q1: int, mode: str = HLCONC, nlsq: NlsqOptions = NlsqOptions(),
                     Q2: int = DEFAULT_Q2, decomposition: Optional[DecompositionSpec] = None,
                     nets: Optional[Sequence] = None, normalize: bool = True,
                     warm_start: bool = False) -> SolveReport:
    """Solve successive time blocks, each seeded by its predecessor.

    The initial condition of block ``k + 1`` is the trained solution of
    block ``k`` at the shared time.  Every block reuses the same random
    hidden layers (``net``, or ``nets`` per subdomain with a decomposition).
    With ``warm_start`` a nonlinear block starts Gauss-Newton from the
    previous block's output coefficients instead of zero.
    """
    if not prob.time_dependent:
        raise ValueError(f"problem {prob.name!r} is not time dependent")
    if blocks < 1:
        raise ValueError("need at least one time block")
    tc = prob.dim - 1
    t_start, t_end = prob.domain[tc]
    edges = np.linspace(t_start, t_end, blocks + 1)
    t0 = time.perf_counter()
    fields, reports = [], []
    current = prob
    for k in range(blocks):
        box = list(prob.domain)
        box[tc] = (edges[k], edges[k + 1])
        sub = current.replace(domain=tuple(box))
        beta0 = reports[-1].beta if warm_start and reports else None
        try:
            if decomposition is not None:
                rep = solve_decomposed(sub, decomposition, nets, Q1, mode, nlsq, Q2, normalize,
                                       beta0)
            else:
                rep = solve_single(sub, net, build_collocation(sub.domain, Q1), mode, nlsq, Q2,
                                   normalize, beta0)
        except (SolveError, lstsq.SolverError) as exc:
            raise SolveError(f"time block {k}: {exc}") from exc
        log.info("block %d/%d  t=[%.4g, %.4g]  max err %.3e  residual %.3e",
                 k + 1, blocks, edges[k], edges[k + 1], rep.max_error, rep.residual_norm)
        reports.append(rep)
        fields.append(rep.solution)
        current = _with_initial_data(prob, rep.solution)
    if blocks == 1:
        return reports[0]
    wall = time.perf_counter() - t0
    fld = PiecewiseField(fields, edges, tc)
    if prob.exact is not None:
        emax = max(r.max_error for r in reports)
        erms = float(np.sqrt(np.mean([r.rms_error ** 2 for r in reports])))
    else:
        emax = erms = float("nan")
    return SolveReport(
        np.concatenate([r.beta for r in reports]),
        max(r.residual_norm for r in reports), emax, erms,
        sum(r.iterations for r in reports), wall, mode,
        ",".join(sorted({r.termination for r in reports})),
        {"blocks": blocks,
         "block_max_error": [r.max_error for r in reports],
         "block_residual_norm": [r.residual_norm for r in reports]},
        fld)
