"""Declarative boundary-value problems and collocation residual systems.

A problem reads ``L u + F(u) = f`` in the domain and ``B u + G(u) = g`` on
selected faces of an axis-aligned box.  For time-dependent problems time is
the last coordinate and the initial condition is just another face
condition (tagged ``kind="initial"``).

Linear operators are lists of ``(coefficient, key)`` pairs where
``key = (coord, order)`` names a pure derivative; ``(0, 0)`` is the identity.
Nonlinear terms are functions of the values of ``u`` and some of its
derivatives; their Jacobian contribution is assembled from the partial
derivatives with respect to each of those values::

    F'(u) phi = sum_k dF/d(D_k u) * D_k phi

Residual rows are ordered PDE rows over every collocation point first, then
one block per face condition in declaration order.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import jets
from .netcore import BasisDerivatives

Key = tuple
Coef = Union[float, Callable[[np.ndarray], np.ndarray]]
IDENTITY = ((1.0, (0, 0)),)


class AssemblyError(KeyError):
    """A derivative needed by the problem is missing from the basis."""


def _as_terms(terms) -> tuple:
    out = []
    for coef, key in terms:
        coord, order = int(key[0]), int(key[1])
        if not 0 <= order <= jets.MAX_ORDER:
            raise ValueError(f"derivative order {order} unsupported")
        out.append((coef, (coord, order) if order else (0, 0)))
    return tuple(out)


def _coef_values(coef: Coef, points: np.ndarray) -> np.ndarray:
    if callable(coef):
        return np.asarray(coef(points), dtype=float)
    return np.full(points.shape[0], float(coef))


@dataclass(frozen=True)
class NonlinearTerm:
    """A nonlinear function of ``u`` and some of its derivatives.

    ``value(vals, points)`` and ``partials(vals, points)`` receive a dict
    mapping each key in ``keys`` to the values of that derivative of ``u``;
    ``partials`` returns a dict from key to ``dF/d(D_key u)``.
    """

    keys: tuple
    value: Callable
    partials: Callable
    label: str = ""


@dataclass(frozen=True)
class BoundaryCondition:
    """``B u + G(u) = g`` on one face ``(coord, side)``, side 0 = low, 1 = high.

    With ``periodic_with`` set, the rows instead read
    ``B u(face) - B u(partner) = 0`` at matching points of the two faces.
    ``data=None`` means homogeneous data.
    """

    face: tuple
    terms: tuple = IDENTITY
    nonlinear: Optional[NonlinearTerm] = None
    data: Optional[Callable] = None
    periodic_with: Optional[tuple] = None
    kind: str = "boundary"

    def __post_init__(self):
        object.__setattr__(self, "face", (int(self.face[0]), int(self.face[1])))
        object.__setattr__(self, "terms", _as_terms(self.terms))
        if self.periodic_with is not None:
            object.__setattr__(self, "periodic_with",
                               (int(self.periodic_with[0]), int(self.periodic_with[1])))


class ExactSolution:
    """Analytic field ``func(*coords)`` differentiated with jets.

    ``func`` must be written with the elementary functions of
    :mod:`hlconcelm.jets` so that it accepts jets as well as arrays.
    """

    def __init__(self, func: Callable, label: str = ""):
        self.func = func
        self.label = label

    def value(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.asarray(self.func(*points.T), dtype=float) * np.ones(points.shape[0])

    def derivative(self, points, key) -> np.ndarray:
        coord, order = key
        if order == 0:
            return self.value(points)
        points = np.atleast_2d(points)
        args = [jets.jet_var(c, order) if i == coord else jets.jet_const(c, order)
                for i, c in enumerate(points.T)]
        out = self.func(*args)
        return np.asarray(out[order], dtype=float) * np.ones(points.shape[0])

    def __call__(self, points):
        return self.value(points)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: tuple
    linear_terms: tuple
    boundary_conditions: tuple
    source: Optional[Callable] = None
    nonlinear: Optional[NonlinearTerm] = None
    exact: Optional[ExactSolution] = None
    time_dependent: bool = False
    boundary_weight: float = 1.0

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        if not box or any(hi <= lo for lo, hi in box):
            raise ValueError(f"degenerate domain {self.domain}")
        object.__setattr__(self, "domain", box)
        object.__setattr__(self, "linear_terms", _as_terms(self.linear_terms))
        if not self.boundary_conditions:
            raise ValueError("at least one boundary condition is required")
        object.__setattr__(self, "boundary_conditions", tuple(self.boundary_conditions))
        for key in required_keys(self):
            if key[0] >= self.dim:
                raise ValueError(f"derivative key {key} exceeds dimension {self.dim}")

    @property
    def dim(self) -> int:
        return len(self.domain)

    @property
    def is_linear(self) -> bool:
        return self.nonlinear is None and all(
            bc.nonlinear is None for bc in self.boundary_conditions)

    def replace(self, **changes) -> "ProblemSpec":
        return dataclasses.replace(self, **changes)


def required_keys(prob: ProblemSpec) -> set:
    keys = {k for _, k in prob.linear_terms}
    if prob.nonlinear is not None:
        keys.update(prob.nonlinear.keys)
    for bc in prob.boundary_conditions:
        keys.update(k for _, k in bc.terms)
        if bc.nonlinear is not None:
            keys.update(bc.nonlinear.keys)
    return {k for k in keys if k[1] > 0}


# ---------------------------------------------------------------------------
# collocation

@dataclass
class CollocationSet:
    """Tensor-product grid and the indices of the points on each face."""

    points: np.ndarray
    faces: dict
    domain: tuple
    Q1: int

    @property
    def Q(self) -> int:
        return self.points.shape[0]

    def boundary_indices(self) -> np.ndarray:
        return np.unique(np.concatenate(list(self.faces.values())))


def uniform_grid(domain, n: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, n) for lo, hi in domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _check_box(domain, Q1):
    box = tuple((float(lo), float(hi)) for lo, hi in domain)
    if not box or any(hi <= lo for lo, hi in box):
        raise ValueError(f"degenerate domain {domain}")
    if Q1 < 2:
        raise ValueError("Q1 must be >= 2")
    return box


def _tensor_collocation(box, axes, Q1) -> CollocationSet:
    d = len(box)
    n = [len(a) for a in axes]
    idx = np.arange(int(np.prod(n))).reshape(n)
    faces = {}
    for c in range(d):
        faces[(c, 0)] = np.take(idx, 0, axis=c).ravel()
        faces[(c, 1)] = np.take(idx, n[c] - 1, axis=c).ravel()
    mesh = np.meshgrid(*axes, indexing="ij")
    return CollocationSet(np.column_stack([m.ravel() for m in mesh]), faces, box, Q1)


def build_collocation(domain, Q1: int) -> CollocationSet:
    """``Q1`` uniform points per direction, endpoints included.

    Face ``(c, s)`` lists the points with coordinate ``c`` at the low
    (``s=0``) or high (``s=1``) end, ordered by the remaining coordinates, so
    opposite faces line up point for point.
    """
    box = _check_box(domain, Q1)
    return _tensor_collocation(box, [np.linspace(lo, hi, Q1) for lo, hi in box], Q1)


def offset_collocation(domain, Q1: int) -> CollocationSet:
    """Held-out points: the cell centres of the ``Q1`` grid plus both ends.

    None of the interior points coincides with a training point of
    ``build_collocation(domain, Q1)``.
    """
    box = _check_box(domain, Q1)
    axes = []
    for lo, hi in box:
        g = np.linspace(lo, hi, Q1)
        axes.append(np.concatenate([[lo], 0.5 * (g[1:] + g[:-1]), [hi]]))
    return _tensor_collocation(box, axes, Q1)


# ---------------------------------------------------------------------------
# residual system

def _apply_terms(terms, basis: BasisDerivatives, points, rows=None) -> np.ndarray:
    out = None
    for coef, key in terms:
        try:
            mat = basis.get(key)
        except KeyError:
            raise AssemblyError(f"basis lacks derivative {key}") from None
        if rows is not None:
            mat = mat[rows]
        term = _coef_values(coef, points)[:, None] * mat
        out = term if out is None else out + term
    return out


def _u_values(keys, basis: BasisDerivatives, beta, rows=None) -> dict:
    vals = {}
    for key in keys:
        key = (key[0], key[1]) if key[1] else (0, 0)
        try:
            mat = basis.get(key)
        except KeyError:
            raise AssemblyError(f"basis lacks derivative {key}") from None
        vals[key] = (mat if rows is None else mat[rows]) @ beta
    return vals


def _nonlinear_jacobian(term: NonlinearTerm, basis, beta, points, rows=None):
    vals = _u_values(term.keys, basis, beta, rows)
    parts = term.partials(vals, points)
    out = 0.0
    for key, p in parts.items():
        key = (key[0], key[1]) if key[1] else (0, 0)
        mat = basis.get(key)
        out = out + np.asarray(p)[:, None] * (mat if rows is None else mat[rows])
    return out


class ResidualSystem:
    """Residual and Jacobian of one problem on one collocation set.

    The linear part of every row block is assembled once from the cached
    basis; only the nonlinear terms are refreshed for each ``beta``.
    """

    def __init__(self, prob: ProblemSpec, colloc: CollocationSet, basis: BasisDerivatives):
        if basis.psi.shape[0] != colloc.Q:
            raise ValueError("basis rows must match the collocation points")
        self.prob, self.colloc, self.basis = prob, colloc, basis
        pts = colloc.points
        self.n_cols = basis.psi.shape[1]
        # each block: (rows, points, linear matrix, rhs, nonlinear term, weight)
        self.blocks = []
        src = np.zeros(colloc.Q) if prob.source is None else _coef_values(prob.source, pts)
        self.blocks.append(
            (None, pts, _apply_terms(prob.linear_terms, basis, pts), src, prob.nonlinear, 1.0))
        w = prob.boundary_weight
        for bc in prob.boundary_conditions:
            rows = colloc.faces[bc.face]
            fpts = pts[rows]
            mat = _apply_terms(bc.terms, basis, fpts, rows)
            if bc.periodic_with is not None:
                prow = colloc.faces[bc.periodic_with]
                mat = mat - _apply_terms(bc.terms, basis, pts[prow], prow)
                rhs = np.zeros(len(rows))
            else:
                rhs = np.zeros(len(rows)) if bc.data is None else _coef_values(bc.data, fpts)
            self.blocks.append((rows, fpts, mat, rhs, bc.nonlinear, w))
        self.n_rows = sum(b[2].shape[0] for b in self.blocks)
        self._linear_jac = np.vstack([b[5] * b[2] for b in self.blocks])
        self._rhs = np.concatenate([b[5] * b[3] for b in self.blocks])

    @property
    def is_linear(self) -> bool:
        return self.prob.is_linear

    def residual(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        r = self._linear_jac @ beta - self._rhs
        if self.is_linear:
            return r
        start = 0
        for rows, pts, mat, _, term, w in self.blocks:
            n = mat.shape[0]
            if term is not None:
                vals = _u_values(term.keys, self.basis, beta, rows)
                r[start:start + n] += w * np.asarray(term.value(vals, pts))
            start += n
        return r

    def jacobian(self, beta=None) -> np.ndarray:
        if self.is_linear:
            return self._linear_jac
        beta = np.asarray(beta, dtype=float)
        J = self._linear_jac.copy()
        start = 0
        for rows, pts, mat, _, term, w in self.blocks:
            n = mat.shape[0]
            if term is not None:
                J[start:start + n] += w * _nonlinear_jacobian(term, self.basis, beta, pts, rows)
            start += n
        return J

    def linear_system(self):
        """``(A, b)`` with ``r(beta) = A beta - b``; linear problems only."""
        if not self.is_linear:
            raise ValueError(f"problem {self.prob.name!r} is nonlinear")
        return self._linear_jac, self._rhs


def assemble_residual(prob, colloc, basis, beta) -> np.ndarray:
    return ResidualSystem(prob, colloc, basis).residual(beta)


def assemble_jacobian(prob, colloc, basis, beta) -> np.ndarray:
    return ResidualSystem(prob, colloc, basis).jacobian(beta)


# ---------------------------------------------------------------------------
# manufactured data

def _exact_vals(exact, keys, points) -> dict:
    return {(k[0], k[1]) if k[1] else (0, 0): exact.derivative(points, k) for k in keys}


def _operator_on_exact(terms, nonlinear, exact, points) -> np.ndarray:
    out = np.zeros(points.shape[0])
    for coef, key in terms:
        out = out + _coef_values(coef, points) * exact.derivative(points, key)
    if nonlinear is not None:
        out = out + np.asarray(nonlinear.value(_exact_vals(exact, nonlinear.keys, points), points))
    return out


def manufactured_source(prob: ProblemSpec) -> Callable:
    """Source ``f = L u* + F(u*)`` for the problem's exact solution ``u*``."""
    if prob.exact is None:
        raise ValueError(f"problem {prob.name!r} has no exact solution")
    exact = prob.exact

    def source(points):
        return _operator_on_exact(prob.linear_terms, prob.nonlinear, exact, np.atleast_2d(points))
    return source


def manufactured_data(prob: ProblemSpec, bc: BoundaryCondition) -> Callable:
    if prob.exact is None:
        raise ValueError(f"problem {prob.name!r} has no exact solution")
    exact = prob.exact

    def data(points):
        return _operator_on_exact(bc.terms, bc.nonlinear, exact, np.atleast_2d(points))
    return data


def manufactured_problem(prob: ProblemSpec) -> ProblemSpec:
    """Fill source and boundary data from the exact solution."""
    bcs = tuple(bc if bc.periodic_with is not None
                else dataclasses.replace(bc, data=manufactured_data(prob, bc))
                for bc in prob.boundary_conditions)
    return prob.replace(source=manufactured_source(prob), boundary_conditions=bcs)


def exact_residual(prob: ProblemSpec, colloc: CollocationSet) -> np.ndarray:
    """Residual rows with ``u`` replaced by the exact solution itself.

    This bypasses the network entirely and checks the operator wiring, the
    source and the boundary data of a problem.
    """
    if prob.exact is None:
        raise ValueError(f"problem {prob.name!r} has no exact solution")
    pts = colloc.points
    src = np.zeros(colloc.Q) if prob.source is None else _coef_values(prob.source, pts)
    parts = [_operator_on_exact(prob.linear_terms, prob.nonlinear, prob.exact, pts) - src]
    for bc in prob.boundary_conditions:
        fpts = pts[colloc.faces[bc.face]]
        lhs = _operator_on_exact(bc.terms, bc.nonlinear, prob.exact, fpts)
        if bc.periodic_with is not None:
            ppts = pts[colloc.faces[bc.periodic_with]]
            lhs = lhs - _operator_on_exact(bc.terms, bc.nonlinear, prob.exact, ppts)
            rhs = 0.0
        else:
            rhs = 0.0 if bc.data is None else _coef_values(bc.data, fpts)
        parts.append(lhs - rhs)
    return np.concatenate(parts)
