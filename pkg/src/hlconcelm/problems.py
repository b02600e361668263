"""Benchmark problems with known solutions.

Every problem comes with its exact solution; sources and boundary data are
manufactured from it where the equation itself does not fix them.
"""

from __future__ import annotations

import numpy as np

from . import jets
from .jets import cos, sin, tanh
from .pdespec import (BoundaryCondition, ExactSolution, NonlinearTerm, ProblemSpec,
                      manufactured_problem)

PI = np.pi
BURGERS_NU = 1.0 / (100.0 * PI)

PROBLEM_IDS = ("poisson_varcoef", "advection", "helmholtz_nl",
               "burgers_small", "burgers_full", "kdv")


def _dirichlet_box(dim):
    return tuple(BoundaryCondition((c, s)) for c in range(dim) for s in (0, 1))


# -- variable-coefficient Poisson ------------------------------------------

def poisson_exact_fn(x, y):
    return -sin(PI * x * x) * sin(PI * y * y)


def poisson_coefficient(x, y):
    return 2.0 + sin(x + y)


def _coef_field(key):
    exact = ExactSolution(poisson_coefficient)
    return lambda pts: exact.derivative(pts, key)


def poisson_varcoef() -> ProblemSpec:
    """``d/dx(a u_x) + d/dy(a u_y) = f`` on ``[0, 1.6]^2``, ``a = 2 + sin(x + y)``.

    Expanded to ``a u_xx + a_x u_x + a u_yy + a_y u_y``.
    """
    a, ax, ay = _coef_field((0, 0)), _coef_field((0, 1)), _coef_field((1, 1))
    prob = ProblemSpec(
        "poisson_varcoef", ((0.0, 1.6), (0.0, 1.6)),
        linear_terms=((a, (0, 2)), (ax, (0, 1)), (a, (1, 2)), (ay, (1, 1))),
        boundary_conditions=_dirichlet_box(2),
        exact=ExactSolution(poisson_exact_fn, "-sin(pi x^2) sin(pi y^2)"))
    return manufactured_problem(prob)


# -- advection ---------------------------------------------------------------

def advection_exact_fn(x, t):
    return 20.0 * tanh(0.1 * cos(0.4 * PI * (x + 2.0 * t - 3.0)))


def advection(t_final: float = 40.0) -> ProblemSpec:
    """``u_t - 2 u_x = 0`` on ``[0, 5] x [0, t_final]``, periodic in ``x``."""
    exact = ExactSolution(advection_exact_fn, "20 tanh(0.1 cos(2pi/5 (x + 2t - 3)))")
    ic = BoundaryCondition((1, 0), kind="initial", data=exact.value)
    return ProblemSpec(
        "advection", ((0.0, 5.0), (0.0, float(t_final))),
        linear_terms=((1.0, (1, 1)), (-2.0, (0, 1))),
        boundary_conditions=(BoundaryCondition((0, 0), periodic_with=(0, 1)), ic),
        exact=exact, time_dependent=True)


# -- nonlinear Helmholtz -------------------------------------------------------

def helmholtz_exact_fn(x, y):
    return 4.0 * cos(PI * x * x) * cos(PI * y * y)


HELMHOLTZ_COSH = NonlinearTerm(
    keys=((0, 0),),
    value=lambda v, p: 10.0 * np.cosh(v[(0, 0)]),
    partials=lambda v, p: {(0, 0): 10.0 * np.sinh(v[(0, 0)])},
    label="10 cosh(u)")


def helmholtz_nl() -> ProblemSpec:
    """``u_xx + u_yy - 100 u + 10 cosh(u) = f`` on ``[0, 1.5]^2``."""
    prob = ProblemSpec(
        "helmholtz_nl", ((0.0, 1.5), (0.0, 1.5)),
        linear_terms=((1.0, (0, 2)), (1.0, (1, 2)), (-100.0, (0, 0))),
        boundary_conditions=_dirichlet_box(2),
        nonlinear=HELMHOLTZ_COSH,
        exact=ExactSolution(helmholtz_exact_fn, "4 cos(pi x^2) cos(pi y^2)"))
    return manufactured_problem(prob)


# -- Burgers -----------------------------------------------------------------

class BurgersExact:
    """Cole-Hopf solution of ``u_t + u u_x = nu u_xx``, ``u(x, 0) = -sin(pi x)``.

    With ``f(y) = exp(-cos(pi y) / (2 pi nu))`` the solution is ``u = N / D``::

        N = -int sin(pi (x - eta)) f(x - eta) exp(-eta^2 / (4 nu t)) d eta
        D =  int f(x - eta) exp(-eta^2 / (4 nu t)) d eta

    Substituting ``eta = 2 sqrt(nu t) s`` turns both into Gauss-Hermite sums.
    The exponent of ``f`` reaches ``1 / (2 pi nu) = 50``, so every sum is
    scaled by the largest exponent at its point before exponentiating.

    ``N`` and ``D`` both solve the heat equation, which gives the time
    derivative ``u_t = nu (N_xx D - N D_xx) / D^2`` without touching the
    Burgers equation itself.  Space derivatives come from jets.
    """

    def __init__(self, nu: float = BURGERS_NU, n_nodes: int = 200):
        self.nu = nu
        self.nodes, self.weights = np.polynomial.hermite.hermgauss(n_nodes)
        self.label = "Cole-Hopf (Gauss-Hermite)"

    def _exponent(self, y):
        return -cos(PI * y) / (2.0 * PI * self.nu)

    def _num_den(self, x, t, order):
        """Jets in ``x`` of the scaled numerator and denominator sums."""
        c = 2.0 * np.sqrt(self.nu * t)
        y = x[:, None] - c[:, None] * self.nodes[None, :]
        g0 = -np.cos(PI * y) / (2.0 * PI * self.nu)
        shift = g0.max(axis=1, keepdims=True)
        yj = jets.jet_var(y, order, np.ones_like(y))
        fj = jets.exp(self._exponent(yj) - shift)
        hj = -sin(PI * yj) * fj
        num = jets.Jet([(h * self.weights).sum(axis=1) for h in hj.coeffs])
        den = jets.Jet([(f * self.weights).sum(axis=1) for f in fj.coeffs])
        return num, den

    def value(self, points) -> np.ndarray:
        return self.derivative(points, (0, 0))

    def derivative(self, points, key) -> np.ndarray:
        points = np.atleast_2d(points)
        x, t = points[:, 0].astype(float), points[:, 1].astype(float)
        coord, order = key
        out = np.empty(len(x))
        at0 = t <= 0.0
        if at0.any():
            out[at0] = self._initial(x[at0], key)
        rest = ~at0
        if rest.any():
            xs, ts = x[rest], t[rest]
            if coord == 0 or order == 0:
                num, den = self._num_den(xs, ts, max(order, 1))
                out[rest] = (num / den)[order]
            elif order == 1:
                num, den = self._num_den(xs, ts, 2)
                out[rest] = self.nu * (num[2] * den[0] - num[0] * den[2]) / den[0] ** 2
            else:
                raise ValueError("only first time derivatives are available")
        return out

    def _initial(self, x, key):
        coord, order = key
        if coord == 1 and order > 0:
            if order != 1:
                raise ValueError("only first time derivatives are available")
            # heat-equation relation applied to N(x, 0) and D(x, 0)
            xj = jets.jet_var(x, 2)
            fj = jets.exp(self._exponent(xj) - 1.0 / (2.0 * PI * self.nu))
            num, den = -sin(PI * xj) * fj, fj
            return self.nu * (num[2] * den[0] - num[0] * den[2]) / den[0] ** 2
        if order == 0:
            return -np.sin(PI * x)
        return (-sin(PI * jets.jet_var(x, order)))[order]

    def __call__(self, points):
        return self.value(points)


BURGERS_ADVECTION = NonlinearTerm(
    keys=((0, 0), (0, 1)),
    value=lambda v, p: v[(0, 0)] * v[(0, 1)],
    partials=lambda v, p: {(0, 0): v[(0, 1)], (0, 1): v[(0, 0)]},
    label="u u_x")


def burgers(t_final: float = 0.2) -> ProblemSpec:
    """``u_t + u u_x = nu u_xx`` on ``[-1, 1] x [0, t_final]``."""
    ic = BoundaryCondition((1, 0), kind="initial", data=lambda p: -np.sin(PI * p[:, 0]))
    return ProblemSpec(
        "burgers", ((-1.0, 1.0), (0.0, float(t_final))),
        linear_terms=((1.0, (1, 1)), (-BURGERS_NU, (0, 2))),
        boundary_conditions=(BoundaryCondition((0, 0)), BoundaryCondition((0, 1)), ic),
        nonlinear=BURGERS_ADVECTION, exact=BurgersExact(), time_dependent=True)


# -- KdV -----------------------------------------------------------------------

def kdv_exact_fn(x, t):
    return 4.0 * sin(PI * x ** 3) * sin(PI * t ** 3)


KDV_NONLINEAR = NonlinearTerm(
    keys=((0, 0), (0, 1)),
    value=lambda v, p: -v[(0, 0)] * v[(0, 1)],
    partials=lambda v, p: {(0, 0): -v[(0, 1)], (0, 1): -v[(0, 0)]},
    label="-u u_x")


def kdv() -> ProblemSpec:
    """``u_t - u u_x + u_xxx = f`` on ``[1, 1.5] x [1, 1.5]``.

    Dirichlet data at both ends in ``x``, ``u_x`` prescribed at ``x = 1`` and
    the initial condition at ``t = 1``.
    """
    prob = ProblemSpec(
        "kdv", ((1.0, 1.5), (1.0, 1.5)),
        linear_terms=((1.0, (1, 1)), (1.0, (0, 3))),
        boundary_conditions=(
            BoundaryCondition((0, 0)),
            BoundaryCondition((0, 1)),
            BoundaryCondition((0, 0), terms=((1.0, (0, 1)),)),
            BoundaryCondition((1, 0), kind="initial")),
        nonlinear=KDV_NONLINEAR,
        exact=ExactSolution(kdv_exact_fn, "4 sin(pi x^3) sin(pi t^3)"),
        time_dependent=True)
    return manufactured_problem(prob)


def get_problem(problem_id: str, **kwargs) -> ProblemSpec:
    if problem_id == "poisson_varcoef":
        return poisson_varcoef()
    if problem_id == "advection":
        return advection(**kwargs)
    if problem_id == "helmholtz_nl":
        return helmholtz_nl()
    if problem_id == "burgers_small":
        return burgers(kwargs.get("t_final", 0.2))
    if problem_id == "burgers_full":
        return burgers(kwargs.get("t_final", 1.0))
    if problem_id == "kdv":
        return kdv()
    raise ValueError(f"unknown problem {problem_id!r}; choose from {', '.join(PROBLEM_IDS)}")


def exact_solution(problem_id: str):
    """Exact-solution object (``value`` / ``derivative``) of a benchmark."""
    return get_problem(problem_id).exact

