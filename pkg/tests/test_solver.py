import numpy as np
import pytest

from hlconcelm import jets, problems
from hlconcelm.lstsq import NlsqOptions
from hlconcelm.netcore import CONVENTIONAL, assign_random_coefficients
from hlconcelm.pdespec import (BoundaryCondition, ExactSolution, ProblemSpec, build_collocation,
                               manufactured_problem)
from hlconcelm.solver import (DecompositionSpec, JointSystem, NetworkField, PiecewiseField,
                              SolveError, block_time_march, evaluate_errors, field_errors,
                              interface_jumps, prepare_system, solve_decomposed, solve_single,
                              subdomain_nets)
from hlconcelm.solver import _subproblem


def line_problem():
    """u'' = 0 on [0, 1] with u(0) = 0, u(1) = 1; the solution is u = x."""
    return ProblemSpec("line", ((0.0, 1.0),), ((1.0, (0, 2)),),
                       (BoundaryCondition((0, 0)),
                        BoundaryCondition((0, 1), data=lambda p: np.ones(len(p)))),
                       exact=ExactSolution(lambda x: x))


def heat_problem():
    """u_t = 0.1 u_xx with a decaying sine mode, used for cheap time-marching checks."""
    ex = ExactSolution(lambda x, t: jets.sin(np.pi * x) * jets.exp(-0.1 * np.pi ** 2 * t))
    prob = ProblemSpec("heat", ((0.0, 1.0), (0.0, 0.4)), ((1.0, (1, 1)), (-0.1, (0, 2))),
                       (BoundaryCondition((0, 0)), BoundaryCondition((0, 1)),
                        BoundaryCondition((1, 0), kind="initial")),
                       exact=ex, time_dependent=True)
    return manufactured_problem(prob)


def test_zero_problem_gives_zero_beta():
    prob = line_problem().replace(
        boundary_conditions=(BoundaryCondition((0, 0)), BoundaryCondition((0, 1))),
        exact=ExactSolution(lambda x: 0 * x))
    net = assign_random_coefficients([1, 20, 1], [1.0], seed=0)
    rep = solve_single(prob, net, build_collocation(prob.domain, 10))
    assert np.all(rep.beta == 0) and rep.max_error == 0.0


def test_straight_line_recovered():
    prob = line_problem()
    net = assign_random_coefficients([1, 50, 1], [1.0], seed=0)
    rep = solve_single(prob, net, build_collocation(prob.domain, 20))
    assert rep.max_error <= 1e-8
    assert rep.rms_error <= rep.max_error
    assert rep.termination == "linear" and rep.iterations == 1
    d = rep.to_dict()
    assert d["n_output_coeffs"] == 50 and d["details"]["rows"] == 22


def test_evaluate_errors_zero_for_exact_field():
    prob = line_problem()
    net = assign_random_coefficients([1, 4, 1], [1.0], seed=0)
    # a field that is exactly u = x: compare errors from both entry points
    emax, erms = field_errors(prob, lambda p: p[:, 0].copy())
    assert emax == 0.0 and erms == 0.0
    emax, erms = evaluate_errors(prob, net, np.zeros(4), Q2=11)
    assert abs(emax - 1.0) < 1e-15
    assert abs(erms - np.sqrt(np.mean(np.linspace(0, 1, 11) ** 2))) < 1e-15


def test_dimension_mismatch():
    net = assign_random_coefficients([2, 4, 1], [1.0], seed=0)
    with pytest.raises(ValueError):
        solve_single(line_problem(), net, build_collocation(((0, 1),), 5))


def test_non_finite_basis_raises():
    prob = problems.poisson_varcoef()
    net = assign_random_coefficients([2, 5, 1], [1e200], seed=0)
    with np.errstate(all="ignore"), pytest.raises(SolveError):
        solve_single(prob, net, build_collocation(prob.domain, 4))


def test_modes_use_different_bases():
    prob = problems.poisson_varcoef()
    net = assign_random_coefficients([2, 30, 20, 1], [1.0, 1.0], seed=1)
    colloc = build_collocation(prob.domain, 8)
    a = solve_single(prob, net, colloc)
    b = solve_single(prob, net, colloc, mode=CONVENTIONAL)
    assert a.beta.size == 50 and b.beta.size == 20
    assert a.mode == "hlconc" and b.mode == "conventional"


def test_nonlinear_solve_reports_iterations():
    prob = problems.burgers(0.2)
    net = assign_random_coefficients([2, 40, 1], [1.0], seed=2)
    rep = solve_single(prob, net, build_collocation(prob.domain, 8), nlsq=NlsqOptions(max_iterations=3))
    assert 1 <= rep.iterations <= 3
    assert np.isfinite(rep.residual_norm)


# -- domain decomposition -----------------------------------------------------------

def test_decomposition_spec_validation():
    with pytest.raises(ValueError):
        DecompositionSpec((0.0, 0.0))
    with pytest.raises(ValueError):
        DecompositionSpec((0.0, 1.0), continuity=2)
    d = DecompositionSpec((-1, 0, 1))
    assert d.n_sub == 2
    assert d.boxes(((-1, 1), (0, 2))) == [((-1.0, 0.0), (0, 2)), ((0.0, 1.0), (0, 2))]


def test_single_subdomain_matches_single_domain():
    prob = problems.poisson_varcoef()
    net = assign_random_coefficients([2, 60, 1], [1.0], seed=7)
    single = solve_single(prob, net, build_collocation(prob.domain, 10))
    dec = solve_decomposed(prob, DecompositionSpec((0.0, 1.6)), [net], 10)
    np.testing.assert_allclose(dec.beta, single.beta, rtol=1e-12, atol=1e-12)
    assert dec.max_error == pytest.approx(single.max_error, rel=1e-10)


def test_interface_continuity_enforced():
    prob = heat_problem().replace(time_dependent=False)
    decomp = DecompositionSpec((0.0, 0.4, 1.0), continuity=1)
    nets = subdomain_nets([2, 80, 1], [1.0], 3, decomp.n_sub)
    rep = solve_decomposed(prob, decomp, nets, 12)
    ju, jdu = interface_jumps(rep.solution, prob.domain, 21)
    assert rep.max_error <= 1e-4
    assert ju <= 10 * rep.residual_norm + 1e-12
    assert jdu <= 10 * rep.residual_norm + 1e-12
    assert rep.details["subdomains"] == 2


def test_joint_system_structure():
    prob = line_problem()
    decomp = DecompositionSpec((0.0, 0.5, 1.0), continuity=1)
    nets = subdomain_nets([1, 6, 1], [1.0], 0, 2)
    parts = [prepare_system(_subproblem(prob, decomp, i), n,
                            build_collocation(decomp.boxes(prob.domain)[i], 5),
                            extra_keys=[(0, 1)])[1] for i, n in enumerate(nets)]
    joint = JointSystem(parts, decomp)
    # each part has 5 PDE rows plus one outer boundary row; 2 coupling rows
    assert [p.n_rows for p in parts] == [6, 6]
    assert joint.n_rows == 14 and joint.n_cols == 12
    J = joint.jacobian()
    np.testing.assert_array_equal(J[:6, 6:], 0)
    np.testing.assert_array_equal(J[6:12, :6], 0)
    beta = np.random.default_rng(0).standard_normal(12)
    np.testing.assert_allclose(joint.residual(beta), J @ beta + joint.residual(np.zeros(12)),
                               atol=1e-12)


def test_periodic_across_decomposition_rejected():
    prob = problems.advection(1.0)
    nets = subdomain_nets([2, 5, 1], [1.0], 0, 2)
    with pytest.raises(ValueError):
        solve_decomposed(prob, DecompositionSpec((0, 2.5, 5)), nets, 4)


def test_wrong_number_of_networks():
    with pytest.raises(ValueError):
        solve_decomposed(line_problem(), DecompositionSpec((0, 0.5, 1)),
                         subdomain_nets([1, 5, 1], [1.0], 0, 1), 5)


def test_piecewise_field_left_piece_owns_breakpoint():
    nets = subdomain_nets([1, 3, 1], [1.0], 0, 2)
    pieces = [NetworkField(nets[0], np.zeros(3)), NetworkField(nets[1], np.ones(3))]
    f = PiecewiseField(pieces, (0, 1, 2), 0)
    p = np.array([[0.0], [1.0], [1.5], [2.0]])
    want = np.where(p[:, 0] <= 1.0, 0.0, pieces[1](p))
    np.testing.assert_array_equal(f(p), want)


# -- time marching ------------------------------------------------------------------

def test_one_block_matches_single_solve():
    prob = heat_problem()
    net = assign_random_coefficients([2, 60, 1], [1.0], seed=5)
    single = solve_single(prob, net, build_collocation(prob.domain, 10))
    marched = block_time_march(prob, 1, net, 10)
    np.testing.assert_array_equal(marched.beta, single.beta)
    assert marched.max_error == single.max_error


def test_block_march_accuracy_and_aggregates():
    prob = heat_problem()
    net = assign_random_coefficients([2, 80, 1], [1.0], seed=5)
    rep = block_time_march(prob, 3, net, 12)
    assert rep.max_error <= 1e-5
    assert rep.details["blocks"] == 3
    assert rep.max_error == max(rep.details["block_max_error"])
    assert rep.rms_error <= rep.max_error
    assert isinstance(rep.solution, PiecewiseField)
    assert rep.beta.size == 240


def test_block_march_failure_names_the_block():
    prob = problems.burgers(0.2)
    prob = prob.replace(source=lambda p: np.where(p[:, 1] > 0.15, np.nan, 0.0))
    net = assign_random_coefficients([2, 10, 1], [1.0], seed=0)
    with pytest.raises(SolveError, match="time block 1"):
        block_time_march(prob, 2, net, 5, nlsq=NlsqOptions(max_iterations=2))


def test_block_march_requires_time_dependence():
    net = assign_random_coefficients([2, 5, 1], [1.0], seed=0)
    with pytest.raises(ValueError):
        block_time_march(problems.poisson_varcoef(), 2, net, 5)
    with pytest.raises(ValueError):
        block_time_march(heat_problem(), 0, net, 5)


def test_network_field_derivative_matches_difference():
    prob = line_problem()
    net = assign_random_coefficients([1, 50, 1], [1.0], seed=0)
    rep = solve_single(prob, net, build_collocation(prob.domain, 20))
    fld = rep.solution
    assert isinstance(fld, NetworkField)
    p = np.array([[0.3], [0.8]])
    np.testing.assert_allclose(fld.derivative(p, (0, 1)), [1.0, 1.0], atol=1e-6)


def test_warm_start_passes_previous_coefficients(monkeypatch):
    import hlconcelm.solver as solver_mod
    seen = []
    real = solver_mod.solve_system

    def spy(system, nlsq, beta0=None):
        seen.append(None if beta0 is None else beta0.copy())
        return real(system, nlsq, beta0)

    monkeypatch.setattr(solver_mod, "solve_system", spy)
    prob = problems.burgers(0.2)
    net = assign_random_coefficients([2, 15, 1], [1.0], seed=0)
    rep = block_time_march(prob, 3, net, 5, nlsq=NlsqOptions(max_iterations=2), warm_start=True)
    assert seen[0] is None
    np.testing.assert_array_equal(seen[1], rep.beta[:15])
    np.testing.assert_array_equal(seen[2], rep.beta[15:30])
    seen.clear()
    block_time_march(prob, 2, net, 5, nlsq=NlsqOptions(max_iterations=2))
    assert seen == [None, None]
