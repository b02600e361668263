import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hlconcelm.netcore import (CONVENTIONAL, HLCONC, NetworkCoefficients, append_hidden_layer,
                               assign_random_coefficients, basis_for_mode, conventional_basis,
                               draw_xi, evaluate_basis, evaluate_network,
                               extend_coefficient_vector, load_network, network_output,
                               num_basis_columns, num_hidden_coeffs, save_network,
                               widen_hidden_layer)

E1 = math.exp(-1.0)


def hand_net(arch, ws, bs):
    ws = tuple(np.array(w, dtype=float).reshape(arch[i], arch[i + 1]) for i, w in enumerate(ws))
    bs = tuple(np.array(b, dtype=float).reshape(arch[i + 1]) for i, b in enumerate(bs))
    return NetworkCoefficients(tuple(arch), ws, bs, np.zeros(sum(arch[1:-1])))


def random_net(rng, arch, R=1.0):
    net = assign_random_coefficients(arch, [R] * (len(arch) - 2), int(rng.integers(2 ** 31)))
    return net.with_beta(rng.standard_normal(net.n_output))


# -- random coefficient assignment ------------------------------------------------

def test_zero_magnitude():
    net = assign_random_coefficients([2, 3, 1], [0.0], seed=7)
    assert net.theta.shape == (9,)
    assert np.all(net.theta == 0)


def test_forced_xi():
    net = assign_random_coefficients([2, 3, 1], [0.5], xi=np.ones(9))
    assert np.all(net.theta == 0.5)


def test_theta_layout_and_bounds():
    arch = [2, 800, 50, 1]
    net = assign_random_coefficients(arch, [3.0, 0.005], seed=10)
    n1 = 3 * 800
    assert net.theta.shape == (n1 + 801 * 50,)
    assert np.abs(net.theta[:n1]).max() <= 3.0
    assert np.abs(net.theta[n1:]).max() <= 0.005
    # theta equals R_i * xi_i slice by slice
    np.testing.assert_array_equal(net.theta[:n1], 3.0 * net.xi[:n1])
    np.testing.assert_array_equal(net.theta[n1:], 0.005 * net.xi[n1:])
    # layer 1: weights row-major then biases
    np.testing.assert_array_equal(net.theta[:1600].reshape(2, 800), net.weights[0])
    np.testing.assert_array_equal(net.theta[1600:2400], net.biases[0])


def test_bound_check_over_many_draws():
    arch = [2, 800, 50, 1]
    worst = np.zeros(2)
    for seed in range(3):
        net = assign_random_coefficients(arch, [3.0, 0.005], seed=seed)
        worst = np.maximum(worst, [np.abs(net.theta[:2400]).max(), np.abs(net.theta[2400:]).max()])
    assert worst[0] <= 3.0 and worst[1] <= 0.005
    assert worst[0] > 2.99 and worst[1] > 0.00499


def test_assignment_errors():
    with pytest.raises(ValueError):
        assign_random_coefficients([2, 3, 1], [1.0, 2.0])
    with pytest.raises(ValueError):
        assign_random_coefficients([2, 1], [])
    with pytest.raises(ValueError):
        assign_random_coefficients([2, 3, 2], [1.0])


def test_seeded_draws_are_reproducible_and_layer_major():
    a, b = draw_xi([2, 4, 3, 1], 5), draw_xi([2, 4, 3, 1], 5)
    np.testing.assert_array_equal(a, b)
    # adding a layer keeps the earlier draws
    longer = draw_xi([2, 4, 3, 6, 1], 5)
    np.testing.assert_array_equal(longer[:a.size], a)
    assert np.all(np.abs(a) <= 1)


# -- basis evaluation -------------------------------------------------------------------

def test_zero_theta_gives_constant_basis():
    net = assign_random_coefficients([2, 4, 3, 1], [0.0, 0.0], seed=1)
    pts = np.random.default_rng(0).uniform(-1, 1, (7, 2))
    b = evaluate_basis(net, pts, [(0, 1), (1, 3)])
    assert np.all(b.psi == 1.0)
    assert all(np.all(m == 0) for m in b.derivs.values())
    cb = conventional_basis(net, pts)
    assert cb.psi.shape == (7, 3) and np.all(cb.psi == 1)


def test_single_node_closed_form():
    net = hand_net([1, 1, 1], [[1.0]], [[0.0]])
    b = evaluate_basis(net, [[1.0]], [(0, 1)])
    np.testing.assert_allclose(b.psi, [[E1]], rtol=1e-15)
    np.testing.assert_allclose(b.get((0, 1)), [[-2 * E1]], rtol=1e-15)


def test_two_layer_column_order():
    net = hand_net([1, 1, 1, 1], [[1.0], [1.0]], [[0.0], [0.0]])
    b = evaluate_basis(net, [[0.0]])
    np.testing.assert_allclose(b.psi, [[1.0, E1]], rtol=1e-15)
    np.testing.assert_allclose(conventional_basis(net, [[0.0]]).psi, [[E1]], rtol=1e-15)


def test_single_hidden_layer_modes_agree():
    net = random_net(np.random.default_rng(3), [2, 6, 1])
    pts = np.random.default_rng(4).uniform(-1, 1, (5, 2))
    a = evaluate_basis(net, pts, [(0, 2)])
    c = conventional_basis(net, pts, [(0, 2)])
    np.testing.assert_array_equal(a.psi, c.psi)
    np.testing.assert_array_equal(a.get((0, 2)), c.get((0, 2)))


def test_column_counts():
    net = assign_random_coefficients([2, 7, 5, 3, 1], [1, 1, 1], seed=0)
    assert num_basis_columns(net, HLCONC) == 15
    assert num_basis_columns(net, CONVENTIONAL) == 3
    assert num_hidden_coeffs(net.arch) == 3 * 7 + 8 * 5 + 6 * 3
    pts = np.zeros((4, 2))
    assert basis_for_mode(net, pts, (), HLCONC).psi.shape == (4, 15)
    assert basis_for_mode(net, pts, (), CONVENTIONAL).psi.shape == (4, 3)


def test_bad_requests():
    net = assign_random_coefficients([2, 3, 1], [1.0], seed=0)
    with pytest.raises(ValueError):
        evaluate_basis(net, np.zeros((2, 2)), [(0, 4)])
    with pytest.raises(ValueError):
        evaluate_basis(net, np.zeros((2, 2)), [(2, 1)])
    with pytest.raises(ValueError):
        evaluate_basis(net, np.zeros((2, 3)))
    with pytest.raises(KeyError):
        evaluate_basis(net, np.zeros((2, 2)), [(0, 1)]).get((1, 1))
    with pytest.raises(ValueError):
        basis_for_mode(net, np.zeros((2, 2)), (), "deep")


def _fd(f, k, h):
    """Central difference of ``f(t)`` at ``t = 0``; fourth order for ``k = 3``."""
    if k == 1:
        return (f(h) - f(-h)) / (2 * h)
    if k == 2:
        return (f(h) - 2 * f(0.0) + f(-h)) / h ** 2
    return (-f(3 * h) + 8 * f(2 * h) - 13 * f(h) + 13 * f(-h) - 8 * f(-2 * h) + f(-3 * h)) / (8 * h ** 3)


@pytest.mark.parametrize("box", [None, ((0.0, 1.6), (-2.0, 3.0))])
def test_derivatives_match_finite_differences(box):
    rng = np.random.default_rng(11)
    net = assign_random_coefficients([2, 12, 9, 1], [1.5, 0.8], seed=2, input_box=box)
    pts = rng.uniform(0.2, 1.4, (15, 2))
    keys = [(c, k) for c in range(2) for k in (1, 2, 3)]
    b = evaluate_basis(net, pts, keys)
    for c, k in keys:
        e = np.zeros(2)
        e[c] = 1.0
        h = 1e-4 if k < 3 else 1e-2
        fd = _fd(lambda t: evaluate_basis(net, pts + t * e).psi, k, h)
        err = np.abs(b.get((c, k)) - fd) / np.maximum(np.abs(fd), 1.0)
        assert err.max() <= (1e-5 if k < 3 else 1e-4), (c, k, err.max())


# -- output ---------------------------------------------------------------------------------

def test_output_examples():
    psi = np.random.default_rng(0).standard_normal((4, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = 1
        np.testing.assert_array_equal(network_output(psi, e), psi[:, k])
    assert np.all(network_output(psi, np.zeros(6)) == 0)
    ones = np.ones((3, 5))
    np.testing.assert_allclose(network_output(ones, np.arange(5.0)), np.full(3, 10.0))
    with pytest.raises(ValueError):
        network_output(psi, np.zeros(5))


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_output_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal((8, 5))
    b1, b2 = rng.standard_normal(5), rng.standard_normal(5)
    lhs = network_output(psi, a * b1 + b * b2)
    rhs = a * network_output(psi, b1) + b * network_output(psi, b2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)) * 10)


# -- surgery ----------------------------------------------------------------------------------

def _close(u_new, u_old):
    return np.all(np.abs(u_new - u_old) <= 1e-12 * (1 + np.abs(u_old)))


def test_append_hidden_layer_preserves_output():
    rng = np.random.default_rng(0)
    net = random_net(rng, [2, 8, 6, 1])
    pts = rng.uniform(-2, 2, (1000, 2))
    new = append_hidden_layer(net, 5, seed=1)
    assert new.arch == (2, 8, 6, 5, 1)
    assert new.n_output == net.n_output + 5
    assert new.n_hidden == net.n_hidden + 7 * 5
    assert _close(evaluate_network(new, pts), evaluate_network(net, pts))


def test_append_to_zero_net_adds_constant_column():
    net = assign_random_coefficients([2, 3, 1], [0.0], seed=0).with_beta([1.0, 2.0, 3.0])
    new = append_hidden_layer(net, 1, new_weights=np.zeros((3, 1)), new_bias=[0.0])
    pts = np.random.default_rng(1).uniform(-1, 1, (10, 2))
    psi = evaluate_basis(new, pts).psi
    assert np.all(psi[:, -1] == 1.0) and new.beta[-1] == 0
    np.testing.assert_array_equal(evaluate_network(new, pts), evaluate_network(net, pts))


@pytest.mark.parametrize("s", [1, 2, 3])
def test_widen_hidden_layer_preserves_output(s):
    rng = np.random.default_rng(s)
    net = random_net(rng, [2, 7, 5, 4, 1])
    pts = rng.uniform(-2, 2, (1000, 2))
    new = widen_hidden_layer(net, s, seed=9)
    assert new.arch[s] == net.arch[s] + 1
    assert new.n_output == net.n_output + 1
    assert _close(evaluate_network(new, pts), evaluate_network(net, pts))


def test_widen_out_of_range():
    net = random_net(np.random.default_rng(0), [2, 3, 1])
    for s in (0, 2):
        with pytest.raises(ValueError):
            widen_hidden_layer(net, s)


def test_extend_prefix_property():
    net = assign_random_coefficients([2, 10, 6, 1], [1.2, 0.7], seed=3)
    ext = extend_coefficient_vector(net, 8, 0.9, seed2=44)
    pts = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    old = evaluate_basis(net, pts, [(0, 2)])
    new = evaluate_basis(ext, pts, [(0, 2)])
    np.testing.assert_array_equal(new.psi[:, :16], old.psi)
    np.testing.assert_array_equal(new.get((0, 2))[:, :16], old.get((0, 2)))
    np.testing.assert_array_equal(ext.theta[:net.n_hidden], net.theta)
    assert np.all(ext.beta == 0) and ext.R == (1.2, 0.7, 0.9)
    np.testing.assert_array_equal(ext.theta, np.concatenate([net.theta, 0.9 * ext.xi[net.n_hidden:]]))


def test_extend_with_zero_magnitude_appends_constants():
    net = assign_random_coefficients([2, 4, 1], [1.0], seed=3)
    ext = extend_coefficient_vector(net, 3, 0.0, seed2=1)
    psi = evaluate_basis(ext, np.random.default_rng(0).uniform(-1, 1, (9, 2))).psi
    assert np.all(psi[:, 4:] == 1.0)


def test_save_load_round_trip(tmp_path):
    net = random_net(np.random.default_rng(2), [2, 5, 4, 1]).with_input_box(((0, 1), (2, 3)))
    path = tmp_path / "net.npz"
    save_network(net, path)
    back = load_network(path)
    assert back.arch == net.arch and back.R == net.R and back.input_box == net.input_box
    np.testing.assert_array_equal(back.theta, net.theta)
    np.testing.assert_array_equal(back.beta, net.beta)
    np.testing.assert_array_equal(back.xi, net.xi)
    edited = widen_hidden_layer(net, 1, seed=0)
    save_network(edited, path)
    assert load_network(path).xi is None
