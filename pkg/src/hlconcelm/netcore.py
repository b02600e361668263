"""Hidden-layer concatenated random-feature networks.

A network is described by its architecture ``[M0, M1, ..., M_L]`` (input
width first, a single linear output last).  Hidden layer ``i`` computes
``phi_i = sigma(phi_{i-1} @ W_i + b_i)`` with the Gaussian activation, and in
concatenated (``hlconc``) mode every hidden node is wired to the output::

    u(x) = sum_i phi_i(x) @ beta_i

The hidden coefficients are random and fixed.  Layer ``i`` draws a block
``xi_i`` of ``(M_{i-1} + 1) * M_i`` uniform numbers on ``[-1, 1]`` and scales it
by the hidden magnitude ``R_i``; the block is laid out as the row-major
weight matrix followed by the bias row.

Random streams come from ``numpy.random.default_rng`` (PCG64).  Layers are
drawn one after another, so a longer architecture with the same seed shares
the exact leading coefficients of a shorter one.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import jets
from .jets import MAX_ORDER, Jet

HLCONC = "hlconc"
CONVENTIONAL = "conventional"
MODES = (HLCONC, CONVENTIONAL)


def _check_arch(arch: Sequence[int]) -> tuple:
    arch = tuple(int(m) for m in arch)
    if len(arch) < 3:
        raise ValueError(f"architecture needs at least one hidden layer: {arch}")
    if any(m < 1 for m in arch):
        raise ValueError(f"layer widths must be positive: {arch}")
    if arch[-1] != 1:
        raise ValueError(f"only single-output networks are supported: {arch}")
    return arch


def num_hidden_coeffs(arch: Sequence[int]) -> int:
    return sum((arch[i - 1] + 1) * arch[i] for i in range(1, len(arch) - 1))


def num_output_coeffs(arch: Sequence[int]) -> int:
    return sum(arch[1:-1])


@dataclass(frozen=True, eq=False)
class NetworkCoefficients:
    """Fixed hidden layers plus output weights of one network.

    ``weights[i]``/``biases[i]`` belong to hidden layer ``i + 1``.  ``xi`` and
    ``R`` record how the hidden layers were drawn (``theta == R_i * xi_i`` per
    layer); ``xi`` is ``None`` once hidden coefficients were edited by hand.

    ``input_box`` optionally maps each input coordinate affinely from
    ``[lo, hi]`` onto ``[-1, 1]`` before the first hidden layer.
    """

    arch: tuple
    weights: tuple
    biases: tuple
    beta: np.ndarray
    R: Optional[tuple] = None
    xi: Optional[np.ndarray] = None
    input_box: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "arch", _check_arch(self.arch))
        L = len(self.arch) - 1
        if len(self.weights) != L - 1 or len(self.biases) != L - 1:
            raise ValueError("one weight matrix and bias row per hidden layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            if w.shape != (self.arch[i - 1], self.arch[i]) or b.shape != (self.arch[i],):
                raise ValueError(f"layer {i} coefficient shapes do not match {self.arch}")
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (self.n_output,):
            raise ValueError(f"beta must have length {self.n_output}")
        object.__setattr__(self, "beta", beta)
        if self.input_box is not None:
            box = tuple((float(lo), float(hi)) for lo, hi in self.input_box)
            if len(box) != self.arch[0] or any(hi <= lo for lo, hi in box):
                raise ValueError(f"bad input box {self.input_box}")
            object.__setattr__(self, "input_box", box)

    @property
    def dim(self) -> int:
        return self.arch[0]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.arch) - 2

    @property
    def n_hidden(self) -> int:
        return num_hidden_coeffs(self.arch)

    @property
    def n_output(self) -> int:
        return num_output_coeffs(self.arch)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate(
            [np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def layer_slices(self) -> list:
        """Column ranges of each hidden layer inside the concatenated basis."""
        out, start = [], 0
        for m in self.arch[1:-1]:
            out.append(slice(start, start + m))
            start += m
        return out

    def with_beta(self, beta) -> "NetworkCoefficients":
        return dataclasses.replace(self, beta=np.array(beta, dtype=float))

    def with_input_box(self, box) -> "NetworkCoefficients":
        return dataclasses.replace(self, input_box=box)


def _split_theta(arch, theta):
    weights, biases, pos = [], [], 0
    for i in range(1, len(arch) - 1):
        m_in, m_out = arch[i - 1], arch[i]
        block = theta[pos:pos + (m_in + 1) * m_out]
        weights.append(block[:m_in * m_out].reshape(m_in, m_out).copy())
        biases.append(block[m_in * m_out:].copy())
        pos += (m_in + 1) * m_out
    return tuple(weights), tuple(biases)


def draw_xi(arch: Sequence[int], seed: int) -> np.ndarray:
    """Uniform ``[-1, 1]`` base vector, drawn layer by layer."""
    rng = np.random.default_rng(seed)
    blocks = [rng.uniform(-1.0, 1.0, (arch[i - 1] + 1) * arch[i])
              for i in range(1, len(arch) - 1)]
    return np.concatenate(blocks)


def assign_random_coefficients(arch: Sequence[int], R: Sequence[float], seed: int = 0,
                               xi: Optional[np.ndarray] = None,
                               input_box=None) -> NetworkCoefficients:
    """Build a network whose layer-``i`` coefficients are ``R_i * xi_i``.

    ``xi`` may be passed explicitly (e.g. all ones in tests); otherwise it is
    drawn from ``seed``.  ``beta`` starts at zero.
    """
    arch = _check_arch(arch)
    R = tuple(float(r) for r in np.atleast_1d(R))
    if len(R) != len(arch) - 2:
        raise ValueError(f"need {len(arch) - 2} hidden magnitudes, got {len(R)}")
    n_h = num_hidden_coeffs(arch)
    if xi is None:
        xi = draw_xi(arch, seed)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (n_h,):
        raise ValueError(f"xi must have length {n_h}")
    scale = np.concatenate([np.full((arch[i - 1] + 1) * arch[i], R[i - 1])
                            for i in range(1, len(arch) - 1)])
    weights, biases = _split_theta(arch, scale * xi)
    return NetworkCoefficients(arch, weights, biases, np.zeros(num_output_coeffs(arch)),
                               R=R, xi=xi, input_box=input_box)


# ---------------------------------------------------------------------------
# basis evaluation

@dataclass
class BasisDerivatives:
    """Hidden-node fields on a point set and their pure derivatives.

    ``derivs`` maps ``(coord, order)`` to a ``Q x N`` matrix of
    ``d^order phi / d x_coord^order``.  ``get`` also answers order 0 with
    ``psi`` itself.
    """

    psi: np.ndarray
    derivs: dict = field(default_factory=dict)

    def get(self, key) -> np.ndarray:
        coord, order = key
        if order == 0:
            return self.psi
        try:
            return self.derivs[(coord, order)]
        except KeyError:
            raise KeyError(f"derivative {key} was not computed for this basis") from None

    @property
    def shape(self):
        return self.psi.shape

    def columns(self, cols) -> "BasisDerivatives":
        return BasisDerivatives(self.psi[:, cols],
                                {k: v[:, cols] for k, v in self.derivs.items()})

    def rows(self, rows) -> "BasisDerivatives":
        return BasisDerivatives(self.psi[rows],
                                {k: v[rows] for k, v in self.derivs.items()})


def _normalized(net: NetworkCoefficients, points: np.ndarray):
    if net.input_box is None:
        return points, np.ones(net.dim)
    lo = np.array([b[0] for b in net.input_box])
    hi = np.array([b[1] for b in net.input_box])
    scale = 2.0 / (hi - lo)
    return (points - lo) * scale - 1.0, scale


def _check_keys(requested: Iterable, dim: int) -> dict:
    """Highest requested derivative order per coordinate."""
    top = {}
    for coord, order in requested:
        if order < 0 or order > MAX_ORDER:
            raise ValueError(f"derivative order {order} unsupported (max {MAX_ORDER})")
        if not 0 <= coord < dim:
            raise ValueError(f"coordinate {coord} out of range for dimension {dim}")
        if order > 0:
            top[coord] = max(top.get(coord, 0), order)
    return top


def evaluate_basis(net: NetworkCoefficients, points, requested=()) -> BasisDerivatives:
    """All hidden-node fields (layer-major) and the requested derivatives."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != net.dim:
        raise ValueError(f"points must have {net.dim} columns")
    top = _check_keys(requested, net.dim)
    xn, scale = _normalized(net, points)

    layers = []
    h = xn
    for w, b in zip(net.weights, net.biases):
        h = jets.gaussian(h @ w + b)
        layers.append(h)
    basis = BasisDerivatives(np.hstack(layers))

    for coord, order in top.items():
        # the first affine map is linear in x, so its jet is exact at order 1
        z = xn @ net.weights[0] + net.biases[0]
        slope = np.broadcast_to(scale[coord] * net.weights[0][coord], z.shape)
        h = jets.gaussian(jets.jet_var(z, order, slope))
        layer_jets = [h]
        for w, b in zip(net.weights[1:], net.biases[1:]):
            h = jets.gaussian(h @ w + b)
            layer_jets.append(h)
        for k in range(1, order + 1):
            basis.derivs[(coord, k)] = np.hstack([j[k] for j in layer_jets])
    return basis


def conventional_basis(net: NetworkCoefficients, points, requested=()) -> BasisDerivatives:
    """Only the last hidden layer is exposed to the output."""
    full = evaluate_basis(net, points, requested)
    return full.columns(net.layer_slices()[-1])


def basis_for_mode(net, points, requested=(), mode: str = HLCONC) -> BasisDerivatives:
    if mode == HLCONC:
        return evaluate_basis(net, points, requested)
    if mode == CONVENTIONAL:
        return conventional_basis(net, points, requested)
    raise ValueError(f"unknown basis mode {mode!r}")


def num_basis_columns(net: NetworkCoefficients, mode: str = HLCONC) -> int:
    return net.n_output if mode == HLCONC else net.arch[-2]


def network_output(basis, beta) -> np.ndarray:
    psi = basis.psi if isinstance(basis, BasisDerivatives) else np.asarray(basis)
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or beta.shape[0] != psi.shape[1]:
        raise ValueError(f"beta has length {beta.shape}, basis has {psi.shape[1]} columns")
    return psi @ beta


def evaluate_network(net: NetworkCoefficients, points, beta=None, mode: str = HLCONC):
    beta = net.beta if beta is None else beta
    return network_output(basis_for_mode(net, points, (), mode), beta)


# ---------------------------------------------------------------------------
# capacity-preserving surgery

def append_hidden_layer(net: NetworkCoefficients, n: int, new_weights=None, new_bias=None,
                        seed: Optional[int] = None) -> NetworkCoefficients:
    """Append an ``n``-node hidden layer whose output weights are zero.

    The new layer's coefficients may be anything; when not given they are
    drawn as standard normals from ``seed``.  The output field is unchanged.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    m_last = net.arch[-2]
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((m_last, n)) if new_weights is None else np.asarray(new_weights, float)
    b = rng.standard_normal(n) if new_bias is None else np.asarray(new_bias, float)
    arch = net.arch[:-1] + (n, 1)
    return NetworkCoefficients(arch, net.weights + (w.reshape(m_last, n),), net.biases + (b.reshape(n),),
                               np.concatenate([net.beta, np.zeros(n)]),
                               R=None, xi=None, input_box=net.input_box)


def widen_hidden_layer(net: NetworkCoefficients, s: int, new_in_weights=None, new_bias=None,
                       seed: Optional[int] = None) -> NetworkCoefficients:
    """Add one node to hidden layer ``s`` (1-based) without changing the output.

    The node's incoming weights and bias are arbitrary; its outgoing weights
    into layer ``s + 1`` and its output weight are zero.
    """
    L1 = net.n_hidden_layers
    if not 1 <= s <= L1:
        raise ValueError(f"layer index s={s} outside 1..{L1}")
    rng = np.random.default_rng(seed)
    m_in = net.arch[s - 1]
    w_new = rng.standard_normal(m_in) if new_in_weights is None else np.asarray(new_in_weights, float)
    b_new = rng.standard_normal() if new_bias is None else float(new_bias)

    weights, biases = list(net.weights), list(net.biases)
    weights[s - 1] = np.hstack([weights[s - 1], w_new.reshape(m_in, 1)])
    biases[s - 1] = np.append(biases[s - 1], b_new)
    if s < L1:
        weights[s] = np.vstack([weights[s], np.zeros((1, weights[s].shape[1]))])

    arch = list(net.arch)
    arch[s] += 1
    cut = net.layer_slices()[s - 1].stop
    beta = np.concatenate([net.beta[:cut], [0.0], net.beta[cut:]])
    return NetworkCoefficients(tuple(arch), tuple(weights), tuple(biases), beta,
                               R=None, xi=None, input_box=net.input_box)


def extend_coefficient_vector(net: NetworkCoefficients, n: int, R_new: float,
                              seed2: int) -> NetworkCoefficients:
    """Append a randomly drawn hidden layer, keeping every old coefficient.

    The new block of base numbers comes from ``seed2``.  Output weights are
    reset to zero, so the extended network must be retrained.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    m_last = net.arch[-2]
    block = np.random.default_rng(seed2).uniform(-1.0, 1.0, (m_last + 1) * n)
    w = (R_new * block[:m_last * n]).reshape(m_last, n)
    b = R_new * block[m_last * n:]
    arch = net.arch[:-1] + (n, 1)
    xi = None if net.xi is None else np.concatenate([net.xi, block])
    R = None if net.R is None else net.R + (float(R_new),)
    return NetworkCoefficients(arch, net.weights + (w,), net.biases + (b,),
                               np.zeros(num_output_coeffs(arch)), R=R, xi=xi,
                               input_box=net.input_box)


# ---------------------------------------------------------------------------
# checkpoint format

def save_network(net: NetworkCoefficients, path) -> None:
    """Write a network to an ``.npz`` archive (bit-exact round trip)."""
    arrays = {
        "arch": np.array(net.arch, dtype=np.int64),
        "beta": net.beta,
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases), start=1):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    if net.R is not None:
        arrays["R"] = np.array(net.R)
    if net.xi is not None:
        arrays["xi"] = net.xi
    if net.input_box is not None:
        arrays["input_box"] = np.array(net.input_box)
    np.savez(path, **arrays)


def load_network(path) -> NetworkCoefficients:
    with np.load(path) as data:
        arch = tuple(int(m) for m in data["arch"])
        n = len(arch) - 2
        weights = tuple(data[f"W{i}"].copy() for i in range(1, n + 1))
        biases = tuple(data[f"b{i}"].copy() for i in range(1, n + 1))
        R = tuple(float(r) for r in data["R"]) if "R" in data else None
        xi = data["xi"].copy() if "xi" in data else None
        box = tuple(map(tuple, data["input_box"])) if "input_box" in data else None
        return NetworkCoefficients(arch, weights, biases, data["beta"].copy(),
                                   R=R, xi=xi, input_box=box)
