import json
import math

import numpy as np
import pytest

from vqcdrive import quantum as Q
from vqcdrive.errors import CheckpointError, EncodingError, GateError


def rand_params(rng, weight_scale=2.0):
    p = Q.init_params(rng)
    p.theta[:] = rng.uniform(-np.pi, np.pi, Q.THETA_SHAPE)
    p.action_weights[:] = rng.uniform(-weight_scale, weight_scale, Q.N_ACTIONS)
    return p


def rand_state(rng):
    amps = rng.normal(size=Q.DIM) + 1j * rng.normal(size=Q.DIM)
    return amps / np.linalg.norm(amps)


# ---------------------------------------------------------------------------
# gates
# ---------------------------------------------------------------------------

def test_rx_zero_is_identity():
    state = Q.zero_state()
    out = Q.apply_gate(state, Q.GateSpec("RX", 0, angle=0.0))
    assert np.array_equal(out, state)


def test_ry_pi_flips_qubit0():
    out = Q.apply_gate(Q.zero_state(), Q.GateSpec("RY", 0, angle=math.pi))
    expected = np.zeros(Q.DIM, dtype=complex)
    expected[1] = 1.0  # |00001>: qubit 0 set
    assert np.allclose(out, expected, atol=1e-15)


def test_cz_phases_11():
    state = np.zeros(Q.DIM, dtype=complex)
    state[0b00011] = 1.0
    out = Q.apply_gate(state, Q.GateSpec("CZ", 1, control=0))
    assert out[0b00011] == -1.0
    # |01> and |10> untouched
    for basis in (0b00001, 0b00010):
        state = np.zeros(Q.DIM, dtype=complex)
        state[basis] = 1.0
        out = Q.apply_gate(state, Q.GateSpec("CZ", 1, control=0))
        assert out[basis] == 1.0


def test_bad_gates_rejected():
    state = Q.zero_state()
    with pytest.raises(GateError):
        Q.apply_gate(state, Q.GateSpec("RX", 5, angle=0.1))
    with pytest.raises(GateError):
        Q.apply_gate(state, Q.GateSpec("RX", -1, angle=0.1))
    with pytest.raises(GateError):
        Q.apply_gate(state, Q.GateSpec("CZ", 2, control=2))
    with pytest.raises(GateError):
        Q.apply_gate(state, Q.GateSpec("CZ", 2))
    with pytest.raises(GateError):
        Q.apply_gate(state, Q.GateSpec("H", 0))


def test_norm_preserved_under_random_gates():
    rng = np.random.default_rng(7)
    state = rand_state(rng)
    for _ in range(500):
        kind = rng.choice(["RX", "RY", "RZ", "CZ"])
        target = int(rng.integers(Q.N_QUBITS))
        if kind == "CZ":
            control = int((target + 1 + rng.integers(Q.N_QUBITS - 1)) % Q.N_QUBITS)
            gate = Q.GateSpec("CZ", target, control=control)
        else:
            gate = Q.GateSpec(kind, target, angle=float(rng.uniform(-np.pi, np.pi)))
        state = Q.apply_gate(state, gate)
        assert abs(np.linalg.norm(state) - 1.0) <= 1e-10


def test_gate_inverse_roundtrip():
    rng = np.random.default_rng(11)
    state = rand_state(rng)
    for kind in ("RX", "RY", "RZ"):
        angle = float(rng.uniform(-np.pi, np.pi))
        fwd = Q.apply_gate(state, Q.GateSpec(kind, 2, angle=angle))
        back = Q.apply_gate(fwd, Q.GateSpec(kind, 2, angle=-angle))
        assert np.abs(back - state).max() <= 1e-10
    fwd = Q.apply_gate(state, Q.GateSpec("CZ", 3, control=1))
    back = Q.apply_gate(fwd, Q.GateSpec("CZ", 3, control=1))
    assert np.abs(back - state).max() <= 1e-10


# ---------------------------------------------------------------------------
# circuit construction
# ---------------------------------------------------------------------------

def test_zero_circuit_leaves_vacuum():
    params = Q.init_params(scheme="zero")
    gates = Q.build_circuit(params, np.zeros(5))
    state = Q.run_circuit(gates)
    expected = Q.zero_state()
    assert np.allclose(state, expected, atol=1e-12)


def test_gate_count_and_order():
    params = Q.init_params(scheme="zero")
    gates = Q.build_circuit(params, np.zeros(5))
    assert len(gates) == 60
    kinds_per_layer = ["RX"] * 5 + ["RY", "RZ"] * 5 + ["CZ"] * 5
    assert [g.kind for g in gates] == kinds_per_layer * 3
    # encoding sublayer qubit-ascending
    assert [g.target for g in gates[:5]] == [0, 1, 2, 3, 4]
    # CZ ring pairs
    ring = [(g.control, g.target) for g in gates[15:20]]
    assert ring == [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]


def test_reuploading_composes_rx_three_times():
    params = Q.init_params(scheme="zero")
    features = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    state = Q.run_circuit(Q.build_circuit(params, features))
    # oracle: compose RX(pi) three times as a 2x2 matrix on qubit 0
    half = math.pi / 2.0
    rx = np.array([[math.cos(half), -1j * math.sin(half)],
                   [-1j * math.sin(half), math.cos(half)]])
    net = rx @ rx @ rx
    expected = np.zeros(Q.DIM, dtype=complex)
    expected[0] = net[0, 0]
    expected[1] = net[1, 0]
    assert np.allclose(state, expected, atol=1e-12)


def test_feature_range_enforced():
    params = Q.init_params(scheme="zero")
    with pytest.raises(EncodingError):
        Q.build_circuit(params, np.array([1.1, 0, 0, 0, 0]))
    with pytest.raises(EncodingError):
        Q.build_circuit(params, np.array([0.0, 0.0, 0.0]))
    with pytest.raises(EncodingError):
        Q.q_values(params, np.array([0, 0, np.nan, 0, 0]))


# ---------------------------------------------------------------------------
# observables and expectations
# ---------------------------------------------------------------------------

def test_expectation_vacuum_and_superposition():
    z0 = Q.PauliProduct((0,))
    assert Q.expectation(Q.zero_state(), z0) == 1.0
    uniform = np.full(Q.DIM, 1.0 / math.sqrt(Q.DIM), dtype=complex)
    assert abs(Q.expectation(uniform, z0)) <= 1e-12


def test_expectation_parity():
    state = np.zeros(Q.DIM, dtype=complex)
    state[0b00001] = 1.0
    z0z1 = Q.PauliProduct((0, 1))
    assert Q.expectation(state, z0z1) == -1.0


def test_expectation_bounded_on_random_states():
    rng = np.random.default_rng(3)
    for _ in range(200):
        state = rand_state(rng)
        obs = Q.ACTION_OBSERVABLES[rng.integers(Q.N_ACTIONS)]
        assert -1.0 <= Q.expectation(state, obs) <= 1.0


def test_action_observables_distinct_and_low_weight():
    supports = {o.support for o in Q.ACTION_OBSERVABLES}
    assert len(supports) == 15
    widths = [len(o.support) for o in Q.ACTION_OBSERVABLES]
    assert widths == [1] * 5 + [2] * 5 + [3] * 5


def test_pauli_product_validation():
    with pytest.raises(ValueError):
        Q.PauliProduct(())
    with pytest.raises(ValueError):
        Q.PauliProduct((5,))


# ---------------------------------------------------------------------------
# q_values
# ---------------------------------------------------------------------------

def test_q_values_zero_weights():
    rng = np.random.default_rng(5)
    params = rand_params(rng)
    params.action_weights[:] = 0.0
    q = Q.q_values(params, rng.uniform(-1, 1, 5))
    assert np.array_equal(q, np.zeros(15))


def test_q_values_vacuum_all_ones():
    params = Q.init_params(scheme="zero")
    q = Q.q_values(params, np.zeros(5))
    assert np.allclose(q, np.ones(15), atol=1e-12)


def test_q_values_spectral_bound():
    rng = np.random.default_rng(9)
    for _ in range(25):
        params = rand_params(rng)
        q = Q.q_values(params, rng.uniform(-1, 1, 5))
        ratio = q / params.action_weights
        assert (np.abs(ratio) <= 1.0 + 1e-12).all()


def test_q_values_deterministic():
    rng = np.random.default_rng(13)
    params = rand_params(rng)
    f = rng.uniform(-1, 1, 5)
    q1 = Q.q_values(params, f)
    q2 = Q.q_values(params, f)
    assert np.array_equal(q1, q2)


def test_q_values_matches_reference_path():
    rng = np.random.default_rng(17)
    for _ in range(10):
        params = rand_params(rng)
        f = rng.uniform(-1, 1, 5)
        state = Q.run_circuit(Q.build_circuit(params, f))
        ref = params.action_weights * np.array(
            [Q.expectation(state, o) for o in Q.ACTION_OBSERVABLES]
        )
        assert np.allclose(Q.q_values(params, f), ref, atol=1e-12)


def test_q_values_batch_matches_single():
    rng = np.random.default_rng(19)
    params = rand_params(rng)
    feats = rng.uniform(-1, 1, (8, 5))
    batch = Q.q_values_batch(params, feats)
    for i in range(8):
        assert np.allclose(batch[i], Q.q_values(params, feats[i]), atol=1e-12)


# ---------------------------------------------------------------------------
# parameter-shift gradients
# ---------------------------------------------------------------------------

def fd_theta_grad(params, features, action, h=1e-5):
    grad = np.zeros(Q.THETA_SHAPE)
    for idx in np.ndindex(Q.THETA_SHAPE):
        plus = params.copy()
        plus.theta[idx] += h
        minus = params.copy()
        minus.theta[idx] -= h
        grad[idx] = (Q.q_values(plus, features)[action]
                     - Q.q_values(minus, features)[action]) / (2 * h)
    return grad


def test_shift_matches_finite_differences():
    rng = np.random.default_rng(23)
    for _ in range(5):
        params = rand_params(rng)
        f = rng.uniform(-1, 1, 5)
        a = int(rng.integers(15))
        theta_grad, w_grad = Q.parameter_shift_grad(params, f, a)
        assert np.abs(theta_grad - fd_theta_grad(params, f, a)).max() <= 1e-5
        h = 1e-5
        plus = params.copy()
        plus.action_weights[a] += h
        minus = params.copy()
        minus.action_weights[a] -= h
        fd_w = (Q.q_values(plus, f)[a] - Q.q_values(minus, f)[a]) / (2 * h)
        assert abs(w_grad - fd_w) <= 1e-5


def test_zero_weight_zeroes_theta_grad():
    rng = np.random.default_rng(29)
    params = rand_params(rng)
    params.action_weights[:] = 0.0
    theta_grad, _ = Q.parameter_shift_grad(params, rng.uniform(-1, 1, 5), 4)
    assert np.array_equal(theta_grad, np.zeros(Q.THETA_SHAPE))


def test_weight_grad_at_vacuum_is_one():
    params = Q.init_params(scheme="zero")
    _, w_grad = Q.parameter_shift_grad(params, np.zeros(5), 8)
    assert abs(w_grad - 1.0) <= 1e-12


def test_shift_bundle_matches_reference_grad():
    rng = np.random.default_rng(31)
    params = rand_params(rng)
    feats = rng.uniform(-1, 1, (6, 5))
    acts = rng.integers(0, 15, 6)
    base, jac = Q.shift_bundle(params, feats, acts)
    for i in range(6):
        theta_grad, w_exp = Q.parameter_shift_grad(params, feats[i], int(acts[i]))
        w_a = params.action_weights[acts[i]]
        assert np.allclose(w_a * jac[i].reshape(Q.THETA_SHAPE), theta_grad, atol=1e-12)
        assert abs(base[i] - w_exp) <= 1e-12


# ---------------------------------------------------------------------------
# params and checkpoints
# ---------------------------------------------------------------------------

def test_init_schemes():
    zero = Q.init_params(scheme="zero")
    assert np.array_equal(zero.theta, np.zeros(Q.THETA_SHAPE))
    assert np.array_equal(zero.action_weights, np.ones(15))
    uni = Q.init_params(np.random.default_rng(0), scheme="uniform", scale=0.1)
    assert (np.abs(uni.theta) <= 0.1).all()
    assert not np.array_equal(uni.theta, np.zeros(Q.THETA_SHAPE))
    with pytest.raises(ValueError):
        Q.init_params(scheme="gaussian")


def test_params_validation():
    with pytest.raises(ValueError):
        Q.VqcParams(np.zeros((2, 5, 2)), np.ones(15))
    with pytest.raises(ValueError):
        Q.VqcParams(np.zeros(Q.THETA_SHAPE), np.ones(14))
    bad = np.zeros(Q.THETA_SHAPE)
    bad[0, 0, 0] = np.inf
    with pytest.raises(ValueError):
        Q.VqcParams(bad, np.ones(15))


def test_checkpoint_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(37)
    params = rand_params(rng)
    params.theta[0, 0, 0] = 1e-310  # subnormal double
    params.theta[1, 2, 1] = math.pi
    path = tmp_path / "ckpt.json"
    Q.save_vqc_params(params, path)
    loaded = Q.load_vqc_params(path)
    assert np.array_equal(loaded.theta, params.theta)
    assert np.array_equal(loaded.action_weights, params.action_weights)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(CheckpointError):
        Q.load_vqc_params(path)
    path.write_text(json.dumps({"qubits": 5, "layers": 3}))
    with pytest.raises(CheckpointError):
        Q.load_vqc_params(path)
    doc = {"qubits": 4, "layers": 3,
           "theta": np.zeros(Q.THETA_SHAPE).tolist(),
           "action_weights": [1.0] * 15}
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        Q.load_vqc_params(path)
