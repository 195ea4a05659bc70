"""Dense 5-qubit statevector simulator and the variational Q-circuit.

The circuit template is fixed at 5 qubits and 3 blocks.  Each block applies
an angle-encoding sublayer (RX(pi*f_q) on every qubit, re-uploading the same
five features), a variational sublayer (RY(theta0) then RZ(theta1) per
qubit), and a ring of CZ entanglers (0,1)(1,2)(2,3)(3,4)(4,0).  Q-values are
expectations of fixed Pauli-Z products, one per discrete action, scaled by a
trainable per-action output weight.  Gradients with respect to rotation
angles use the exact parameter-shift rule; the output-weight gradient is the
raw expectation.

Basis ordering is little-endian: bit q of a basis index is the state of
qubit q.  Global phase is ignored throughout (only |amplitude|^2 and
Z-parities are observed).
"""

import cmath
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CheckpointError, EncodingError, GateError

N_QUBITS = 5
N_LAYERS = 3
N_ACTIONS = 15
DIM = 1 << N_QUBITS
THETA_SHAPE = (N_LAYERS, N_QUBITS, 2)
N_THETA = N_LAYERS * N_QUBITS * 2

ROTATION_KINDS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATION_KINDS + ("CZ",)

RING_PAIRS = tuple((q, (q + 1) % N_QUBITS) for q in range(N_QUBITS))


@dataclass(frozen=True)
class GateSpec:
    """One gate of the restricted set {RX, RY, RZ, CZ}.

    Rotations use ``target`` and ``angle``; CZ uses ``control`` and
    ``target`` (symmetric) and ignores ``angle``.
    """

    kind: str
    target: int
    control: Optional[int] = None
    angle: float = 0.0


@dataclass(frozen=True)
class PauliProduct:
    """A product of Pauli-Z operators over a non-empty set of qubits."""

    support: tuple

    def __post_init__(self):
        sup = tuple(sorted(set(int(q) for q in self.support)))
        if not sup:
            raise ValueError("PauliProduct support must be non-empty")
        if sup[0] < 0 or sup[-1] >= N_QUBITS:
            raise ValueError(f"PauliProduct support out of range: {sup}")
        object.__setattr__(self, "support", sup)

    @property
    def mask(self) -> int:
        m = 0
        for q in self.support:
            m |= 1 << q
        return m


@dataclass
class VqcParams:
    """Trainable circuit parameters: rotation angles plus output weights."""

    theta: np.ndarray          # shape (layers, qubits, 2)
    action_weights: np.ndarray  # shape (N_ACTIONS,)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.action_weights = np.asarray(self.action_weights, dtype=np.float64)
        if self.theta.shape != THETA_SHAPE:
            raise ValueError(f"theta shape {self.theta.shape} != {THETA_SHAPE}")
        if self.action_weights.shape != (N_ACTIONS,):
            raise ValueError(
                f"action_weights shape {self.action_weights.shape} != ({N_ACTIONS},)"
            )
        if not (np.isfinite(self.theta).all() and np.isfinite(self.action_weights).all()):
            raise ValueError("parameters must be finite")

    def copy(self) -> "VqcParams":
        return VqcParams(self.theta.copy(), self.action_weights.copy())


def init_params(rng: Optional[np.random.Generator] = None,
                scheme: str = "uniform",
                scale: float = 0.1) -> VqcParams:
    """Fresh parameters: uniform(-scale, scale) angles or all-zero angles.

    ``scheme="zero"`` keeps every rotation at zero, which leaves some
    observables insensitive to the input features; the uniform default
    breaks that symmetry.  Output weights start at 1.
    """
    if scheme == "zero":
        theta = np.zeros(THETA_SHAPE)
    elif scheme == "uniform":
        if rng is None:
            rng = np.random.default_rng()
        theta = rng.uniform(-scale, scale, size=THETA_SHAPE)
    else:
        raise ValueError(f"unknown init scheme {scheme!r}")
    return VqcParams(theta, np.ones(N_ACTIONS))


# ---------------------------------------------------------------------------
# statevector primitives
# ---------------------------------------------------------------------------

_PAIR_LO = tuple(
    np.array([b for b in range(DIM) if not (b >> q) & 1], dtype=np.intp)
    for q in range(N_QUBITS)
)

_CZ_IDX = {}
for _c in range(N_QUBITS):
    for _t in range(N_QUBITS):
        if _c != _t:
            _m = (1 << _c) | (1 << _t)
            _CZ_IDX[(_c, _t)] = np.array(
                [b for b in range(DIM) if b & _m == _m], dtype=np.intp
            )


def zero_state() -> np.ndarray:
    """|00000> as a length-32 complex vector."""
    state = np.zeros(DIM, dtype=np.complex128)
    state[0] = 1.0
    return state


def _validate_gate(gate: GateSpec) -> None:
    if gate.kind not in GATE_KINDS:
        raise GateError(f"unknown gate kind {gate.kind!r}")
    if not 0 <= gate.target < N_QUBITS:
        raise GateError(f"target qubit {gate.target} out of range [0, {N_QUBITS})")
    if gate.kind == "CZ":
        if gate.control is None:
            raise GateError("CZ requires a control qubit")
        if not 0 <= gate.control < N_QUBITS:
            raise GateError(f"control qubit {gate.control} out of range [0, {N_QUBITS})")
        if gate.control == gate.target:
            raise GateError("CZ control and target must differ")
    elif gate.control is not None:
        raise GateError(f"{gate.kind} takes no control qubit")


def apply_gate(state: np.ndarray, gate: GateSpec) -> np.ndarray:
    """Apply one gate and return the new statevector (norm preserving)."""
    _validate_gate(gate)
    out = np.array(state, dtype=np.complex128, copy=True)
    if gate.kind == "CZ":
        out[_CZ_IDX[(gate.control, gate.target)]] *= -1.0
        return out
    lo = _PAIR_LO[gate.target]
    hi = lo + (1 << gate.target)
    a0 = out[lo]
    a1 = out[hi]
    half = 0.5 * gate.angle
    if gate.kind == "RZ":
        phase = cmath.exp(-1j * half)
        out[lo] = phase * a0
        out[hi] = phase.conjugate() * a1
        return out
    c = math.cos(half)
    s = math.sin(half)
    if gate.kind == "RX":
        out[lo] = c * a0 - 1j * s * a1
        out[hi] = -1j * s * a0 + c * a1
    else:  # RY
        out[lo] = c * a0 - s * a1
        out[hi] = s * a0 + c * a1
    return out


def run_circuit(gates: Sequence[GateSpec],
                state: Optional[np.ndarray] = None) -> np.ndarray:
    """Run a gate list on |00000> (or a caller-supplied state)."""
    out = zero_state() if state is None else np.array(state, dtype=np.complex128)
    for gate in gates:
        out = apply_gate(out, gate)
    return out


def z_product_diagonal(obs: PauliProduct) -> np.ndarray:
    """Diagonal (+/-1 per basis state) of a Pauli-Z product."""
    mask = obs.mask
    return np.array(
        [-1.0 if bin(b & mask).count("1") % 2 else 1.0 for b in range(DIM)]
    )


def expectation(state: np.ndarray, obs: PauliProduct) -> float:
    """<state| Z-product |state>; lies in [-1, 1] for normalized states."""
    probs = state.real ** 2 + state.imag ** 2
    return float(np.dot(probs, z_product_diagonal(obs)))


# ---------------------------------------------------------------------------
# action observables: 15 low-weight Z-products, symmetric across the ring
# ---------------------------------------------------------------------------

def _ring_support(start: int, width: int) -> tuple:
    return tuple((start + j) % N_QUBITS for j in range(width))


ACTION_OBSERVABLES = tuple(
    [PauliProduct((q,)) for q in range(N_QUBITS)]
    + [PauliProduct(_ring_support(q, 2)) for q in range(N_QUBITS)]
    + [PauliProduct(_ring_support(q, 3)) for q in range(N_QUBITS)]
)

_OBS_DIAG = np.stack([z_product_diagonal(o) for o in ACTION_OBSERVABLES])  # (15, 32)


# ---------------------------------------------------------------------------
# circuit construction
# ---------------------------------------------------------------------------

def _validate_features(features: np.ndarray) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.shape != (N_QUBITS,):
        raise EncodingError(f"feature vector must have shape ({N_QUBITS},), got {f.shape}")
    if not np.isfinite(f).all() or (np.abs(f) > 1.0).any():
        raise EncodingError(f"features must lie in [-1, 1], got {f.tolist()}")
    return f


def build_circuit(params: VqcParams, features: np.ndarray) -> list:
    """Emit the 60-gate list for one forward evaluation.

    Per block: RX(pi*f_q) on q = 0..4, then RY/RZ variational rotations per
    qubit, then the CZ ring.  Qubit-ascending order inside each sublayer.
    """
    f = _validate_features(features)
    gates = []
    for layer in range(N_LAYERS):
        for q in range(N_QUBITS):
            gates.append(GateSpec("RX", q, angle=math.pi * f[q]))
        for q in range(N_QUBITS):
            gates.append(GateSpec("RY", q, angle=float(params.theta[layer, q, 0])))
            gates.append(GateSpec("RZ", q, angle=float(params.theta[layer, q, 1])))
        for c, t in RING_PAIRS:
            gates.append(GateSpec("CZ", t, control=c))
    return gates


# ---------------------------------------------------------------------------
# batched evaluation engine
#
# One program of 60 slots; rotation angles are looked up per batch row from a
# (B, 45) angle matrix, so parameter-shift evaluations of a whole minibatch
# run as a single vectorized pass.  The reference path above (build_circuit +
# apply_gate) stays the contract; tests pin both paths to each other.
# ---------------------------------------------------------------------------

N_ANGLE_SLOTS = 3 * (N_QUBITS + 2 * N_QUBITS)  # 45: 5 encoding + 10 variational per block


def _build_program():
    program = []
    slot = 0
    for _layer in range(N_LAYERS):
        for q in range(N_QUBITS):
            program.append(("RX", q, slot))
            slot += 1
        for q in range(N_QUBITS):
            program.append(("RY", q, slot))
            slot += 1
            program.append(("RZ", q, slot))
            slot += 1
        for c, t in RING_PAIRS:
            program.append(("CZ", (c, t), None))
    assert slot == N_ANGLE_SLOTS
    return tuple(program)


_PROGRAM = _build_program()

# slot index of encoding angle (layer, q) and of flattened theta entry k
_ENC_SLOT = np.array([[15 * layer + q for q in range(N_QUBITS)]
                      for layer in range(N_LAYERS)])
_THETA_SLOT = np.array([
    15 * layer + N_QUBITS + 2 * q + r
    for layer in range(N_LAYERS)
    for q in range(N_QUBITS)
    for r in range(2)
])


def _ring_cz_diagonal() -> np.ndarray:
    diag = np.ones(DIM)
    for pair in RING_PAIRS:
        diag[_CZ_IDX[pair]] *= -1.0
    return diag


_RING_CZ_DIAG = _ring_cz_diagonal()


def _angle_row(params: VqcParams, features: np.ndarray) -> np.ndarray:
    row = np.empty(N_ANGLE_SLOTS)
    for layer in range(N_LAYERS):
        base = 15 * layer
        row[base:base + N_QUBITS] = math.pi * features
        row[base + N_QUBITS:base + 15] = params.theta[layer].reshape(-1)
    return row


def _run_batch(angles: np.ndarray) -> np.ndarray:
    """Evolve |00000> under the fixed program for every row of ``angles``.

    Equivalent to the reference path (same unitary per layer) but fuses each
    qubit's RX/RY/RZ into one 2x2 application and the five ring CZs into one
    precomputed diagonal; single-qubit gates on distinct qubits commute, so
    the per-qubit regrouping is exact.
    """
    batch = angles.shape[0]
    states = np.zeros((batch, DIM), dtype=np.complex128)
    states[:, 0] = 1.0
    for layer in range(N_LAYERS):
        base = 15 * layer
        for q in range(N_QUBITS):
            ha = 0.5 * angles[:, base + q]                  # RX (encoding)
            hb = 0.5 * angles[:, base + N_QUBITS + 2 * q]   # RY
            hc = 0.5 * angles[:, base + N_QUBITS + 2 * q + 1]  # RZ
            ca, sa = np.cos(ha), np.sin(ha)
            cb, sb = np.cos(hb), np.sin(hb)
            # RY(b) @ RX(a)
            m00 = cb * ca + 1j * (sb * sa)
            m01 = -(sb * ca) - 1j * (cb * sa)
            m10 = sb * ca - 1j * (cb * sa)
            m11 = cb * ca - 1j * (sb * sa)
            # RZ(c) @ (RY @ RX): phase rows
            pz = np.exp(-1j * hc)
            m00 = (pz * m00)[:, None, None]
            m01 = (pz * m01)[:, None, None]
            pz = np.conj(pz)
            m10 = (pz * m10)[:, None, None]
            m11 = (pz * m11)[:, None, None]
            view = states.reshape(batch, DIM >> (q + 1), 2, 1 << q)
            a0 = view[:, :, 0, :]
            a1 = view[:, :, 1, :]
            new0 = m00 * a0
            new0 += m01 * a1
            new1 = m10 * a0
            new1 += m11 * a1
            view[:, :, 0, :] = new0
            view[:, :, 1, :] = new1
        states *= _RING_CZ_DIAG
    return states


def _batch_probs(states: np.ndarray) -> np.ndarray:
    return states.real ** 2 + states.imag ** 2


def q_values(params: VqcParams, features: np.ndarray) -> np.ndarray:
    """Q[a] = w_a * <Z-product_a> on the circuit output; length 15."""
    f = _validate_features(features)
    states = _run_batch(_angle_row(params, f)[None, :])
    exps = _batch_probs(states) @ _OBS_DIAG.T
    return params.action_weights * exps[0]


def q_values_batch(params: VqcParams, features: np.ndarray) -> np.ndarray:
    """Vectorized q_values over a (batch, 5) feature matrix."""
    feats = np.asarray(features, dtype=np.float64)
    rows = np.empty((feats.shape[0], N_ANGLE_SLOTS))
    for i, f in enumerate(feats):
        rows[i] = _angle_row(params, f)
    exps = _batch_probs(_run_batch(rows)) @ _OBS_DIAG.T
    return exps * params.action_weights[None, :]


def shift_bundle(params: VqcParams, features: np.ndarray, actions: np.ndarray):
    """Base expectations and parameter-shift Jacobians for a minibatch.

    Returns ``(base, jac)`` where ``base[i]`` is <O_{a_i}> at the unshifted
    angles and ``jac[i, k]`` is d<O_{a_i}>/d theta_k via the +/- pi/2 shift
    rule, for the flattened 30 rotation angles.
    """
    feats = np.asarray(features, dtype=np.float64)
    acts = np.asarray(actions, dtype=np.intp)
    m = feats.shape[0]
    variants = 1 + 2 * N_THETA
    rows = np.empty((m * variants, N_ANGLE_SLOTS))
    for i in range(m):
        rows[i * variants:(i + 1) * variants] = _angle_row(params, feats[i])
    offsets = np.arange(m) * variants
    for k in range(N_THETA):
        slot = _THETA_SLOT[k]
        rows[offsets + 1 + 2 * k, slot] += 0.5 * math.pi
        rows[offsets + 2 + 2 * k, slot] -= 0.5 * math.pi
    probs = _batch_probs(_run_batch(rows))
    diag = _OBS_DIAG[np.repeat(acts, variants)]
    exps = np.einsum("bi,bi->b", probs, diag).reshape(m, variants)
    base = exps[:, 0]
    shifted = exps[:, 1:].reshape(m, N_THETA, 2)
    jac = 0.5 * (shifted[:, :, 0] - shifted[:, :, 1])
    return base, jac


def parameter_shift_grad(params: VqcParams, features: np.ndarray, action: int):
    """Exact gradient of Q[action] w.r.t. every rotation angle and w_action.

    Returns ``(theta_grad, weight_grad)`` with ``theta_grad`` shaped like
    ``params.theta``.  Exact for this gate set (each angle enters through a
    single rotation), not a finite-difference approximation.
    """
    if not 0 <= int(action) < N_ACTIONS:
        raise ValueError(f"action index {action} out of range [0, {N_ACTIONS})")
    f = _validate_features(features)
    base, jac = shift_bundle(params, f[None, :], np.array([int(action)]))
    theta_grad = params.action_weights[int(action)] * jac[0].reshape(THETA_SHAPE)
    return theta_grad, float(base[0])


# ---------------------------------------------------------------------------
# checkpoint serialization
# ---------------------------------------------------------------------------

def save_vqc_params(params: VqcParams, path) -> None:
    """Write parameters as JSON; floats round-trip value-exactly."""
    doc = {
        "qubits": N_QUBITS,
        "layers": N_LAYERS,
        "theta": params.theta.tolist(),
        "action_weights": params.action_weights.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_vqc_params(path) -> VqcParams:
    """Load a checkpoint written by save_vqc_params, validating the layout."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    required = {"qubits", "layers", "theta", "action_weights"}
    if not isinstance(doc, dict) or set(doc) != required:
        raise CheckpointError(
            f"checkpoint {path} does not look like a circuit checkpoint "
            f"(fields {sorted(doc) if isinstance(doc, dict) else type(doc).__name__})"
        )
    if doc["qubits"] != N_QUBITS or doc["layers"] != N_LAYERS:
        raise CheckpointError(
            f"architecture mismatch: checkpoint has {doc['qubits']} qubits / "
            f"{doc['layers']} layers, expected {N_QUBITS}/{N_LAYERS}"
        )
    try:
        params = VqcParams(np.array(doc["theta"], dtype=np.float64),
                           np.array(doc["action_weights"], dtype=np.float64))
    except ValueError as exc:
        raise CheckpointError(f"invalid checkpoint contents: {exc}") from exc
    return params
