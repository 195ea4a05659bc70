"""Deterministic seed derivation.

Every random draw in the package comes from a counter-based substream keyed
by integer tags (run seed, purpose tag, step, entity ids).  Streams are
independent of evaluation order, so re-running any component with the same
seed reproduces results bit for bit, and adding consumers never perturbs
existing ones.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_SEED_INIT = 0x243F6A8885A308D3  # pi fractional bits, arbitrary non-zero start

# Purpose tags for substreams.
TAG_ENV = 1      # per-episode environment seed
TAG_INIT = 2     # Q-function parameter initialisation
TAG_EXPLORE = 3  # epsilon-greedy draws
TAG_REPLAY = 4   # minibatch sampling
TAG_SPAWN = 5    # vehicle placement and initial speeds
TAG_LINK = 6     # per-step, per-link radio randomness
TAG_WRAP = 7     # speed resampling at ring wrap-around


def _mix(z: int) -> int:
    # splitmix64 finalizer
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def fold64(*parts: int) -> int:
    """Fold integers into one 64-bit value (splitmix64 absorption).

    Stable across processes and platforms; used for sweep child seeds
    (child = fold64(base_seed, value_index, rep_index)) and all substream
    keys.
    """
    acc = _SEED_INIT
    for p in parts:
        acc = _mix((acc + (int(p) & _MASK64)) & _MASK64)
    return acc


def substream(*parts: int) -> np.random.Generator:
    """Independent generator keyed by the given integers."""
    return np.random.Generator(np.random.Philox(key=fold64(*parts)))
