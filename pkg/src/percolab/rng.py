"""Counter-based random numbers.

Every edge uniform is a pure function of ``(stream key, sample index, edge
key)``, where the edge key hashes the two endpoint coordinates.  Consequences:

* a sample is reproducible from its global index alone, so work can be split
  into chunks and handed to any number of workers without changing results;
* the same edge receives the same uniform in every region that contains it,
  and the edge is open at ``p`` iff ``U < p``.  This gives the monotone
  coupling in ``p`` and in the domain for free.

Derivation: ``stream_key = H(seed, *labels)``; sample ``i`` of the stream uses
``sample_key = mix64(stream_key + (i + 1) * GOLDEN)``; the uniform of edge ``e``
is ``unit(mix64(mix64(sample_key ^ edge_key) + GOLDEN))``.  ``mix64`` is the
SplitMix64 finalizer.
"""
from __future__ import annotations

import hashlib

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_UNIT = 1.0 / 9007199254740992.0  # 2**-53

MASK64 = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finalizer on uint64 scalars or arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def _mix_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _label_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & MASK64
    digest = hashlib.blake2b(str(label).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_key(seed: int, *labels) -> int:
    """Stream key for ``seed`` refined by any number of int/str labels."""
    key = _mix_int(_label_int(seed) + 0x9E3779B97F4A7C15)
    for label in labels:
        key = _mix_int(key ^ _mix_int(_label_int(label) + 0x632BE59BD9B4E019))
    return key


def sample_keys(stream_key: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(stream_key) + idx * GOLDEN)


def uniforms(sample_key, edge_keys: np.ndarray) -> np.ndarray:
    """Edge uniforms, shape ``broadcast(sample_key, edge_keys)``."""
    sk = np.asarray(sample_key, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = mix64(mix64(sk ^ edge_keys) + GOLDEN)
    return (h >> _S11).astype(np.float64) * _UNIT


def vertex_keys(coords: np.ndarray) -> np.ndarray:
    """Hash integer coordinates (shape ``(n, d)``) to uint64 keys."""
    coords = np.asarray(coords, dtype=np.int64)
    h = np.full(coords.shape[0], 0x243F6A8885A308D3, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(coords.shape[1]):
            h = mix64(h ^ (coords[:, j].astype(np.uint64) + GOLDEN))
    return h


def edge_keys_from_coords(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Region-independent edge keys; ``a`` must be the smaller endpoint."""
    with np.errstate(over="ignore"):
        return mix64(vertex_keys(a) * _M1 ^ mix64(vertex_keys(b)))


class CounterRNG:
    """A seeded stream handing out consecutive sample keys.

    ``child(*labels)`` derives an independent stream, e.g. per worker or per
    replica.  Two streams built from the same seed and labels are identical.
    """

    def __init__(self, seed: int = 0, *labels):
        self.seed = int(seed)
        self.labels = labels
        self.key = derive_key(self.seed, *labels)
        self.counter = 0

    def child(self, *labels) -> "CounterRNG":
        return CounterRNG(self.seed, *self.labels, *labels)

    def next_keys(self, count: int) -> np.ndarray:
        keys = sample_keys(self.key, self.counter, count)
        self.counter += count
        return keys

    def next_key(self) -> np.uint64:
        return self.next_keys(1)[0]

    def __repr__(self):
        return f"CounterRNG(seed={self.seed}, labels={self.labels!r}, counter={self.counter})"
