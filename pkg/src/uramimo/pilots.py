"""Pilot codebooks mapping J-bit message prefixes to length-n_p sequences.

A codebook holds N = 2**n_bits pilots, one per prefix, each with squared
norm exactly n_p. Two constructions are provided:

* ``dft``: rows of the N-point DFT matrix, subsampled at random, with a
  random unit-modulus scramble per column. The matrix is never
  materialized; forward and adjoint products run through the FFT.
* ``gaussian``: i.i.d. circular Gaussian entries, columns rescaled to
  norm sqrt(n_p). Dense, intended for small oracle setups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def bits_to_index(bits: np.ndarray) -> int:
    """Big-endian prefix bits -> pilot index (bits[0] is the MSB)."""
    out = 0
    for b in np.asarray(bits).astype(int):
        out = (out << 1) | (b & 1)
    return out


def index_to_bits(index: int, n_bits: int) -> np.ndarray:
    """Inverse of :func:`bits_to_index`, zero-padded to n_bits."""
    if not 0 <= index < (1 << n_bits):
        raise ValueError(f"index {index} out of range for {n_bits} bits")
    return np.array([(index >> (n_bits - 1 - t)) & 1 for t in range(n_bits)],
                    dtype=np.uint8)


@dataclass
class PilotCodebook:
    """Handle for the pilot matrix A (n_p x N) with fast products.

    Attributes:
        kind: "dft" or "gaussian".
        n_p: pilot length (rows of A).
        n_bits: prefix length; the codebook holds N = 2**n_bits columns.
        seed: draw seed; the same seed reproduces the same matrix.
    """

    kind: str
    n_p: int
    n_bits: int
    seed: int
    _rows: np.ndarray = field(init=False, repr=False)
    _scramble: np.ndarray = field(init=False, repr=False)
    _dense: np.ndarray | None = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        if self.kind not in ("dft", "gaussian"):
            raise ValueError(f"unknown pilot kind {self.kind!r}")
        if self.n_p > self.size and self.kind == "dft":
            raise ValueError("dft codebook needs n_p <= N distinct rows")
        rng = np.random.default_rng(self.seed)
        if self.kind == "dft":
            self._rows = np.sort(rng.choice(self.size, size=self.n_p,
                                            replace=False))
            self._scramble = np.exp(2j * np.pi * rng.random(self.size))
        else:
            g = rng.standard_normal((self.n_p, self.size)) \
                + 1j * rng.standard_normal((self.n_p, self.size))
            g *= np.sqrt(self.n_p) / np.linalg.norm(g, axis=0, keepdims=True)
            self._dense = g
            self._rows = np.arange(self.n_p)
            self._scramble = np.ones(self.size)

    @property
    def rows(self) -> np.ndarray:
        """Selected DFT row indices (all of them for the gaussian kind)."""
        return self._rows

    @property
    def size(self) -> int:
        """Number of pilots N."""
        return 1 << self.n_bits

    def apply(self, x: np.ndarray) -> np.ndarray:
        """A @ x for x of shape (N,) or (N, M)."""
        if self.kind == "gaussian":
            return self._dense @ x
        y = np.fft.fft(self._scramble.reshape(-1, *([1] * (x.ndim - 1))) * x,
                       axis=0)
        return y[self._rows]

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """A^H @ y for y of shape (n_p,) or (n_p, M)."""
        if self.kind == "gaussian":
            return self._dense.conj().T @ y
        full = np.zeros((self.size,) + y.shape[1:], dtype=complex)
        full[self._rows] = y
        x = self.size * np.fft.ifft(full, axis=0)
        return self._scramble.conj().reshape(-1, *([1] * (y.ndim - 1))) * x

    def column(self, index: int) -> np.ndarray:
        """Dense pilot a_index, shape (n_p,)."""
        return self.columns(np.array([index]))[:, 0]

    def columns(self, indices: np.ndarray) -> np.ndarray:
        """Dense submatrix A[:, indices], shape (n_p, len(indices))."""
        indices = np.asarray(indices, dtype=np.int64)
        if self.kind == "gaussian":
            return self._dense[:, indices]
        phase = np.exp(-2j * np.pi * np.outer(self._rows, indices) / self.size)
        return phase * self._scramble[indices]

    def dense(self) -> np.ndarray:
        """Full matrix; only sensible for small N."""
        return self.columns(np.arange(self.size))


def build_pilots(kind: str, n_p: int, n_bits: int, seed: int) -> PilotCodebook:
    return PilotCodebook(kind=kind, n_p=n_p, n_bits=n_bits, seed=seed)
