"""Random partial-DFT codebook, zero padding and the delay-shifted dictionary.

The dictionary is applied through FFTs; ``dense()`` materializes it when a
matrix is needed (tests, small problems).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class Codebook:
    J: int
    slot_len: int  # symbols per slot (N / n)
    T: int
    rows: np.ndarray
    scale: float

    @property
    def width(self) -> int:
        return 2**self.J

    @property
    def n_rows(self) -> int:
        return self.slot_len - self.T

    @cached_property
    def matrix(self) -> np.ndarray:
        cols = np.arange(self.width)
        return self.scale * np.exp(-2j * np.pi * np.outer(self.rows, cols) / self.width)

    def column(self, j: int) -> np.ndarray:
        if not 0 <= j < self.width:
            raise IndexError(f"column {j} outside [0, {self.width})")
        return self.scale * np.exp(-2j * np.pi * self.rows * j / self.width)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """``S @ X`` along axis 0."""
        return self.scale * np.fft.fft(X, axis=0)[self.rows]

    def apply_adjoint(self, V: np.ndarray) -> np.ndarray:
        """``S^H @ V`` along axis 0."""
        Z = np.zeros((self.width,) + V.shape[1:], dtype=np.complex128)
        Z[self.rows] = V
        return (self.scale * self.width) * np.fft.ifft(Z, axis=0)


def build_codebook(J: int, slot_len: int, T: int, seed: int) -> Codebook:
    if T < 0:
        raise ConfigError("codebook.T", "maximum delay must be non-negative")
    if slot_len <= T:
        raise ConfigError("codebook", f"slot length {slot_len} must exceed maximum delay T={T}")
    n_rows = slot_len - T
    if n_rows > 2**J:
        raise ConfigError("codebook", f"{n_rows} rows requested from a {2**J}-point DFT")
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), 0xC0DE]))
    rows = np.sort(rng.choice(2**J, size=n_rows, replace=False)).astype(np.int64)
    rows.setflags(write=False)
    # each zero-padded column carries energy slot_len
    scale = float(np.sqrt(slot_len / n_rows))
    return Codebook(J=J, slot_len=slot_len, T=T, rows=rows, scale=scale)


def zero_pad(codebook: Codebook, j: int) -> np.ndarray:
    out = np.zeros(codebook.slot_len, dtype=np.complex128)
    out[: codebook.n_rows] = codebook.column(j)
    return out


class ShiftedDictionary:
    """All delayed copies of every zero-padded codeword.

    Flat column ``j * (T + 1) + tau`` is codeword ``j`` delayed by ``tau``
    symbols. Vectors may carry trailing batch dimensions.
    """

    def __init__(self, codebook: Codebook):
        self.codebook = codebook
        self.T = codebook.T
        self.n_shifts = codebook.T + 1
        self.shape = (codebook.slot_len, codebook.width * self.n_shifts)

    @property
    def width(self) -> int:
        return self.shape[1]

    def flat_index(self, j, tau):
        return np.asarray(j) * self.n_shifts + np.asarray(tau)

    def unflatten(self, idx):
        idx = np.asarray(idx)
        return idx // self.n_shifts, idx % self.n_shifts

    def column(self, j: int, tau: int) -> np.ndarray:
        if not 0 <= tau <= self.T:
            raise IndexError(f"delay {tau} outside [0, {self.T}]")
        out = np.zeros(self.shape[0], dtype=np.complex128)
        out[tau : tau + self.codebook.n_rows] = self.codebook.column(j)
        return out

    # Native layout: coefficients as (batch, T + 1, 2^J), observations as
    # (batch, slot_len). FFTs then run along the contiguous last axis.

    def to_native(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        b = x.shape[1] if x.ndim == 2 else 1
        X = x.reshape(self.codebook.width, self.n_shifts, b)
        return np.ascontiguousarray(X.transpose(2, 1, 0))

    def from_native(self, X: np.ndarray, single: bool = False) -> np.ndarray:
        x = X.transpose(2, 1, 0).reshape(self.width, X.shape[0])
        return x[:, 0].copy() if single else np.ascontiguousarray(x)

    def forward_native(self, X: np.ndarray) -> np.ndarray:
        """``X`` is (b, n_shifts, 2^J); returns (b, slot_len) in the dtype of ``X``."""
        cb = self.codebook
        U = np.fft.fft(X, axis=-1)[..., cb.rows]  # (b, n_shifts, n_rows)
        if self.T == 0:
            U = U[:, 0]
            U *= cb.scale
            return U
        out = np.zeros((X.shape[0], cb.slot_len), dtype=U.dtype)
        for tau in range(self.n_shifts):
            out[:, tau : tau + cb.n_rows] += U[:, tau]
        out *= cb.scale
        return out

    def forward_sparse(self, flat_idx: np.ndarray, values: np.ndarray, batch: int) -> np.ndarray:
        """``forward_native`` of the native array whose only nonzeros are ``values`` at ``flat_idx``.

        Cheaper than the FFT while only a few hundred coefficients are active.
        """
        cb = self.codebook
        bi, rem = np.divmod(np.asarray(flat_idx, dtype=np.int64), self.n_shifts * cb.width)
        tau, j = np.divmod(rem, cb.width)
        contrib = self._columns_t[j] * np.asarray(values)[:, None]  # (nnz, n_rows)
        target = ((bi * cb.slot_len + tau)[:, None] + np.arange(cb.n_rows)[None, :]).ravel()
        size = batch * cb.slot_len
        out = np.empty(size, dtype=np.complex128)
        out.real = np.bincount(target, contrib.real.ravel(), minlength=size)
        out.imag = np.bincount(target, contrib.imag.ravel(), minlength=size)
        return out.reshape(batch, cb.slot_len)

    @cached_property
    def _columns_t(self) -> np.ndarray:
        return np.ascontiguousarray(self.codebook.matrix.T)

    def adjoint_native(self, Yt: np.ndarray, buf: np.ndarray | None = None) -> np.ndarray:
        """``buf`` is scratch of shape (b, n_shifts, 2^J), zero off ``rows``."""
        cb = self.codebook
        if buf is None:
            buf = np.zeros((Yt.shape[0], self.n_shifts, cb.width), dtype=np.complex128)
        Yt = np.ascontiguousarray(Yt, dtype=np.complex128)
        G = self.adjoint_unscaled(Yt, buf)
        G *= self.adjoint_gain
        return G

    @property
    def adjoint_gain(self) -> float:
        return self.codebook.scale * self.codebook.width

    def adjoint_unscaled(self, Yt: np.ndarray, buf: np.ndarray) -> np.ndarray:
        """``adjoint_native`` divided by ``adjoint_gain`` (saves a pass over the output)."""
        b = Yt.shape[0]
        dst, src = self._gather_index(b)
        buf.reshape(-1)[dst] = Yt.reshape(-1)[src]
        return np.fft.ifft(buf, axis=-1)

    def _gather_index(self, b: int):
        """Flat (destination, source) indices placing observation windows on the DFT rows."""
        cache = self.__dict__.setdefault("_gather_cache", {})
        if b not in cache:
            cb = self.codebook
            bi = np.arange(b)[:, None, None]
            tau = np.arange(self.n_shifts)[None, :, None]
            dst = (bi * self.n_shifts + tau) * cb.width + cb.rows[None, None, :]
            src = bi * cb.slot_len + tau + np.arange(cb.n_rows)[None, None, :]
            cache[b] = (dst.ravel(), src.ravel())
        return cache[b]

    @cached_property
    def _window_index(self) -> np.ndarray:
        # window[tau, r] = tau + r
        return np.arange(self.n_shifts)[:, None] + np.arange(self.codebook.n_rows)[None, :]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        out = self.forward_native(self.to_native(x))  # (b, slot_len)
        return out[0] if x.ndim == 1 else out.T.copy()

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.complex128)
        Yt = y[None, :] if y.ndim == 1 else y.T
        return self.from_native(self.adjoint_native(np.ascontiguousarray(Yt)), single=y.ndim == 1)

    def columns(self, idx) -> np.ndarray:
        j, tau = self.unflatten(np.asarray(idx, dtype=np.int64))
        out = np.zeros((self.shape[0], len(j)), dtype=np.complex128)
        base = self.codebook.scale * np.exp(
            -2j * np.pi * np.outer(self.codebook.rows, j) / self.codebook.width
        )
        for c, t in enumerate(tau.tolist()):
            out[t : t + self.codebook.n_rows, c] = base[:, c]
        return out

    def dense(self) -> np.ndarray:
        return self.columns(np.arange(self.width))

    @property
    def column_energy(self) -> float:
        """Squared norm of every dictionary column (equals ``slot_len``)."""
        return self.codebook.scale**2 * self.codebook.n_rows

    @cached_property
    def lipschitz(self) -> float:
        """Squared spectral norm of the dictionary.

        Distinct DFT rows make ``S S^H = scale^2 2^J I``, so ``S~ S~^H`` is
        diagonal with entry ``scale^2 2^J`` times the number of delays that
        cover each symbol.
        """
        cb = self.codebook
        return cb.scale**2 * cb.width * min(self.n_shifts, cb.n_rows)


def build_shifted_dictionary(codebook: Codebook) -> ShiftedDictionary:
    return ShiftedDictionary(codebook)
