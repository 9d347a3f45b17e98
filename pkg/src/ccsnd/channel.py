"""Active-device sampling, fading models, delays and frame synthesis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import Codebook
from .errors import ConfigError


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class FadingModelI:
    """|h| uniform on [h_lower, 2 h_lower], uniform phase."""

    h_lower: float = 1.0
    snr_linear: float = 1.0

    def __post_init__(self):
        if self.h_lower <= 0:
            raise ConfigError("channel.h_lower", "must be positive")
        if self.snr_linear <= 0:
            raise ConfigError("sweep.snr_db", "linear SNR must be positive")

    @property
    def power(self) -> float:
        return 2.0 * self.snr_linear / self.h_lower**2

    def sample(self, rng, size=None):
        return sample_fading_I(self, rng, size)


@dataclass(frozen=True)
class FadingModelII:
    """Pareto power gain |h|^2 with scale ``eta`` and shape ``alpha``."""

    eta: float = 0.05
    alpha: float = 2.0
    snr_linear: float = 1.0

    def __post_init__(self):
        if self.eta <= 0:
            raise ConfigError("channel.eta", "must be positive")
        if not self.alpha > 1:
            raise ConfigError("channel.alpha", "shape must exceed 1 (the mean gain diverges otherwise)")
        if self.snr_linear <= 0:
            raise ConfigError("sweep.snr_db", "linear SNR must be positive")

    @property
    def power(self) -> float:
        return 2.0 * self.snr_linear / self.eta

    def sample(self, rng, size=None):
        return sample_fading_II(self, rng, size)


@dataclass(frozen=True)
class DeviceRealization:
    identity: int
    h: complex
    tau: int


@dataclass(frozen=True, eq=False)
class ReceivedFrame:
    y: np.ndarray
    n: int
    slot_len: int

    def slot(self, i: int) -> np.ndarray:
        return self.y[i * self.slot_len : (i + 1) * self.slot_len]

    def slots(self) -> np.ndarray:
        """All slot views as columns, shape ``(slot_len, n)``."""
        return self.y.reshape(self.n, self.slot_len).T


def sample_active_set(K: int, B: int, seed) -> list[int]:
    if K < 0:
        raise ValueError("K must be non-negative")
    if K > 2**B:
        raise ValueError(f"cannot draw {K} distinct identities from 2^{B}")
    rng = _rng(seed)
    if K == 0:
        return []
    space = 2**B
    if space <= 2**20:
        picks = rng.choice(space, size=K, replace=False)
        return [int(v) for v in picks]
    # sparse draw: rejection on collisions, order of first appearance kept
    out: list[int] = []
    seen: set[int] = set()
    while len(out) < K:
        for v in rng.integers(0, space, size=K - len(out), dtype=np.int64).tolist():
            if v not in seen:
                seen.add(v)
                out.append(v)
    return out


def _uniform_phase(rng, size):
    return np.exp(2j * np.pi * rng.random(size))


def sample_fading_I(model: FadingModelI, seed, size=None):
    rng = _rng(seed)
    mag = model.h_lower * (1.0 + rng.random(size))
    h = mag * _uniform_phase(rng, size)
    return complex(h) if size is None else h


def sample_fading_II(model: FadingModelII, seed, size=None):
    rng = _rng(seed)
    # u in (0, 1]
    u = 1.0 - rng.random(size)
    gain = model.eta * u ** (-1.0 / model.alpha)
    h = np.sqrt(gain) * _uniform_phase(rng, size)
    return complex(h) if size is None else h


def sample_delays(K: int, T: int, seed) -> np.ndarray:
    return _rng(seed).integers(0, T + 1, size=K)


def device_frame(coded_block, codebook: Codebook) -> np.ndarray:
    """Concatenated zero-padded codewords for one device's sub-blocks."""
    cols = np.asarray(coded_block, dtype=np.int64)
    x = np.zeros((len(cols), codebook.slot_len), dtype=np.complex128)
    x[:, : codebook.n_rows] = codebook.matrix[:, cols].T
    return x.reshape(-1)


def complex_noise(rng, size) -> np.ndarray:
    """Circularly-symmetric complex Gaussian, unit total variance."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def synthesize_frame(
    devices,
    coded_blocks,
    codebook: Codebook | list[Codebook],
    power: float,
    noise_on: bool = True,
    seed=None,
    n: int | None = None,
) -> ReceivedFrame:
    """Received frame: sum of delayed, faded device frames plus AWGN.

    ``codebook`` may be a single shared codebook or one per slot.
    """
    books = codebook if isinstance(codebook, (list, tuple)) else None
    ref = books[0] if books else codebook
    if n is None:
        if len(coded_blocks):
            n = len(coded_blocks[0])
        elif books:
            n = len(books)
        else:
            raise ValueError("number of slots unknown: pass n when there are no devices")
    slot_len = ref.slot_len
    N = n * slot_len
    y = np.zeros(N, dtype=np.complex128)
    amp = np.sqrt(power)
    for dev, block in zip(devices, coded_blocks):
        if not 0 <= dev.tau <= ref.T:
            raise ValueError(f"delay {dev.tau} outside [0, T={ref.T}]")
        if len(block) != n:
            raise ValueError(f"coded block has {len(block)} sub-blocks, expected {n}")
        if books:
            x = np.concatenate([_padded(books[i], v) for i, v in enumerate(block)])
        else:
            x = device_frame(block, ref)
        # symbols shifted past the frame end are dropped
        y[dev.tau :] += amp * dev.h * x[: N - dev.tau]
    if noise_on:
        y += complex_noise(_rng(seed), N)
    return ReceivedFrame(y=y, n=n, slot_len=slot_len)


def _padded(cb: Codebook, j) -> np.ndarray:
    out = np.zeros(cb.slot_len, dtype=np.complex128)
    out[: cb.n_rows] = cb.matrix[:, int(j)]
    return out
