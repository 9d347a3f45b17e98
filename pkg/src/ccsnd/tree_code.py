"""Outer tree code: sub-block partition with random parity bits, and the
path-pruning tree decoder that stitches per-slot candidate lists back into
full messages."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class TreeCodeParams:
    """Shape of the outer code.

    ``l[i]`` parity bits are appended to the ``J - l[i]`` message bits of
    sub-block ``i``; sub-block 0 never carries parity.
    """

    n: int
    J: int
    l: tuple[int, ...]
    B: int

    def __post_init__(self):
        object.__setattr__(self, "l", tuple(int(v) for v in self.l))
        self.validate()

    def validate(self):
        if self.n < 1 or self.J < 1:
            raise ConfigError("tree", f"n and J must be positive (n={self.n}, J={self.J})")
        if len(self.l) != self.n:
            raise ConfigError("tree.l", f"expected {self.n} entries, got {len(self.l)}")
        if self.l[0] != 0:
            raise ConfigError("tree.l", "sub-block 0 cannot carry parity bits (l[0] must be 0)")
        if any(v < 0 or v > self.J for v in self.l):
            raise ConfigError("tree.l", f"entries must lie in [0, J={self.J}]")
        if sum(self.m) != self.B:
            raise ConfigError(
                "tree.B", f"message bits per sub-block sum to {sum(self.m)}, not B={self.B}"
            )

    @property
    def m(self) -> tuple[int, ...]:
        return tuple(self.J - v for v in self.l)

    @property
    def M(self) -> int:
        return self.n * self.J

    def prefix_bits(self, i: int) -> int:
        """Number of message bits carried by sub-blocks ``0..i-1``."""
        return sum(self.m[:i])


@dataclass(frozen=True, eq=False)
class ParityGenerators:
    # matrices[i] has shape (l[i], prefix_bits(i)); empty placeholder where l[i] == 0
    matrices: tuple[np.ndarray, ...]
    seed: int

    def __getitem__(self, i):
        return self.matrices[i]

    def __len__(self):
        return len(self.matrices)

    @property
    def active_stages(self) -> list[int]:
        return [i for i, g in enumerate(self.matrices) if g.shape[0] > 0]


@dataclass(frozen=True, eq=False)
class SlotCandidateList:
    slot: int
    values: np.ndarray
    delays: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "delays", np.asarray(self.delays, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=np.complex128).reshape(-1))
        if not (len(self.values) == len(self.delays) == len(self.coeffs)):
            raise ValueError("values, delays and coeffs must have equal length")

    def __len__(self):
        return len(self.values)

    def entries(self):
        return list(zip(self.values.tolist(), self.delays.tolist(), self.coeffs.tolist()))


@dataclass(frozen=True)
class FadePruneConfig:
    enabled: bool = False
    rel_tolerance: float = 0.5
    check_delay: bool = False
    # roots with several surviving paths keep the most fade-consistent one
    # instead of failing
    tie_break: bool = False

    def __post_init__(self):
        if self.enabled and not self.rel_tolerance > 0:
            raise ConfigError("tree.fade_rel_tolerance", "must be positive when fade pruning is enabled")


DEFAULT_MAX_PATHS = 2**14


def parity_stream_bits(seed: int, stage: int, count: int) -> np.ndarray:
    """First ``count`` bits of the parity stream for one stage.

    Raw 64-bit PCG64 words seeded from ``(seed, stage)``, consumed
    least-significant bit first.
    """
    bitgen = np.random.PCG64(np.random.SeedSequence([seed & (2**64 - 1), stage]))
    words = bitgen.random_raw((count + 63) // 64)
    words = np.asarray(words, dtype="<u8")
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")
    return bits[:count]


def derive_parity_generators(params: TreeCodeParams, seed: int) -> ParityGenerators:
    params.validate()
    mats = []
    for i in range(params.n):
        rows, cols = params.l[i], params.prefix_bits(i)
        if i == 0 or rows == 0:
            mats.append(np.zeros((0, cols), dtype=np.uint8))
            continue
        bits = parity_stream_bits(seed, i, rows * cols)
        mats.append(bits.reshape(rows, cols).astype(np.uint8))
    return ParityGenerators(tuple(mats), int(seed))


def bits_to_int(bits) -> int:
    """MSB-first bit vector to integer."""
    out = 0
    for b in np.asarray(bits, dtype=np.int64).reshape(-1):
        out = (out << 1) | int(b & 1)
    return out


def int_to_bits(value: int, width: int) -> np.ndarray:
    value = int(value)
    return np.array([(value >> (width - 1 - k)) & 1 for k in range(width)], dtype=np.uint8)


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    """MSB-first packing of each row of a 0/1 matrix into int64."""
    width = bits.shape[-1]
    if width == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    weights = np.left_shift(np.int64(1), np.arange(width - 1, -1, -1, dtype=np.int64))
    return bits.astype(np.int64) @ weights


def _unpack_rows(values: np.ndarray, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def tree_encode(message, params: TreeCodeParams, gens: ParityGenerators) -> np.ndarray:
    """Encode one message (length-B bit vector) or a batch (rows of B bits).

    Returns the J-bit sub-block values: shape ``(n,)`` or ``(batch, n)``.
    Each sub-block holds its message bits in the high positions followed
    by its parity bits.
    """
    msg = np.asarray(message)
    single = msg.ndim == 1
    msg = np.atleast_2d(msg).astype(np.uint8)
    if msg.shape[1] != params.B:
        raise ValueError(f"message must have exactly B={params.B} bits, got {msg.shape[1]}")
    if np.any(msg > 1):
        raise ValueError("message bits must be 0 or 1")

    out = np.zeros((msg.shape[0], params.n), dtype=np.int64)
    start = 0
    for i in range(params.n):
        mi, li = params.m[i], params.l[i]
        chunk = msg[:, start : start + mi]
        if li:
            parity = (msg[:, :start].astype(np.int64) @ gens[i].T.astype(np.int64)) % 2
            chunk = np.concatenate([chunk, parity.astype(np.uint8)], axis=1)
        out[:, i] = _pack_rows(chunk)
        start += mi
    return out[0] if single else out


def extract_message(path, params: TreeCodeParams) -> np.ndarray:
    """Recover the B message bits carried by a full (or partial) path."""
    parts = [_unpack_rows(int(v), params.J)[: params.m[i]] for i, v in enumerate(path)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)


def check_parity(partial_path, stage: int, params: TreeCodeParams, gens: ParityGenerators) -> bool:
    li = params.l[stage]
    if li == 0:
        return True
    prefix = extract_message(list(partial_path)[:stage], params)
    expected = (gens[stage].astype(np.int64) @ prefix.astype(np.int64)) % 2
    got = int(partial_path[stage]) & ((1 << li) - 1)
    return got == bits_to_int(expected)


def _fade_score(mag_sum, mag_sq_sum, count):
    # coefficient of variation of path magnitudes; ranking key for frontier truncation
    mean = mag_sum / count
    var = np.maximum(mag_sq_sum / count - mean**2, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cv = np.sqrt(var) / mean
    return np.where(mean > 0, cv, np.inf)


def tree_decode(
    lists,
    params: TreeCodeParams,
    gens: ParityGenerators,
    fade_cfg: FadePruneConfig | None = None,
    max_paths: int | None = DEFAULT_MAX_PATHS,
    return_paths: bool = False,
):
    """Stitch per-slot candidates into messages.

    Every stage-0 candidate roots a tree; paths are extended slot by slot
    and pruned by parity and (optionally) fade/delay consistency. A root
    contributes a message only when exactly one full path survives.

    Returns a dict ``{message_int: mean complex coefficient}``. With
    ``return_paths`` the surviving full paths (as candidate index tuples
    per root) are returned as a second value.
    """
    fade_cfg = fade_cfg or FadePruneConfig()
    if len(lists) != params.n:
        raise ValueError(f"need {params.n} candidate lists, got {len(lists)}")
    if max_paths is None:
        max_paths = np.iinfo(np.int64).max

    first = lists[0]
    n_roots = len(first)
    if n_roots == 0:
        return ({}, {}) if return_paths else {}

    # frontier: one row per partial path
    root = np.arange(n_roots, dtype=np.int64)
    choice = np.arange(n_roots, dtype=np.int64)[:, None]
    msg_bits = _unpack_rows(first.values, params.J)[:, : params.m[0]]
    mags = np.abs(first.coeffs)
    mag_sum = mags.copy()
    mag_sq = mags**2
    coeff_sum = first.coeffs.copy()
    delay = first.delays.copy()

    for i in range(1, params.n):
        cand = lists[i]
        k = len(cand)
        if k == 0 or len(root) == 0:
            root = root[:0]
            choice = np.zeros((0, i + 1), dtype=np.int64)
            break
        li, mi = params.l[i], params.m[i]
        ok = np.ones((len(root), k), dtype=bool)
        if li:
            expected = (msg_bits.astype(np.int64) @ gens[i].T.astype(np.int64)) % 2
            ok &= _pack_rows(expected)[:, None] == (cand.values & ((1 << li) - 1))[None, :]
        cand_mag = np.abs(cand.coeffs)
        if fade_cfg.enabled:
            mean = mag_sum / i
            ok &= np.abs(cand_mag[None, :] - mean[:, None]) <= fade_cfg.rel_tolerance * mean[:, None]
        if fade_cfg.check_delay:
            ok &= delay[:, None] == cand.delays[None, :]

        p_idx, c_idx = np.nonzero(ok)
        root = root[p_idx]
        choice = np.concatenate([choice[p_idx], c_idx[:, None]], axis=1)
        new_bits = _unpack_rows(cand.values[c_idx], params.J)[:, :mi]
        msg_bits = np.concatenate([msg_bits[p_idx], new_bits], axis=1)
        mag_sum = mag_sum[p_idx] + cand_mag[c_idx]
        mag_sq = mag_sq[p_idx] + cand_mag[c_idx] ** 2
        coeff_sum = coeff_sum[p_idx] + cand.coeffs[c_idx]
        delay = delay[p_idx]

        counts = np.bincount(root, minlength=n_roots)
        if counts.max(initial=0) > max_paths:
            score = _fade_score(mag_sum, mag_sq, i + 1)
            order = np.lexsort((np.arange(len(root)), score, root))
            sorted_root = root[order]
            group_start = np.searchsorted(sorted_root, sorted_root, side="left")
            rank = np.arange(len(order)) - group_start
            keep = np.sort(order[rank < max_paths])
            root, choice, msg_bits = root[keep], choice[keep], msg_bits[keep]
            mag_sum, mag_sq, coeff_sum, delay = mag_sum[keep], mag_sq[keep], coeff_sum[keep], delay[keep]

    counts = np.bincount(root, minlength=n_roots)
    if fade_cfg.tie_break and len(root):
        score = _fade_score(mag_sum, mag_sq, params.n)
        order = np.lexsort((np.arange(len(root)), score, root))
        first_of_root = np.r_[True, root[order][1:] != root[order][:-1]]
        winners = np.sort(order[first_of_root])
    else:
        winners = np.flatnonzero(counts[root] == 1)
    decoded: dict[int, complex] = {}
    for row in winners:
        message = bits_to_int(msg_bits[row])
        decoded.setdefault(message, complex(coeff_sum[row] / params.n))
    if return_paths:
        paths: dict[int, list[tuple[int, ...]]] = {}
        for r, path in zip(root.tolist(), choice.tolist()):
            paths.setdefault(r, []).append(tuple(path))
        return decoded, paths
    return decoded
