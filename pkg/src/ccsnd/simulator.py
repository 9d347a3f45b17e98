"""End-to-end Monte Carlo: encode, transmit, decode, and score trials."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import (
    DeviceRealization,
    FadingModelI,
    FadingModelII,
    sample_active_set,
    sample_delays,
    synthesize_frame,
)
from .codebook import Codebook, ShiftedDictionary, build_codebook
from .config import ExperimentConfig
from .cs_decoder import decode_slot, decode_slots
from .tree_code import ParityGenerators, derive_parity_generators, int_to_bits, tree_decode, tree_encode

NOISE_STD = 1.0


@dataclass(frozen=True, eq=False)
class System:
    """Everything fixed for a whole experiment: parity matrices and codebooks."""

    gens: ParityGenerators
    codebooks: tuple[Codebook, ...]
    dictionaries: tuple[ShiftedDictionary, ...]

    @property
    def shared(self) -> bool:
        return len(self.codebooks) == 1


@lru_cache(maxsize=8)
def build_system(cfg: ExperimentConfig) -> System:
    ss = np.random.SeedSequence([cfg.seed & (2**64 - 1), 0x5EED])
    parity_seed, book_seed = (int(s.generate_state(1, np.uint64)[0]) for s in ss.spawn(2))
    gens = derive_parity_generators(cfg.tree, parity_seed)
    n_books = cfg.tree.n if cfg.per_slot_rows else 1
    books = tuple(build_codebook(cfg.tree.J, cfg.slot_len, cfg.T, book_seed + i) for i in range(n_books))
    return System(gens, books, tuple(ShiftedDictionary(b) for b in books))


def fading_model(cfg: ExperimentConfig, snr_db: float):
    snr = 10.0 ** (snr_db / 10.0)
    if cfg.model == "I":
        return FadingModelI(h_lower=cfg.h_lower, snr_linear=snr)
    return FadingModelII(eta=cfg.eta, alpha=cfg.alpha, snr_linear=snr)


@dataclass(frozen=True)
class TrialResult:
    transmitted: frozenset
    decoded: frozenset
    slot_hits: tuple[int, ...]
    converged: tuple[bool, ...]
    decode_ms: float = field(default=0.0, compare=False)

    @property
    def K(self) -> int:
        return len(self.transmitted)

    @property
    def missed(self) -> int:
        return len(self.transmitted - self.decoded)

    @property
    def false_alarms(self) -> int:
        return len(self.decoded - self.transmitted)

    @property
    def error(self) -> bool:
        return self.transmitted != self.decoded


def trial_seed(master: int, snr_index: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master & (2**64 - 1), snr_index, trial_index])


def run_trial(cfg: ExperimentConfig, seed, snr_db: float | None = None) -> TrialResult:
    """One frame: K devices transmit, the receiver decodes, sets are compared."""
    if snr_db is None:
        snr_db = cfg.snr_db[0]
    system = build_system(cfg)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    r_ids, r_fade, r_delay, r_noise = (np.random.default_rng(s) for s in ss.spawn(4))
    params = cfg.tree

    ids = sample_active_set(cfg.K, params.B, r_ids)
    model = fading_model(cfg, snr_db)
    h = model.sample(r_fade, cfg.K)
    taus = sample_delays(cfg.K, cfg.T, r_delay)
    devices = [DeviceRealization(i, complex(hk), int(tk)) for i, hk, tk in zip(ids, h, taus)]
    if cfg.K:
        blocks = tree_encode(np.stack([int_to_bits(i, params.B) for i in ids]), params, system.gens)
    else:
        blocks = np.zeros((0, params.n), dtype=np.int64)
    books = list(system.codebooks) if not system.shared else system.codebooks[0]
    frame = synthesize_frame(devices, blocks, books, model.power, cfg.noise, r_noise, n=params.n)

    t0 = time.perf_counter()
    Y = frame.slots()
    if system.shared:
        lists, conv = decode_slots(Y, system.dictionaries[0], cfg.K, NOISE_STD, cfg.lasso)
    else:
        lists, conv = [], []
        for i, d in enumerate(system.dictionaries):
            lists.append(decode_slot(Y[:, i], d, cfg.K, NOISE_STD, cfg.lasso, slot=i))
            conv.append(True)
    decoded = tree_decode(lists, params, system.gens, cfg.fade, cfg.max_paths)
    elapsed = 1e3 * (time.perf_counter() - t0)

    hits = []
    for i, lst in enumerate(lists):
        sent = {(int(blocks[k, i]), int(taus[k])) for k in range(cfg.K)}
        got = set(zip(lst.values.tolist(), lst.delays.tolist()))
        hits.append(len(sent & got))
    return TrialResult(
        transmitted=frozenset(ids),
        decoded=frozenset(decoded),
        slot_hits=tuple(hits),
        converged=tuple(bool(c) for c in np.atleast_1d(conv)),
        decode_ms=elapsed,
    )


@dataclass(frozen=True)
class ErrorStats:
    snr_db: float
    trials: int
    pe: float
    pe_ci95: float
    pe_low: float
    pe_high: float
    missed_rate: float
    missed_ci95: float
    false_alarm_rate: float
    nonconverged_slots: int
    mean_decode_ms: float = field(default=0.0, compare=False)


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054):
    """Wilson score interval ``(low, high)`` for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi


def compute_stats(results, snr_db: float = float("nan")) -> ErrorStats:
    results = list(results)
    if not results:
        raise ValueError("cannot summarize an empty list of trials")
    n = len(results)
    errors = sum(r.error for r in results)
    lo, hi = wilson_interval(errors, n)
    miss = np.array([r.missed / r.K if r.K else 0.0 for r in results])
    fa = np.array([r.false_alarms / r.K if r.K else float(r.false_alarms > 0) for r in results])
    miss_ci = 1.959963984540054 * miss.std(ddof=1) / math.sqrt(n) if n > 1 else 1.0
    return ErrorStats(
        snr_db=float(snr_db),
        trials=n,
        pe=errors / n,
        pe_ci95=(hi - lo) / 2,
        pe_low=lo,
        pe_high=hi,
        missed_rate=float(miss.mean()),
        missed_ci95=float(miss_ci),
        false_alarm_rate=float(fa.mean()),
        nonconverged_slots=int(sum(len(r.converged) - sum(r.converged) for r in results)),
        mean_decode_ms=float(np.mean([r.decode_ms for r in results])),
    )


def _run_chunk(args):
    cfg, snr_index, indices = args
    snr = cfg.snr_db[snr_index]
    return [run_trial(cfg, trial_seed(cfg.seed, snr_index, t), snr) for t in indices]


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, progress=None,
                   return_trials: bool = False):
    """Sweep the SNR grid; one ``ErrorStats`` per point.

    Trial seeds depend only on (master seed, SNR index, trial index), so the
    output does not depend on ``workers``. ``progress(done, total)`` is
    called as chunks finish.
    """
    workers = workers or cfg.workers
    chunk = max(1, min(25, cfg.trials // (4 * workers) or 1))
    jobs = []
    for s in range(len(cfg.snr_db)):
        for start in range(0, cfg.trials, chunk):
            jobs.append((cfg, s, range(start, min(cfg.trials, start + chunk))))
    total = len(cfg.snr_db) * cfg.trials
    per_snr: list[list[TrialResult]] = [[] for _ in cfg.snr_db]
    done = 0

    def collect(job, res):
        nonlocal done
        per_snr[job[1]].extend(res)
        done += len(res)
        if progress:
            progress(done, total)

    if workers == 1:
        for job in jobs:
            collect(job, _run_chunk(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves submission order, so aggregation order is fixed
            for job, res in zip(jobs, pool.map(_run_chunk, jobs)):
                collect(job, res)

    stats = [compute_stats(r, snr) for r, snr in zip(per_snr, cfg.snr_db)]
    return (stats, per_snr) if return_trials else stats
