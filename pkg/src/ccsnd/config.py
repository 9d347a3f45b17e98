"""Experiment configuration: dataclass model and TOML loader.

Config files are TOML with the sections ``tree``, ``codebook``,
``channel``, ``lasso`` and ``sweep``. Unknown keys are rejected and every
optional key falls back to the defaults in ``DEFAULTS``.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cs_decoder import LassoConfig
from .errors import ConfigError
from .tree_code import DEFAULT_MAX_PATHS, FadePruneConfig, TreeCodeParams

DEFAULTS = {
    "tree": {
        "fade_prune": None,  # None: on for fading model II, off for model I
        "fade_rel_tolerance": 0.5,
        "check_delay": False,
        "tie_break": False,
        "max_paths": DEFAULT_MAX_PATHS,
    },
    "codebook": {
        "T": 0,
        "per_slot_rows": False,
    },
    "channel": {
        "model": "I",
        "h_lower": 1.0,
        "eta": 0.05,
        "alpha": 2.0,
        "K_tot": None,
        "noise": True,
    },
    "lasso": {
        "lambda_scale": 1.0,
        "max_iters": 3000,
        "tol": 1e-4,
        "debias": True,
    },
    "sweep": {
        "seed": 0,
        "workers": 1,
    },
}

REQUIRED = {
    "tree": ("n", "J", "l", "B"),
    "codebook": ("N",),
    "channel": ("K",),
    "sweep": ("snr_db", "trials"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    tree: TreeCodeParams
    N: int
    T: int
    K: int
    model: str = "I"
    h_lower: float = 1.0
    eta: float = 0.05
    alpha: float = 2.0
    snr_db: tuple[float, ...] = (0.0,)
    trials: int = 100
    seed: int = 0
    lasso: LassoConfig = field(default_factory=LassoConfig)
    fade: FadePruneConfig = field(default_factory=FadePruneConfig)
    max_paths: int = DEFAULT_MAX_PATHS
    per_slot_rows: bool = False
    noise: bool = True
    K_tot: int | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        if self.N % self.tree.n:
            raise ConfigError("codebook.N", f"frame length {self.N} is not a multiple of n={self.tree.n}")
        if self.model not in ("I", "II"):
            raise ConfigError("channel.model", f"unknown fading model {self.model!r} (use 'I' or 'II')")
        if self.K < 0:
            raise ConfigError("channel.K", "must be non-negative")
        if self.K > 2**self.tree.B:
            raise ConfigError("channel.K", f"K={self.K} exceeds the identity space 2^{self.tree.B}")
        if self.K_tot is not None and math.ceil(math.log2(self.K_tot)) != self.tree.B:
            raise ConfigError("tree.B", f"B={self.tree.B} does not match log2(K_tot={self.K_tot})")
        if self.trials < 1:
            raise ConfigError("sweep.trials", "need at least one trial")
        if not self.snr_db:
            raise ConfigError("sweep.snr_db", "empty SNR grid")
        if self.max_paths < 1:
            raise ConfigError("tree.max_paths", "must be positive")
        if self.workers < 1:
            raise ConfigError("sweep.workers", "must be positive")
        if self.slot_len <= self.T:
            raise ConfigError("codebook.T", f"slot length {self.slot_len} must exceed T={self.T}")
        if self.slot_len - self.T > 2**self.tree.J:
            raise ConfigError("codebook.N", "more codeword symbols per slot than DFT rows available")
        if self.model == "II" and not self.alpha > 1:
            raise ConfigError("channel.alpha", "Pareto shape must exceed 1")

    @property
    def slot_len(self) -> int:
        return self.N // self.tree.n

    def replace(self, **changes) -> "ExperimentConfig":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return ExperimentConfig(**values)

    def to_document(self) -> dict:
        """Fully resolved config in file layout (round-trips through ``from_document``)."""
        return {
            "tree": {
                "n": self.tree.n,
                "J": self.tree.J,
                "l": list(self.tree.l),
                "B": self.tree.B,
                "fade_prune": self.fade.enabled,
                "fade_rel_tolerance": self.fade.rel_tolerance,
                "check_delay": self.fade.check_delay,
                "tie_break": self.fade.tie_break,
                "max_paths": self.max_paths,
            },
            "codebook": {"N": self.N, "T": self.T, "per_slot_rows": self.per_slot_rows},
            "channel": {
                "model": self.model,
                "K": self.K,
                "h_lower": self.h_lower,
                "eta": self.eta,
                "alpha": self.alpha,
                "K_tot": self.K_tot,
                "noise": self.noise,
            },
            "lasso": {
                "lambda_scale": self.lasso.lambda_scale,
                "max_iters": self.lasso.max_iters,
                "tol": self.lasso.tol,
                "debias": self.lasso.debias,
            },
            "sweep": {
                "snr_db": list(self.snr_db),
                "trials": self.trials,
                "seed": self.seed,
                "workers": self.workers,
            },
        }


def _merge(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a table of sections")
    sections = set(DEFAULTS) | set(REQUIRED)
    merged = copy.deepcopy(DEFAULTS)
    for name, body in doc.items():
        if name not in sections:
            raise ConfigError(name, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(name, "section must be a table")
        allowed = set(DEFAULTS.get(name, {})) | set(REQUIRED.get(name, ()))
        for key, value in body.items():
            if key not in allowed:
                raise ConfigError(f"{name}.{key}", "unknown key")
            merged.setdefault(name, {})[key] = value
    for name, keys in REQUIRED.items():
        for key in keys:
            if key not in merged.get(name, {}):
                raise ConfigError(f"{name}.{key}", "missing required key")
    return merged


def _typed(doc, section, key, kind):
    value = doc[section][key]
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}", f"expected {kind.__name__}, got {value!r}") from None


def from_document(doc: dict) -> ExperimentConfig:
    d = _merge(doc)
    l = d["tree"]["l"]
    if not isinstance(l, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in l):
        raise ConfigError("tree.l", "expected a list of integers")
    snr = d["sweep"]["snr_db"]
    if isinstance(snr, (int, float)) and not isinstance(snr, bool):
        snr = [snr]
    if not isinstance(snr, list) or not all(isinstance(v, (int, float)) for v in snr):
        raise ConfigError("sweep.snr_db", "expected a list of numbers")

    tree = TreeCodeParams(
        n=_typed(d, "tree", "n", int),
        J=_typed(d, "tree", "J", int),
        l=tuple(l),
        B=_typed(d, "tree", "B", int),
    )
    model = str(d["channel"]["model"])
    fade_prune = d["tree"]["fade_prune"]
    if fade_prune is None:
        fade_prune = model == "II"
    elif not isinstance(fade_prune, bool):
        raise ConfigError("tree.fade_prune", "expected bool")
    fade = FadePruneConfig(
        enabled=fade_prune,
        rel_tolerance=_typed(d, "tree", "fade_rel_tolerance", float),
        check_delay=_typed(d, "tree", "check_delay", bool),
        tie_break=_typed(d, "tree", "tie_break", bool),
    )
    lasso = LassoConfig(
        lambda_scale=_typed(d, "lasso", "lambda_scale", float),
        max_iters=_typed(d, "lasso", "max_iters", int),
        tol=_typed(d, "lasso", "tol", float),
        debias=_typed(d, "lasso", "debias", bool),
    )
    k_tot = d["channel"]["K_tot"]
    if k_tot is not None:
        k_tot = _typed(d, "channel", "K_tot", int)
    return ExperimentConfig(
        tree=tree,
        N=_typed(d, "codebook", "N", int),
        T=_typed(d, "codebook", "T", int),
        K=_typed(d, "channel", "K", int),
        model=model,
        h_lower=_typed(d, "channel", "h_lower", float),
        eta=_typed(d, "channel", "eta", float),
        alpha=_typed(d, "channel", "alpha", float),
        snr_db=tuple(float(s) for s in snr),
        trials=_typed(d, "sweep", "trials", int),
        seed=_typed(d, "sweep", "seed", int),
        lasso=lasso,
        fade=fade,
        max_paths=_typed(d, "tree", "max_paths", int),
        per_slot_rows=_typed(d, "codebook", "per_slot_rows", bool),
        noise=_typed(d, "channel", "noise", bool),
        K_tot=k_tot,
        workers=_typed(d, "sweep", "workers", int),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<parse>", str(exc)) from None
    return from_document(doc)


def dumps_toml(doc: dict) -> str:
    """Minimal TOML writer for resolved config documents."""
    lines = []
    for section, body in doc.items():
        lines.append(f"[{section}]")
        for key, value in body.items():
            if value is None:
                continue
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    return str(v)
