"""Run configuration: one JSON document per run, validated before any computation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .kernel import ProcessParams
from .specfun import DomainError, SeriesControl

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def _integer(obj, name):
    value = getattr(obj, name)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise DomainError(f"{name} must be an integer, got {value!r}")
    object.__setattr__(obj, name, int(value))


def _real(obj, name):
    value = getattr(obj, name)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"{name} must be a number, got {value!r}")
    object.__setattr__(obj, name, float(value))


def _take(block: dict, cls, where: str, rename: dict | None = None):
    """Build dataclass ``cls`` from ``block``, rejecting keys it does not declare."""
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    rename = rename or {}
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in block.items():
        name = rename.get(key, key)
        if name not in names or key in rename.values():
            raise ConfigError(f"unknown key {where}.{key}")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class EvalBlock:
    mode: str = "variance"
    t: tuple = ()
    s: tuple = ()
    beta: float | None = None
    n_nodes: int = 24

    def __post_init__(self):
        _integer(self, "n_nodes")
        if self.beta is not None:
            _real(self, "beta")
        if self.mode not in ("variance", "covariance"):
            raise DomainError(f"mode must be 'variance' or 'covariance', got {self.mode!r}")
        object.__setattr__(self, "t", tuple(float(v) for v in self.t))
        object.__setattr__(self, "s", tuple(float(v) for v in self.s))
        if not self.t:
            raise DomainError("t grid is empty")
        if self.mode == "covariance" and len(self.s) != len(self.t):
            raise DomainError("covariance mode needs t and s grids of equal length")
        if any(v <= 0 for v in self.t) or any(v < 0 for v in self.s):
            raise DomainError("t values must be positive and s values non-negative")
        if self.beta is not None and not self.beta >= max(self.t):
            raise DomainError("beta must be at least max(t)")
        if int(self.n_nodes) < 16:
            raise DomainError("n_nodes must be at least 16")


@dataclass(frozen=True)
class SimulateBlock:
    dt: float = 1e-3
    n_steps: int = 1000
    n_paths: int = 1000
    seed: int = 0
    scheme: str = "cell-integrated"
    summary_stride: int = 1
    csv: bool = False

    def __post_init__(self):
        from .langevin import SCHEMES

        _real(self, "dt")
        for name in ("n_steps", "n_paths", "seed", "summary_stride"):
            _integer(self, name)
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if int(self.n_steps) < 1 or int(self.n_paths) < 1:
            raise DomainError("n_steps and n_paths must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}")
        if int(self.summary_stride) < 1:
            raise DomainError("summary_stride must be at least 1")


@dataclass(frozen=True)
class DriftBlock:
    kind: str = "free"
    g: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        _real(self, "g")
        _real(self, "omega")
        if self.kind not in ("free", "linear", "harmonic"):
            raise DomainError(f"drift kind must be free, linear or harmonic, got {self.kind!r}")
        if self.kind == "harmonic" and not self.omega > 0:
            raise DomainError("harmonic drift needs omega > 0")


@dataclass(frozen=True)
class FPEBlock:
    drift: DriftBlock = field(default_factory=DriftBlock)
    x0: float = 0.0
    t0: float = 0.01
    t1: float = 1.0
    n_x: int = 801
    n_t: int = 200
    snapshots: tuple = ()
    tol: float = 1e-6

    def __post_init__(self):
        if isinstance(self.drift, dict):
            object.__setattr__(self, "drift", _take(self.drift, DriftBlock, "fpe.drift"))
        object.__setattr__(self, "snapshots", tuple(float(v) for v in self.snapshots))
        for name in ("x0", "t0", "t1", "tol"):
            _real(self, name)
        for name in ("n_x", "n_t"):
            _integer(self, name)
        if not 0 < self.t0 < self.t1:
            raise DomainError("need 0 < t0 < t1")
        if int(self.n_x) < 3 or int(self.n_t) < 1:
            raise DomainError("n_x must be >= 3 and n_t >= 1")
        if not self.tol > 0:
            raise DomainError("tol must be positive")


@dataclass(frozen=True)
class VerifyBlock:
    tier: str = "quick"

    def __post_init__(self):
        if self.tier not in ("quick", "full"):
            raise DomainError(f"tier must be 'quick' or 'full', got {self.tier!r}")


@dataclass(frozen=True)
class RunConfig:
    params: ProcessParams
    series: SeriesControl = SeriesControl()
    eval: EvalBlock | None = None
    simulate: SimulateBlock | None = None
    fpe: FPEBlock | None = None
    verify: VerifyBlock = VerifyBlock()
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        out = {"schema_version": self.schema_version}
        out["params"] = {"alpha": self.params.alpha, "gamma": self.params.gamma, "lambda": self.params.lam}
        out["series"] = {"rel_tol": self.series.rel_tol, "max_terms": self.series.max_terms}
        for name in ("eval", "simulate", "fpe"):
            block = getattr(self, name)
            if block is not None:
                out[name] = asdict(block)
        out["verify"] = asdict(self.verify)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


_TOP = {"schema_version", "params", "series", "eval", "simulate", "fpe", "verify"}


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - _TOP
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    if "params" not in doc:
        raise ConfigError("missing params block")
    params = _take(doc["params"], ProcessParams, "params", rename={"lambda": "lam"})
    kw = {"params": params}
    if "series" in doc:
        kw["series"] = _take(doc["series"], SeriesControl, "series")
    for key, cls in (("eval", EvalBlock), ("simulate", SimulateBlock), ("fpe", FPEBlock), ("verify", VerifyBlock)):
        if key in doc:
            kw[key] = _take(doc[key], cls, key)
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)
