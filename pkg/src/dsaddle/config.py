"""Run configuration: a flat ``[run]`` section in an INI file."""

from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .topology import TOPOLOGY_KINDS

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


_CHOICES = {
    "problem": ("logistic", "auc"),
    "topology": TOPOLOGY_KINDS,
    "algorithm": ("cdpsvrg", "cdpssg", "gsgo"),
    "switching": ("practical", "theoretical"),
    "strong_convexity": ("nominal", "local"),
}


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``data`` is either ``synthetic`` or a path to a LIBSVM file. ``bits`` is
    ``off`` or a positive integer. ``T0`` applies to theoretical switching and
    may be ``auto`` (computed from the benchmark). ``p_ref`` may be ``auto``,
    meaning ``1/batches``. ``benchmark`` is ``auto`` (compute), ``none`` or a
    file path.
    """

    problem: str = "logistic"
    data: str = "synthetic"
    samples: int = 200
    features: int = 5
    data_seed: int = 1
    lam: float = 0.1
    beta: float = 0.1
    radius_x: float = 1.0
    radius_y: float = 1.0
    strong_convexity: str = "nominal"
    topology: str = "ring"
    nodes: int = 4
    batches: int = 1
    bits: str = "off"
    algorithm: str = "cdpsvrg"
    T: int = 1000
    epsilon: float = 1e-6
    switching: str = "practical"
    T0: str = "auto"
    threshold: float = 1e-8
    gossip_iters: int = 20
    p_ref: str = "auto"
    seed: int = 0
    trace_every: int = 1
    out: str = "trace.csv"
    benchmark: str = "auto"
    benchmark_iters: int = 50000
    benchmark_tol: float = 1e-8

    def __post_init__(self):
        self.validate()

    # --- validation ------------------------------------------------------
    def validate(self) -> None:
        for key, opts in _CHOICES.items():
            if getattr(self, key) not in opts:
                raise ConfigError(f"{key}: {getattr(self, key)!r} is not one of {', '.join(opts)}")
        for key in ("samples", "features", "nodes", "batches", "T", "gossip_iters", "trace_every",
                    "benchmark_iters"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be a positive integer, got {getattr(self, key)}")
        for key in ("lam", "beta", "radius_x", "radius_y", "threshold", "benchmark_tol"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key}: must be positive, got {getattr(self, key)}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon: must lie in (0,1), got {self.epsilon}")
        if self.bits != "off":
            try:
                b = int(self.bits)
            except ValueError:
                raise ConfigError(f"bits: expected 'off' or a positive integer, got {self.bits!r}") from None
            if b < 1 or str(b) != self.bits:
                raise ConfigError(f"bits: expected 'off' or a positive integer, got {self.bits!r}")
        if self.T0 != "auto":
            try:
                if int(self.T0) < 0 or str(int(self.T0)) != self.T0:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"T0: expected 'auto' or a non-negative integer, got {self.T0!r}") from None
        if self.p_ref != "auto":
            try:
                p = float(self.p_ref)
            except ValueError:
                raise ConfigError(f"p_ref: expected 'auto' or a number in (0,1], got {self.p_ref!r}") from None
            if not 0.0 < p <= 1.0:
                raise ConfigError(f"p_ref: must lie in (0,1], got {self.p_ref}")

    # --- derived views ---------------------------------------------------
    @property
    def quant_bits(self) -> int | None:
        return None if self.bits == "off" else int(self.bits)

    @property
    def p_ref_value(self) -> float | None:
        return None if self.p_ref == "auto" else float(self.p_ref)

    @property
    def T0_value(self) -> int | None:
        return None if self.T0 == "auto" else int(self.T0)

    def problem_key(self) -> str:
        """Serialized subset that determines the problem (for benchmark hashing)."""
        keys = ("problem", "data", "samples", "features", "data_seed", "lam", "beta", "radius_x", "radius_y",
                "strong_convexity", "nodes", "batches")
        return ";".join(f"{k}={getattr(self, k)!r}" for k in keys)

    # --- serialization ---------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["run"] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(self).items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def replace(self, **kw) -> "RunConfig":
        d = asdict(self)
        d.update(kw)
        return RunConfig(**d)


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if "run" not in cp:
        raise ConfigError("missing [run] section")
    extra = [s for s in cp.sections() if s != "run"]
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(extra)}")
    types = {f.name: f.type for f in fields(RunConfig)}
    kw = {}
    for key, raw in cp["run"].items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r}")
        typ = types[key]
        try:
            if typ in (int, "int"):
                kw[key] = int(raw)
            elif typ in (float, "float"):
                kw[key] = float(raw)
            else:
                kw[key] = raw.strip()
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r} as {typ}") from None
    return RunConfig(**kw)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
