"""Experiment configuration: an INI file with one section per concern.

Every key is typed and defaulted below; unknown sections or keys are errors
reported with the line they appear on. ``overrides`` use ``section.key=value``.

Example::

    [model]
    n_sites = 10
    g1 = 4.0
    g2 = 2.0

    [ansatz]
    kind = rbm
    density = 3
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class ModelSection:
    n_sites: int = 8
    g1: float = 4.0
    g2: float = 2.0
    J: float = 1.0


@dataclass
class AnsatzSection:
    kind: str = "jastrow"
    density: int = 1


@dataclass
class EstimatorSection:
    mode: str = "exact-sum"
    n_samples: int = 70000
    n_burn: int = 100
    n_chains: int = 8
    seed: int = 1234
    enumeration_cap: int = 14
    backend: str = "auto"


@dataclass
class IntegratorSection:
    kind: str = "heun"
    dt: float = 1e-3
    adaptive_dt: bool = False
    tol_step: float = 1e-3
    dt_min: float = 1e-7
    dt_max: float = 0.05


@dataclass
class SolverSection:
    kind: str = "pseudoinverse"
    pinv_rtol: float = 1e-7
    snr_threshold: float = 4.0
    diagonal_shift: float = 0.0


@dataclass
class AdaptiveSection:
    enabled: bool = True
    lambda_mode: str = "fraction"
    lambda_value: float = 1e-2
    eta_sig_sq: float = 0.0
    collective: bool = False
    binary_search: bool = False
    importance_mode: str = "approximate"


@dataclass
class GroundStateSection:
    learning_rate: float = 0.02
    iterations: int = 2000
    diagonal_shift: float = 1e-3
    shift_floor: float = 1e-5
    tol: float = 1e-8
    n_samples: int = 0  # 0: reuse estimator.n_samples
    seed: int = 0


@dataclass
class RunSection:
    t_total: float = 1.0
    record_every: int = 1


@dataclass
class OutputSection:
    directory: str = "output"
    formats: str = "csv,jsonl"


SECTIONS = {
    "model": ModelSection,
    "ansatz": AnsatzSection,
    "estimator": EstimatorSection,
    "integrator": IntegratorSection,
    "solver": SolverSection,
    "adaptive": AdaptiveSection,
    "ground_state": GroundStateSection,
    "run": RunSection,
    "output": OutputSection,
}

_CHOICES = {
    ("ansatz", "kind"): ("jastrow", "rbm"),
    ("estimator", "mode"): ("exact-sum", "metropolis"),
    ("estimator", "backend"): ("auto", "cython", "python"),
    ("integrator", "kind"): ("euler", "heun"),
    ("solver", "kind"): ("pseudoinverse", "snr"),
    ("adaptive", "lambda_mode"): ("fraction", "absolute"),
    ("adaptive", "importance_mode"): ("exact", "approximate"),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(raw: str, typ, where: str, line):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            val = float(raw)
            return val
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ.__name__}", line) from None


@dataclass
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    ansatz: AnsatzSection = field(default_factory=AnsatzSection)
    estimator: EstimatorSection = field(default_factory=EstimatorSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    solver: SolverSection = field(default_factory=SolverSection)
    adaptive: AdaptiveSection = field(default_factory=AdaptiveSection)
    ground_state: GroundStateSection = field(default_factory=GroundStateSection)
    run: RunSection = field(default_factory=RunSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_ini(self) -> str:
        lines = []
        for name in SECTIONS:
            lines.append(f"[{name}]")
            for k, v in dataclasses.asdict(getattr(self, name)).items():
                if isinstance(v, bool):
                    v = "true" if v else "false"
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str, overrides=()) -> "ExperimentConfig":
        lines = _line_index(text)
        parser = configparser.ConfigParser(interpolation=None, strict=True)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(f"malformed configuration: {exc.message if hasattr(exc, 'message') else exc}", line) from None

        values: dict = {name: {} for name in SECTIONS}
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lines.get((section, None)))
            known = {f.name: f.type for f in dataclasses.fields(SECTIONS[section])}
            for key, raw in parser.items(section):
                if key not in known:
                    raise ConfigError(f"unknown key {section}.{key}", lines.get((section, key)))
                values[section][key] = (raw, lines.get((section, key)))

        for item in overrides:
            if "=" not in item or "." not in item.split("=", 1)[0]:
                raise ConfigError(f"override {item!r} is not of the form section.key=value")
            path, raw = item.split("=", 1)
            section, key = path.strip().split(".", 1)
            if section not in SECTIONS:
                raise ConfigError(f"override names unknown section {section!r}")
            if key not in {f.name for f in dataclasses.fields(SECTIONS[section])}:
                raise ConfigError(f"override names unknown key {section}.{key}")
            values[section][key] = (raw, None)

        built = {}
        for name, klass in SECTIONS.items():
            kwargs = {}
            types = {f.name: f.type for f in dataclasses.fields(klass)}
            for key, (raw, line) in values[name].items():
                typ = {"int": int, "float": float, "bool": bool, "str": str}[types[key]]
                kwargs[key] = _convert(raw, typ, f"{name}.{key}", line)
            built[name] = klass(**kwargs)
        cfg = cls(**built)
        cfg.validate(lines)
        return cfg

    @classmethod
    def from_file(cls, path, overrides=()) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        return cls.from_text(text, overrides)

    def validate(self, lines=None):
        lines = lines or {}

        def fail(section, key, msg):
            raise ConfigError(f"{section}.{key}: {msg}", lines.get((section, key)))

        for (section, key), allowed in _CHOICES.items():
            val = getattr(getattr(self, section), key)
            if val not in allowed:
                fail(section, key, f"must be one of {', '.join(allowed)}, got {val!r}")
        m = self.model
        if m.n_sites < 2:
            fail("model", "n_sites", "need at least 2 sites")
        if m.J == 0:
            fail("model", "J", "must be nonzero")
        for key in ("g1", "g2"):
            if not math.isfinite(getattr(m, key)) or getattr(m, key) < 0:
                fail("model", key, "must be a finite non-negative number")
        if self.ansatz.kind == "rbm" and self.ansatz.density < 1:
            fail("ansatz", "density", "must be a positive integer")
        e = self.estimator
        if e.n_samples <= 0:
            fail("estimator", "n_samples", "must be positive")
        if e.n_chains < 1:
            fail("estimator", "n_chains", "must be at least 1")
        if e.n_burn < 0:
            fail("estimator", "n_burn", "must be non-negative")
        if e.mode == "exact-sum" and m.n_sites > e.enumeration_cap:
            fail("estimator", "mode", f"exact-sum needs n_sites <= enumeration_cap ({e.enumeration_cap})")
        i = self.integrator
        if not i.dt > 0:
            fail("integrator", "dt", "must be positive")
        if not i.tol_step > 0:
            fail("integrator", "tol_step", "must be positive")
        if i.adaptive_dt and i.kind != "heun":
            fail("integrator", "adaptive_dt", "adaptive time steps require kind = heun")
        if not 0 < i.dt_min <= i.dt_max:
            fail("integrator", "dt_min", "need 0 < dt_min <= dt_max")
        s = self.solver
        if not 0 < s.pinv_rtol < 1:
            fail("solver", "pinv_rtol", "must lie in (0, 1)")
        if not s.snr_threshold > 0:
            fail("solver", "snr_threshold", "must be positive")
        if s.diagonal_shift < 0:
            fail("solver", "diagonal_shift", "must be non-negative")
        a = self.adaptive
        if a.lambda_mode == "fraction" and not a.lambda_value > 0:
            fail("adaptive", "lambda_value", "fractional threshold needs a positive coefficient")
        if a.lambda_value < 0:
            fail("adaptive", "lambda_value", "must be non-negative")
        if not 0 <= a.eta_sig_sq < 1:
            fail("adaptive", "eta_sig_sq", "must lie in [0, 1)")
        g = self.ground_state
        if not g.learning_rate > 0:
            fail("ground_state", "learning_rate", "must be positive")
        if g.iterations < 0:
            fail("ground_state", "iterations", "must be non-negative")
        if g.diagonal_shift < g.shift_floor:
            fail("ground_state", "diagonal_shift", "must not be below shift_floor")
        r = self.run
        if r.t_total < 0:
            fail("run", "t_total", "must be non-negative")
        if r.record_every < 1:
            fail("run", "record_every", "must be at least 1")
        fmts = {f.strip() for f in self.output.formats.split(",") if f.strip()}
        if not fmts <= {"csv", "jsonl"}:
            fail("output", "formats", "supported formats are csv and jsonl")


def _line_index(text: str) -> dict:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    out = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), n)
            continue
        m = re.match(r"\s*([^#;=:\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip()), n)
    return out
