"""Experiment configuration: a sectioned ``key = value`` file (INI dialect).

Sections and keys (all optional; defaults give the 6-site transistor)::

    [model]
    n_sites = 6
    sector = auto            # auto | full | "n_up, n_down"
    hopping = chain(-1)      # chain(v) or matrix(r11 r12 ...; r21 ...)
    interaction = 10         # U, in units of |v_12|
    gate = 0                 # V_g on the interior sites
    source_drain = 20.8      # V_sd; V_1 = +V_sd/2, V_N = -V_sd/2
    site_potentials =        # explicit V_1..V_N, overrides gate/source_drain

    [drive]
    t_switch = 10
    width = 0.03125

    [run]
    mode = simulate          # simulate | benchmark | convergence | ground-state
    scheme = CF4             # CF2 | CF4 | DoPri45 | path to a scheme table
    t_start = 0
    t_end = 50
    tol = 1e-7
    krylov_tol = 1e-12
    krylov_m_max = 128
    tau_max = 2
    output_dt = 1            # sample spacing; 0 disables sampling
    fixed_steps = 0          # > 0: equidistant steps instead of adaptive
    seed = 0

    [benchmark]
    methods = CF2, CF4, DoPri45
    tols = 1e-5, 1e-6, 1e-7, 1e-8
    n_steps = 50, 100, 200, 400
    reference_tol = 1e-11
    reference_scheme = CF4

    [convergence]
    schemes = CF2, CF4
    local_taus = 2^-7, 2^-8, 2^-9, 2^-10
    local_offset = -1.3169578969248164   # step start (t - t_switch) / width
    scaling_widths = 2^-3, 2^-4, 2^-5, 2^-6, 2^-7
    scaling_tau_ratio = 0.125             # tau / min(scaling_widths)
    global_width = 0.5
    global_window = 9, 11
    global_steps = 16, 32, 64, 128

Numbers accept ``2^k`` powers and ``p/q`` rationals.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .hubbard import chain_hopping

MODES = ("simulate", "benchmark", "convergence", "ground-state")


class ConfigError(ValueError):
    pass


def parse_number(text: str) -> float:
    s = text.strip()
    m = re.fullmatch(r"([-+]?\d+(?:\.\d*)?)\s*\^\s*([-+]?\d+)", s)
    if m:
        return float(m.group(1)) ** int(m.group(2))
    if "/" in s:
        return float(Fraction(s))
    return float(s)


def parse_list(text: str, conv=parse_number) -> list:
    return [conv(t) for t in re.split(r"[,\s]+", text.strip()) if t]


def _fmt_num(x: float) -> str:
    return repr(float(x))


def _fmt_list(xs) -> str:
    return ", ".join(_fmt_num(x) if not isinstance(x, str) else x for x in xs)


@dataclass(frozen=True)
class ModelConfig:
    n_sites: int = 6
    sector: str = "auto"
    hopping: str = "chain(-1)"
    interaction: float = 10.0
    gate: float = 0.0
    source_drain: float = 2 * 1.04 * 10.0
    site_potentials: Tuple[float, ...] = ()

    def sector_tuple(self) -> Optional[Tuple[int, int]]:
        s = self.sector.strip().lower()
        if s == "full":
            return None
        if s == "auto":
            if self.n_sites % 2:
                raise ConfigError("model.sector = auto needs an even number of sites")
            return (self.n_sites // 2, self.n_sites // 2)
        vals = parse_list(s, int)
        if len(vals) != 2:
            raise ConfigError(f"model.sector: expected 'n_up, n_down', got {self.sector!r}")
        return (vals[0], vals[1])

    def hopping_matrix(self) -> np.ndarray:
        text = self.hopping.strip()
        m = re.fullmatch(r"chain\(\s*([^)]+)\)", text)
        if m:
            return chain_hopping(self.n_sites, parse_number(m.group(1)))
        m = re.fullmatch(r"matrix\((.*)\)", text, flags=re.S)
        if m:
            rows = [parse_list(r) for r in m.group(1).split(";") if r.strip()]
            mat = np.array(rows, dtype=float) if rows else np.zeros((0, 0))
            if mat.shape != (self.n_sites, self.n_sites):
                raise ConfigError(f"model.hopping: matrix must be {self.n_sites}x{self.n_sites}")
            return mat
        raise ConfigError(f"model.hopping: expected chain(v) or matrix(...), got {self.hopping!r}")

    def potentials(self) -> np.ndarray:
        if self.site_potentials:
            pots = np.array(self.site_potentials, dtype=float)
            if pots.shape != (self.n_sites,):
                raise ConfigError(f"model.site_potentials needs {self.n_sites} values")
            return pots
        pots = np.full(self.n_sites, float(self.gate))
        if self.n_sites == 1:
            return np.zeros(1)
        pots[0] = self.source_drain / 2
        pots[-1] = -self.source_drain / 2
        return pots


@dataclass(frozen=True)
class DriveConfig:
    t_switch: float = 10.0
    width: float = 2.0**-5


@dataclass(frozen=True)
class RunConfig:
    mode: str = "simulate"
    scheme: str = "CF4"
    t_start: float = 0.0
    t_end: float = 50.0
    tol: float = 1e-7
    krylov_tol: float = 1e-12
    krylov_m_max: int = 128
    tau_max: float = 2.0
    output_dt: float = 1.0
    fixed_steps: int = 0
    seed: int = 0

    def output_times(self) -> np.ndarray:
        if self.output_dt <= 0:
            return np.array([])
        n = int(np.floor((self.t_end - self.t_start) / self.output_dt + 1e-9))
        times = self.t_start + self.output_dt * np.arange(n + 1)
        return np.unique(np.append(times[times <= self.t_end], self.t_end))


@dataclass(frozen=True)
class BenchmarkConfig:
    methods: Tuple[str, ...] = ("CF2", "CF4", "DoPri45")
    tols: Tuple[float, ...] = (1e-5, 1e-6, 1e-7, 1e-8)
    n_steps: Tuple[int, ...] = (50, 100, 200, 400)
    reference_tol: float = 1e-11
    reference_scheme: str = "CF4"


@dataclass(frozen=True)
class ConvergenceConfig:
    schemes: Tuple[str, ...] = ("CF2", "CF4")
    local_taus: Tuple[float, ...] = (2.0**-7, 2.0**-8, 2.0**-9, 2.0**-10)
    local_offset: float = float(np.log(2 - np.sqrt(3)))
    scaling_widths: Tuple[float, ...] = (2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7)
    scaling_tau_ratio: float = 1 / 8
    global_width: float = 0.5
    global_window: Tuple[float, float] = (9.0, 11.0)
    global_steps: Tuple[int, ...] = (16, 32, 64, 128)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    drive: DriveConfig = field(default_factory=DriveConfig)
    run: RunConfig = field(default_factory=RunConfig)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)

    def validate(self) -> "ExperimentConfig":
        from .cfm import SchemeError, resolve_scheme

        m, r = self.model, self.run
        if m.n_sites < 1:
            raise ConfigError("model.n_sites must be positive")
        sector = m.sector_tuple()
        if sector is not None and not all(0 <= s <= m.n_sites for s in sector):
            raise ConfigError(f"model.sector {sector} out of range for {m.n_sites} sites")
        hop = m.hopping_matrix()
        if not np.array_equal(hop, hop.T):
            raise ConfigError("model.hopping must be symmetric")
        m.potentials()
        if m.interaction < 0:
            raise ConfigError("model.interaction must be >= 0")
        if not self.drive.width > 0:
            raise ConfigError("drive.width must be positive")
        if r.mode not in MODES:
            raise ConfigError(f"run.mode must be one of {MODES}, got {r.mode!r}")
        if not r.t_end > r.t_start:
            raise ConfigError("run.t_end must exceed run.t_start")
        for name in ("tol", "krylov_tol", "tau_max"):
            if not getattr(r, name) > 0:
                raise ConfigError(f"run.{name} must be positive")
        if r.krylov_m_max < 2:
            raise ConfigError("run.krylov_m_max must be >= 2")
        schemes = [r.scheme, self.benchmark.reference_scheme, *self.benchmark.methods,
                   *self.convergence.schemes]
        for s in schemes:
            if s.lower() != "dopri45":
                try:
                    resolve_scheme(s)
                except SchemeError as exc:
                    raise ConfigError(f"scheme {s!r}: {exc}") from exc
        b = self.benchmark
        if any(t <= 0 for t in b.tols) or b.reference_tol <= 0:
            raise ConfigError("benchmark tolerances must be positive")
        if r.mode == "benchmark" and b.tols and b.reference_tol > min(b.tols) / 100:
            raise ConfigError("benchmark.reference_tol must be <= min(benchmark.tols) / 100")
        if any(n < 1 for n in b.n_steps):
            raise ConfigError("benchmark.n_steps must be positive")
        return self

    def with_overrides(self, full: bool = False, seed: Optional[int] = None) -> "ExperimentConfig":
        cfg = self
        if full:
            cfg = replace(cfg, model=replace(cfg.model, n_sites=8, sector="auto"))
        if seed is not None:
            cfg = replace(cfg, run=replace(cfg.run, seed=seed))
        return cfg


_SECTIONS = {
    "model": ModelConfig,
    "drive": DriveConfig,
    "run": RunConfig,
    "benchmark": BenchmarkConfig,
    "convergence": ConvergenceConfig,
}


def _convert(section: str, key: str, default, text: str):
    try:
        if isinstance(default, bool):
            return text.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(parse_number(text))
        if isinstance(default, float):
            return parse_number(text)
        if isinstance(default, tuple):
            if not text.strip():
                return ()
            sample = default[0] if default else 0.0
            if isinstance(sample, str):
                return tuple(t for t in re.split(r"[,\s]+", text.strip()) if t)
            if isinstance(sample, int):
                return tuple(int(parse_number(t)) for t in re.split(r"[,\s]+", text.strip()) if t)
            return tuple(parse_list(text))
        return text.strip()
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {text!r} ({exc})") from exc


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    parts = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
    for section, cls in _SECTIONS.items():
        defaults = cls()
        known = {f.name for f in fields(cls)}
        values = {}
        if parser.has_section(section):
            for key, text in parser.items(section):
                if key not in known:
                    raise ConfigError(f"unknown key {section}.{key}")
                values[key] = _convert(section, key, getattr(defaults, key), text)
        parts[section] = cls(**values)
    return ExperimentConfig(**parts)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in _SECTIONS:
        parser.add_section(section)
        for key, value in asdict(getattr(cfg, section)).items():
            if isinstance(value, (tuple, list)):
                text = _fmt_list(value)
            elif isinstance(value, bool):
                text = str(value).lower()
            elif isinstance(value, float):
                text = _fmt_num(value)
            else:
                text = str(value)
            parser.set(section, key, text)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
