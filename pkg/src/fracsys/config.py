"""INI experiment configs with line-anchored validation errors."""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .fieldgrid import GridField, GridSpec, constant, fourier_mode, gaussian
from .fraccalc import TimeGrid
from .mildsolver import SystemParams


class ConfigError(ValueError):
    pass


class _Source:
    """Parsed file plus the line number of every key, for error messages."""

    def __init__(self, path: Path):
        self.path = path
        text = path.read_text()
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            self.cp.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        self.lines = {}
        section = None
        for no, line in enumerate(text.splitlines(), 1):
            m = re.match(r"\s*\[([^\]]+)\]", line)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = no
                continue
            m = re.match(r"\s*([^#;=:\s][^=:]*?)\s*[=:]", line)
            if m and section is not None:
                self.lines[(section, m.group(1).strip().lower())] = no

    def where(self, section: str, key: Optional[str] = None) -> str:
        no = self.lines.get((section, key and key.lower())) or self.lines.get((section, None))
        loc = f"{self.path}:{no}" if no else str(self.path)
        return f"{loc}: [{section}]" + (f" {key}" if key else "")

    def error(self, section: str, key: Optional[str], msg: str) -> ConfigError:
        return ConfigError(f"{self.where(section, key)}: {msg}")

    def has(self, section: str, key: Optional[str] = None) -> bool:
        if key is None:
            return self.cp.has_section(section)
        return self.cp.has_option(section, key)

    def raw(self, section: str, key: str, default=None) -> Optional[str]:
        if not self.cp.has_section(section):
            if default is not None:
                return default
            raise ConfigError(f"{self.path}: missing section [{section}] (needed for key {key})")
        if not self.cp.has_option(section, key):
            if default is not None:
                return default
            raise self.error(section, None, f"missing key {key}")
        return self.cp.get(section, key)

    def num(self, section, key, default=None, kind=float, check=None, what=""):
        text = self.raw(section, key, None if default is None else str(default))
        try:
            val = kind(text)
        except ValueError:
            raise self.error(section, key, f"expected {kind.__name__}, got {text!r}") from None
        if check is not None and not check(val):
            raise self.error(section, key, f"value {val} out of range{': ' + what if what else ''}")
        return val

    def boolean(self, section, key, default: bool) -> bool:
        if not self.has(section, key):
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            raise self.error(section, key, f"expected a boolean, got {self.cp.get(section, key)!r}") from None

    def floats(self, section, key, default=None) -> list:
        text = self.raw(section, key, default)
        try:
            return [float(x) for x in text.replace(",", " ").split()]
        except ValueError:
            raise self.error(section, key, f"expected numbers, got {text!r}") from None

    def unknown_keys(self, section: str, allowed: set) -> None:
        if not self.cp.has_section(section):
            return
        for key in self.cp.options(section):
            if key not in allowed:
                raise self.error(section, key, f"unknown key (allowed: {', '.join(sorted(allowed))})")


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple = (0.0,)
    value: float = 0.0
    mode: tuple = (1,)

    def build(self, spec: GridSpec, rng: np.random.Generator) -> GridField:
        if self.kind == "gaussian":
            return gaussian(spec, self.amplitude, self.width, self.center)
        if self.kind == "constant":
            return constant(spec, self.value)
        if self.kind == "fourier_mode":
            return fourier_mode(spec, self.mode, self.amplitude)
        if self.kind == "random_smooth":
            # nonnegative smooth bump field: white noise under a Gaussian filter, squared
            noise = rng.standard_normal(spec.shape)
            smooth = spec.irfft(spec.rfft(noise) * np.exp(-spec.k2 * self.width ** 2))
            smooth = smooth / (np.abs(smooth).max() or 1.0)
            env = gaussian(spec, 1.0, 4.0 * self.width, self.center).values
            return GridField(spec, self.amplitude * smooth ** 2 * env)
        raise ValueError(self.kind)


INITIAL_KINDS = ("gaussian", "constant", "fourier_mode", "random_smooth")


@dataclass
class ExperimentConfig:
    path: Path
    params: SystemParams
    grid: GridSpec
    time: TimeGrid
    u0: InitialSpec
    v0: InitialSpec
    decay_verify: bool = False
    decay_window: tuple = (1.0, math.inf)
    weak_residual: bool = False
    blowup_bound: bool = False
    positivity: bool = False
    blowup_threshold: Optional[float] = None
    store_every: int = 1
    seed: int = 0
    out: Optional[Path] = None

    def initial_fields(self, seed: Optional[int] = None) -> tuple:
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return self.u0.build(self.grid, rng), self.v0.build(self.grid, rng)


def _initial(src: _Source, section: str, dim: int) -> InitialSpec:
    if not src.has(section):
        raise ConfigError(f"{src.path}: missing section [{section}]")
    kind = src.raw(section, "type")
    if kind not in INITIAL_KINDS:
        raise src.error(section, "type", f"unknown initial data type {kind!r} (one of {', '.join(INITIAL_KINDS)})")
    allowed = {"type", "amplitude", "width", "center", "value", "k"}
    src.unknown_keys(section, allowed)
    center = tuple(src.floats(section, "center", "0"))
    if len(center) not in (1, dim):
        raise src.error(section, "center", f"needs 1 or {dim} coordinates")
    mode = src.floats(section, "k", "1")
    if any(m != int(m) for m in mode) or len(mode) not in (1, dim):
        raise src.error(section, "k", f"needs 1 or {dim} integer mode numbers")
    return InitialSpec(
        kind=kind,
        amplitude=src.num(section, "amplitude", 1.0),
        width=src.num(section, "width", 1.0, check=lambda w: w > 0, what="width > 0"),
        center=center,
        value=src.num(section, "value", 0.0),
        mode=tuple(int(m) for m in mode),
    )


def load_experiment(path) -> ExperimentConfig:
    """Read and validate a ``simulate`` config; errors name file, line and key."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    src = _Source(path)
    src.unknown_keys("system", {"gamma1", "gamma2", "p", "q", "nonlinearity", "sign_f", "sign_g"})
    src.unknown_keys("grid", {"dim", "l", "m"})
    src.unknown_keys("time", {"t_end", "steps"})
    src.unknown_keys("analysis", {"decay_verify", "decay_window", "weak_residual", "blowup_bound", "positivity"})
    src.unknown_keys("output", {"blowup_threshold", "store_every", "seed", "path"})

    unit = lambda x: 0 < x < 1
    g1 = src.num("system", "gamma1", check=unit, what="0 < gamma1 < 1")
    g2 = src.num("system", "gamma2", check=unit, what="0 < gamma2 < 1")
    p = src.num("system", "p", check=lambda x: x >= 1, what="p >= 1")
    q = src.num("system", "q", check=lambda x: x >= 1, what="q >= 1")
    form = src.raw("system", "nonlinearity", "pure_power")
    if form not in ("pure_power", "signed_power"):
        raise src.error("system", "nonlinearity", f"must be pure_power or signed_power, got {form!r}")
    sign = lambda x: x in (-1, 0, 1)
    sf = src.num("system", "sign_f", 1, kind=int, check=sign, what="sign in {-1, 0, 1}")
    sg = src.num("system", "sign_g", 1, kind=int, check=sign, what="sign in {-1, 0, 1}")
    params = SystemParams(g1, g2, p, q, form, sf, sg)

    dim = src.num("grid", "dim", kind=int, check=lambda d: d in (1, 2), what="dim is 1 or 2")
    L = src.num("grid", "L", check=lambda x: x > 0, what="L > 0")
    M = src.num("grid", "M", kind=int, check=lambda m: m >= 16 and m & (m - 1) == 0,
                what="M is a power of two >= 16")
    grid = GridSpec(dim, L, M)

    t_end = src.num("time", "t_end", check=lambda x: x > 0, what="t_end > 0")
    steps = src.num("time", "steps", kind=int, check=lambda n: n >= 1, what="steps >= 1")

    u0 = _initial(src, "initial.u", dim)
    v0 = _initial(src, "initial.v", dim)

    window = src.floats("analysis", "decay_window", "1 inf")
    if len(window) != 2 or not 0 <= window[0] < window[1]:
        raise src.error("analysis", "decay_window", "needs two numbers lo < hi")
    if math.isinf(window[1]):
        window[1] = t_end
    elif window[1] > t_end:
        raise src.error("analysis", "decay_window", f"ends after t_end={t_end}")

    thr = src.raw("output", "blowup_threshold", "default")
    if thr != "default":
        try:
            thr = float(thr)
        except ValueError:
            raise src.error("output", "blowup_threshold", f"expected a number, got {thr!r}") from None
        if not thr > 0:
            raise src.error("output", "blowup_threshold", "must be positive")
    else:
        thr = None

    cfg = ExperimentConfig(
        path=path, params=params, grid=grid, time=TimeGrid(t_end, steps), u0=u0, v0=v0,
        decay_verify=src.boolean("analysis", "decay_verify", False),
        decay_window=tuple(window),
        weak_residual=src.boolean("analysis", "weak_residual", False),
        blowup_bound=src.boolean("analysis", "blowup_bound", False),
        positivity=src.boolean("analysis", "positivity", False),
        blowup_threshold=thr,
        store_every=src.num("output", "store_every", 1, kind=int, check=lambda n: n >= 0, what=">= 0"),
        seed=src.num("output", "seed", 0, kind=int, check=lambda s: 0 <= s < 2 ** 64, what="0 <= seed < 2^64"),
        out=Path(src.raw("output", "path", ".")) if src.has("output", "path") else None,
    )
    if cfg.weak_residual and cfg.store_every != 1:
        raise src.error("output", "store_every", "weak_residual needs fields at every step (store_every = 1)")
    if thr is not None:
        u, v = cfg.initial_fields()
        init = np.abs(u.values).max() + np.abs(v.values).max()
        if not thr > init:
            raise src.error("output", "blowup_threshold", f"must exceed the initial sup norms ({init:.6g})")
    return cfg


@dataclass
class SweepConfig:
    path: Path
    gamma1: list
    gamma2: list
    p: list
    q: list
    N: list
    random_points: int = 0
    seed: int = 0

    def points(self):
        if self.random_points:
            return None
        for g1 in self.gamma1:
            for g2 in self.gamma2:
                for p in self.p:
                    for q in self.q:
                        for N in self.N:
                            yield g1, g2, p, q, N


def _axis(src: _Source, key: str, integer: bool = False) -> list:
    """``a b c`` (explicit list) or ``start:stop:count`` (inclusive linspace)."""
    text = src.raw("sweep", key)
    try:
        if ":" in text:
            a, b, n = text.split(":")
            vals = np.linspace(float(a), float(b), int(n)).tolist()
        else:
            vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise src.error("sweep", key, f"expected a list or start:stop:count, got {text!r}") from None
    if not vals:
        raise src.error("sweep", key, "empty axis")
    if integer:
        if any(v != int(v) or v < 1 for v in vals):
            raise src.error("sweep", key, "dimensions must be positive integers")
        vals = [int(v) for v in vals]
    return vals


def load_sweep(path) -> SweepConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    src = _Source(path)
    if not src.has("sweep"):
        raise ConfigError(f"{path}: missing section [sweep]")
    src.unknown_keys("sweep", {"gamma1", "gamma2", "p", "q", "n", "random_points", "seed"})
    n_random = src.num("sweep", "random_points", 0, kind=int, check=lambda n: n >= 0, what=">= 0")
    seed = src.num("sweep", "seed", 0, kind=int, check=lambda s: 0 <= s < 2 ** 64, what="0 <= seed < 2^64")
    if n_random:
        return SweepConfig(path, [], [], [], [], [], n_random, seed)
    cfg = SweepConfig(path, _axis(src, "gamma1"), _axis(src, "gamma2"), _axis(src, "p"), _axis(src, "q"),
                      _axis(src, "N", integer=True), 0, seed)
    for key, vals in (("gamma1", cfg.gamma1), ("gamma2", cfg.gamma2)):
        if any(not 0 < g < 1 for g in vals):
            raise src.error("sweep", key, "values must lie in (0, 1)")
    for key, vals in (("p", cfg.p), ("q", cfg.q)):
        if any(v < 1 for v in vals):
            raise src.error("sweep", key, "values must be >= 1")
    return cfg
