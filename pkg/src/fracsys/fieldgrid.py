"""Periodic grids on [-L, L)^N and the heat semigroup in Fourier space."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``M`` points per axis on ``[-L, L)^N``."""

    dim: int
    half_width: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"grid dim must be 1 or 2, got {self.dim}")
        if not self.half_width > 0:
            raise ValueError(f"grid half_width must be positive, got {self.half_width}")
        m = self.points
        if int(m) != m or m < 16 or (int(m) & (int(m) - 1)):
            raise ValueError(f"grid points must be a power of two >= 16, got {m}")

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.points)

    @cached_property
    def coords(self) -> tuple:
        """Coordinate arrays, one per axis, broadcast to the field shape."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def k2(self) -> np.ndarray:
        """``|k|^2`` on the real-FFT layout (last axis halved)."""
        step = math.pi / self.half_width
        full = step * np.fft.fftfreq(self.points, d=1.0 / self.points)
        half = step * np.fft.rfftfreq(self.points, d=1.0 / self.points)
        axes = [full] * (self.dim - 1) + [half]
        grids = np.meshgrid(*axes, indexing="ij")
        return sum(g * g for g in grids)

    def rfft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values, axes=tuple(range(-self.dim, 0)))

    def irfft(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(coeffs, s=self.shape, axes=tuple(range(-self.dim, 0)))


@dataclass(frozen=True, eq=False)
class GridField:
    """Real field sampled on a :class:`GridSpec`.  Values are copied and frozen."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.spec.shape:
            if vals.size == self.points_total:
                vals = vals.reshape(self.spec.shape)
            else:
                raise ValueError(f"field has {vals.size} values, grid needs {self.points_total}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def points_total(self) -> int:
        return self.spec.points ** self.spec.dim

    def with_values(self, values) -> "GridField":
        return GridField(self.spec, values)

    def integral(self) -> float:
        return float(self.values.sum() * self.spec.cell_volume)

    def __add__(self, other: "GridField") -> "GridField":
        _same_grid(self, other)
        return GridField(self.spec, self.values + other.values)

    def __mul__(self, c: float) -> "GridField":
        return GridField(self.spec, self.values * float(c))

    __rmul__ = __mul__


def _same_grid(a: GridField, b: GridField) -> None:
    if a.spec != b.spec:
        raise ValueError(f"grid mismatch: {a.spec} vs {b.spec}")


# -- constructors -----------------------------------------------------------

def constant(spec: GridSpec, value: float) -> GridField:
    return GridField(spec, np.full(spec.shape, float(value)))


def gaussian(spec: GridSpec, amplitude: float = 1.0, width: float = 1.0,
             center: Union[float, Sequence[float]] = 0.0) -> GridField:
    """``amplitude * exp(-|x - center|^2 / width^2)``."""
    if not width > 0:
        raise ValueError(f"gaussian width must be positive, got {width}")
    c = np.broadcast_to(np.asarray(center, dtype=float), (spec.dim,))
    r2 = sum((x - ci) ** 2 for x, ci in zip(spec.coords, c))
    return GridField(spec, amplitude * np.exp(-r2 / width ** 2))


def fourier_mode(spec: GridSpec, mode: Union[int, Sequence[int]], amplitude: float = 1.0) -> GridField:
    """``amplitude * cos(k . (x + L))`` with ``k = (pi/L) * mode`` (integer mode per axis)."""
    m = np.broadcast_to(np.asarray(mode, dtype=int), (spec.dim,))
    step = math.pi / spec.half_width
    phase = sum(step * mi * (x + spec.half_width) for mi, x in zip(m, spec.coords))
    return GridField(spec, amplitude * np.cos(phase))


def mode_wavenumber2(spec: GridSpec, mode: Union[int, Sequence[int]]) -> float:
    m = np.broadcast_to(np.asarray(mode, dtype=float), (spec.dim,))
    return float(np.sum((math.pi / spec.half_width * m) ** 2))


# -- heat semigroup and norms -----------------------------------------------

def heat_symbol(spec: GridSpec, t: float) -> np.ndarray:
    return np.exp(-spec.k2 * t)


def heat_apply(f: GridField, t: float) -> GridField:
    """``T(t) f``: multiply each Fourier mode by ``exp(-|k|^2 t)``."""
    if t < 0:
        raise ValueError(f"heat_apply needs t >= 0, got {t}")
    if t == 0:
        return f
    spec = f.spec
    return GridField(spec, spec.irfft(spec.rfft(f.values) * heat_symbol(spec, t)))


def lp_norm(f: Union[GridField, np.ndarray], p: float, spec: GridSpec | None = None) -> float:
    """Discrete ``L^p`` norm (Riemann sum with the cell volume); ``p = inf`` gives max |f|."""
    if isinstance(f, GridField):
        values, spec = f.values, f.spec
    else:
        values = np.asarray(f)
        if spec is None:
            raise ValueError("lp_norm on a raw array needs the grid spec")
    if p == math.inf:
        return float(np.max(np.abs(values)))
    if not p >= 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(values)
    top = a.max()
    if top == 0:
        return 0.0
    # scale out the max so large p does not overflow
    return float(top * (np.sum((a / top) ** p) * spec.cell_volume) ** (1.0 / p))


def boundary_max(f: GridField) -> float:
    """Largest |value| on the outer layer of the box (truncation diagnostic)."""
    v = np.abs(f.values)
    edges = [np.take(v, [0, -1], axis=ax).max() for ax in range(f.spec.dim)]
    return float(max(edges))


# -- CSV snapshots ------------------------------------------------------------

def write_csv(f: GridField, path: Union[str, Path]) -> None:
    """Row-major snapshot with header ``x,value`` (1D) or ``x,y,value`` (2D)."""
    spec = f.spec
    names = ["x", "y"][: spec.dim] + ["value"]
    cols = [c.ravel() for c in spec.coords] + [f.values.ravel()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([repr(float(c)) for c in row])


def read_csv(path: Union[str, Path], half_width: float) -> GridField:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    dim = len(header) - 1
    points = round(len(body) ** (1.0 / dim))
    spec = GridSpec(dim, half_width, points)
    return GridField(spec, body[:, -1].reshape(spec.shape))
