"""Spectral solver for the mild formulation of the coupled fractional system.

Per Fourier mode with ``lam = |k|^2``::

    u_n = E_{g,1}(-lam t_n^g) u_0 + sum_{m=1}^{n} K_m(lam) F_{n-m}
    K_m(lam) = int_{(m-1)h}^{mh} s^{g-1} E_{g,g}(-lam s^g) ds
             = [s^g E_{g,g+1}(-lam s^g)]_{(m-1)h}^{mh}

so the homogeneous part and the singular kernel are both integrated
exactly; ``F_j`` is the nonlinearity held constant on cell ``[t_j, t_{j+1}]``
at an explicit midpoint value ``1.5 f(v_j) - 0.5 f(v_{j-1})``.
The history sum is a direct O(n^2) convolution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np

from .fieldgrid import GridField, GridSpec, lp_norm
from .fraccalc import TimeGrid
from .specfun import mittag_leffler
from .subord import SubordOperator

Form = Literal["pure_power", "signed_power"]

TRAJECTORY_HEADER = [
    "t", "norm_u_1", "norm_u_s1", "norm_u_inf",
    "norm_v_1", "norm_v_s2", "norm_v_inf", "z_value", "status",
]


class SolverDiverged(RuntimeError):
    """Non-finite field values: a numerical failure, not a detected blow-up."""


@dataclass(frozen=True)
class SystemParams:
    """``D^g1 u - Lap u = f(v)``, ``D^g2 v - Lap v = g(u)``.

    ``f(v) = sign_f |v|^p`` (pure_power) or ``sign_f |v|^(p-1) v``
    (signed_power); likewise ``g``.  A sign of 0 switches the coupling
    off, which gives the linear reference problem.
    """

    gamma1: float
    gamma2: float
    p: float
    q: float
    form: Form = "pure_power"
    sign_f: int = 1
    sign_g: int = 1

    def __post_init__(self):
        for name in ("gamma1", "gamma2"):
            g = getattr(self, name)
            if not 0.0 < g < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {g}")
        for name in ("p", "q"):
            if not getattr(self, name) >= 1.0:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.form not in ("pure_power", "signed_power"):
            raise ValueError(f"unknown nonlinearity form {self.form!r}")
        for name in ("sign_f", "sign_g"):
            if getattr(self, name) not in (-1, 0, 1):
                raise ValueError(f"{name} must be -1, 0 or 1, got {getattr(self, name)}")

    @property
    def linear(self) -> bool:
        return self.sign_f == 0 and self.sign_g == 0

    def _power(self, x: np.ndarray, e: float, sign: int) -> np.ndarray:
        if sign == 0:
            return np.zeros_like(x)
        a = np.abs(x) ** e
        if self.form == "signed_power":
            a = a * np.sign(x)
        return sign * a

    def f(self, v: np.ndarray) -> np.ndarray:
        return self._power(v, self.p, self.sign_f)

    def g(self, u: np.ndarray) -> np.ndarray:
        return self._power(u, self.q, self.sign_g)


@dataclass
class Trajectory:
    params: SystemParams
    spec: GridSpec
    grid: TimeGrid
    s1: float
    s2: float
    times: np.ndarray
    norms: dict  # name -> array over times
    status: str  # "completed" | "blowup_detected"
    t_blowup: Optional[float] = None  # last stable node
    t_blowup_upper: Optional[float] = None  # first node over the threshold
    field_steps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    u_fields: Optional[np.ndarray] = None
    v_fields: Optional[np.ndarray] = None
    u0: Optional[GridField] = None
    v0: Optional[GridField] = None

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def has_full_fields(self) -> bool:
        return self.u_fields is not None and len(self.field_steps) == len(self.times)

    def rows(self):
        last = len(self.times) - 1
        for i, t in enumerate(self.times):
            yield [
                t, self.norms["u_1"][i], self.norms["u_s1"][i], self.norms["u_inf"][i],
                self.norms["v_1"][i], self.norms["v_s2"][i], self.norms["v_inf"][i],
                self.norms["z"][i], self.status if i == last else "ok",
            ]

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_HEADER)
            for row in self.rows():
                w.writerow([repr(float(c)) if not isinstance(c, str) else c for c in row])


def _kernel_table(k2_unique: np.ndarray, gamma: float, h: float, n: int) -> np.ndarray:
    """``K[m, i]`` for ``m = 0..n`` (row 0 unused) on distinct wavenumbers."""
    sg = (h * np.arange(n + 1)) ** gamma
    prim = sg[:, None] * mittag_leffler(-np.outer(sg, k2_unique), gamma, gamma + 1.0, extended=True)
    K = np.zeros_like(prim)
    K[1:] = np.diff(prim, axis=0)
    return K


def _cell_values(now: np.ndarray, prev: Optional[np.ndarray]) -> np.ndarray:
    """Explicit midpoint value of a nonlinearity on the next cell."""
    if prev is None:
        return now
    ext = 1.5 * now - 0.5 * prev
    # fall back to the left value where extrapolation would flip the sign
    bad = np.sign(ext) != np.sign(now)
    return np.where(bad, now, ext)


class _History:
    """Fourier history of cell values, stored newest-last in reversed time order."""

    def __init__(self, n: int, inv: np.ndarray, kernel: np.ndarray, nmodes: int):
        self.n = n
        # real/imag interleaved so the history sum is a real contraction
        self.buf = np.zeros((n + 1, 2 * nmodes))
        kfull = kernel[:, inv]
        self.kern = np.repeat(kfull, 2, axis=1)

    def push(self, j: int, coeffs: np.ndarray) -> None:
        self.buf[self.n - j] = coeffs.ravel().view(float)

    def conv(self, k: int) -> np.ndarray:
        # sum_{m=1}^{k} K_m F_{k-m}; F_{k-m} lives in row n-k+m
        acc = np.einsum("ij,ij->j", self.kern[1:k + 1], self.buf[self.n - k + 1:self.n + 1])
        return acc.view(complex)


def solve(
    params: SystemParams,
    u0: GridField,
    v0: GridField,
    grid: TimeGrid,
    blowup_threshold: Optional[float] = None,
    *,
    norm_exponents: tuple = (2.0, 2.0),
    store_every: int = 1,
    chi: Optional[GridField] = None,
) -> Trajectory:
    """Integrate the mild system on ``grid``.

    ``blowup_threshold`` defaults to ``1e8 * (||u0||_inf + ||v0||_inf)``
    (or 1e8 for zero data).  Fields are kept every ``store_every`` steps
    (0 keeps none).  ``chi`` is the weight for the Z functional; by default
    it is built from the grid when the box is large enough, otherwise the
    Z column is NaN.
    """
    spec = u0.spec
    if v0.spec != spec:
        raise ValueError("u0 and v0 live on different grids")
    s1, s2 = map(float, norm_exponents)
    init = lp_norm(u0, math.inf) + lp_norm(v0, math.inf)
    if blowup_threshold is None:
        blowup_threshold = 1e8 * init if init > 0 else 1e8
    if not blowup_threshold > init:
        raise ValueError(f"blow-up threshold {blowup_threshold} must exceed the initial norms {init}")
    if chi is None:
        from .criteria import chi_weight

        try:
            chi = chi_weight(spec)
        except ValueError:
            chi = None
    chi_vals = None if chi is None else chi.values * spec.cell_volume

    n, h = grid.n_steps, grid.dt
    times = grid.nodes
    g1, g2 = params.gamma1, params.gamma2
    uniq, inv = np.unique(spec.k2, return_inverse=True)
    inv = inv.ravel()
    nmodes = spec.k2.size

    u0_hat = spec.rfft(u0.values)
    v0_hat = spec.rfft(v0.values)
    linear = params.linear
    if not linear:
        hist_u = _History(n, inv, _kernel_table(uniq, g1, h, n), nmodes)
        hist_v = _History(n, inv, _kernel_table(uniq, g2, h, n), nmodes)

    names = ("u_1", "u_s1", "u_inf", "v_1", "v_s2", "v_inf", "z")
    norms = {k: np.full(n + 1, np.nan) for k in names}

    def record(i, u, v):
        norms["u_1"][i] = lp_norm(u, 1, spec)
        norms["u_s1"][i] = lp_norm(u, s1, spec)
        norms["u_inf"][i] = np.abs(u).max()
        norms["v_1"][i] = lp_norm(v, 1, spec)
        norms["v_s2"][i] = lp_norm(v, s2, spec)
        norms["v_inf"][i] = np.abs(v).max()
        norms["z"][i] = np.nan if chi_vals is None else float(np.sum(chi_vals * (u + v)))

    keep = []
    u_store, v_store = [], []

    def store(i, u, v):
        if store_every and i % store_every == 0:
            keep.append(i)
            u_store.append(u.copy())
            v_store.append(v.copy())

    u, v = u0.values, v0.values
    record(0, u, v)
    store(0, u, v)
    fu_prev = fv_prev = None
    fu, fv = params.g(u), params.f(v)  # fu drives v, fv drives u
    status, last = "completed", n
    t_lo = t_hi = None

    for k in range(1, n + 1):
        pu = mittag_leffler(-uniq * times[k] ** g1, g1, 1.0, extended=True)[inv]
        pv = mittag_leffler(-uniq * times[k] ** g2, g2, 1.0, extended=True)[inv]
        u_hat = pu.reshape(u0_hat.shape) * u0_hat
        v_hat = pv.reshape(v0_hat.shape) * v0_hat
        if not linear:
            hist_u.push(k - 1, spec.rfft(_cell_values(fv, fv_prev)))
            hist_v.push(k - 1, spec.rfft(_cell_values(fu, fu_prev)))
            u_hat = u_hat + hist_u.conv(k).reshape(u_hat.shape)
            v_hat = v_hat + hist_v.conv(k).reshape(v_hat.shape)
        u = spec.irfft(u_hat)
        v = spec.irfft(v_hat)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise SolverDiverged(f"non-finite field values at t={times[k]:.6g} (step {k})")
        if np.abs(u).max() + np.abs(v).max() > blowup_threshold:
            status, last = "blowup_detected", k - 1
            t_lo, t_hi = float(times[k - 1]), float(times[k])
            break
        record(k, u, v)
        store(k, u, v)
        if not linear:
            fu_prev, fv_prev = fu, fv
            fu, fv = params.g(u), params.f(v)

    sl = slice(0, last + 1)
    return Trajectory(
        params=params, spec=spec, grid=grid, s1=s1, s2=s2,
        times=times[sl].copy(),
        norms={k: a[sl] for k, a in norms.items()},
        status=status, t_blowup=t_lo, t_blowup_upper=t_hi,
        field_steps=np.array(keep, dtype=int),
        u_fields=np.array(u_store) if keep else None,
        v_fields=np.array(v_store) if keep else None,
        u0=u0, v0=v0,
    )


@dataclass
class PositivityReport:
    ok: bool
    worst_lower_violation: float  # max over stored steps of P u0 - u (and P v0 - v)
    min_value: float  # smallest field value seen
    checked_steps: int
    tol: float

    def __str__(self):
        verdict = "ok" if self.ok else "VIOLATED"
        return (f"positivity {verdict}: worst (P u0 - u) = {self.worst_lower_violation:.3e}, "
                f"min value = {self.min_value:.3e} over {self.checked_steps} steps")


def positivity_check(traj: Trajectory, u0: GridField, v0: GridField, tol: float = 1e-9,
                     floor: float = 1e-12) -> PositivityReport:
    """Check ``u(t_n) >= P_g1(t_n) u0 - tol`` and positivity of both fields.

    Positivity allows a roundoff floor of ``floor * max|field|``: far in the
    tails the exact solution is below double precision and the FFT returns
    values of either sign at the 1e-17 level.
    """
    if traj.u_fields is None:
        raise ValueError("positivity_check needs stored fields")
    spec = traj.spec
    pu_op, pv_op = SubordOperator(traj.params.gamma1), SubordOperator(traj.params.gamma2)
    worst, minval, ok = -math.inf, math.inf, True
    for idx, step in enumerate(traj.field_steps):
        t = float(traj.times[step])
        u, v = traj.u_fields[idx], traj.v_fields[idx]
        lower_u = pu_op.p_apply(u0, t).values
        lower_v = pv_op.p_apply(v0, t).values
        viol = max(float(np.max(lower_u - u)), float(np.max(lower_v - v)))
        worst = max(worst, viol)
        m = min(float(u.min()), float(v.min()))
        minval = min(minval, m)
        scale = max(np.abs(u).max(), np.abs(v).max())
        if viol > tol or m < -floor * scale or (scale > 0 and m <= 0 and floor == 0):
            ok = False
    return PositivityReport(ok, worst, minval, len(traj.field_steps), tol)


def save_trajectory(traj: Trajectory, path: Union[str, Path]) -> None:
    """Store a trajectory (norms, fields if kept, data, parameters) as ``.npz``."""
    p = traj.params
    arrays = {
        "times": traj.times,
        "field_steps": traj.field_steps,
        "u0": traj.u0.values, "v0": traj.v0.values,
        "meta_float": np.array([p.gamma1, p.gamma2, p.p, p.q, traj.spec.half_width,
                                traj.grid.t_end, traj.s1, traj.s2,
                                np.nan if traj.t_blowup is None else traj.t_blowup,
                                np.nan if traj.t_blowup_upper is None else traj.t_blowup_upper]),
        "meta_int": np.array([p.sign_f, p.sign_g, traj.spec.dim, traj.spec.points, traj.grid.n_steps]),
        "meta_str": np.array([p.form, traj.status]),
    }
    for k, a in traj.norms.items():
        arrays[f"norm_{k}"] = a
    if traj.u_fields is not None:
        arrays["u_fields"] = traj.u_fields
        arrays["v_fields"] = traj.v_fields
    np.savez_compressed(path, **arrays)


def load_trajectory(path: Union[str, Path]) -> Trajectory:
    with np.load(path, allow_pickle=False) as z:
        g1, g2, pp, qq, L, t_end, s1, s2, tb, tbu = z["meta_float"].tolist()
        sf, sg, dim, M, n = z["meta_int"].tolist()
        form, status = z["meta_str"].tolist()
        params = SystemParams(g1, g2, pp, qq, form, sf, sg)
        spec = GridSpec(dim, L, M)
        return Trajectory(
            params=params, spec=spec, grid=TimeGrid(t_end, n), s1=s1, s2=s2,
            times=z["times"],
            norms={k[5:]: z[k] for k in z.files if k.startswith("norm_")},
            status=status,
            t_blowup=None if math.isnan(tb) else tb,
            t_blowup_upper=None if math.isnan(tbu) else tbu,
            field_steps=z["field_steps"],
            u_fields=z["u_fields"] if "u_fields" in z.files else None,
            v_fields=z["v_fields"] if "v_fields" in z.files else None,
            u0=GridField(spec, z["u0"]), v0=GridField(spec, z["v0"]),
        )
