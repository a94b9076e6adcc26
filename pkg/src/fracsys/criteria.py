"""Closed-form theory for the coupled system: exponents, regions, bounds.

Everything here is arithmetic on ``SystemParams`` plus a few grid-level
checks (the weight chi, the Z functional, decay and weak-form residuals)
that consume solver trajectories.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
from scipy.special import k1

from .fieldgrid import GridField, GridSpec, _same_grid
from .fraccalc import TestFuncSpec, caputo_right_testfunc
from .mildsolver import SystemParams

CONJUGATE_GUARD = 1e-12
INVARIANT_TOL = 1e-12
CHI_TAIL_TOL = 1e-8


class EmptyWindow(ValueError):
    """The delta window for global existence is empty."""


class NotApplicable(ValueError):
    """An analysis was asked of a trajectory it does not apply to."""


def _pq(params: SystemParams) -> float:
    pq1 = params.p * params.q - 1.0
    if not pq1 > 0:
        raise ValueError(f"need pq > 1, got p={params.p}, q={params.q}")
    return pq1


def _check_dim(N: int) -> None:
    if int(N) != N or N < 1:
        raise ValueError(f"dimension must be a positive integer, got {N}")


# {{{ global existence: window, exponents, dimension condition

def delta_window(params: SystemParams, N: int) -> tuple:
    """Open interval of admissible delta (delta > 0 is also required)."""
    _check_dim(N)
    g1, g2, p, q = params.gamma1, params.gamma2, params.p, params.q
    pq1 = _pq(params)
    lo = max(0.0,
             1.0 - pq1 / (g2 * q * (p + 1.0)),
             1.0 - g1 * pq1 / (g2 * (p + 1.0)),
             1.0 - pq1 / (q + 1.0))
    hi = min(1.0, N * pq1 / (2.0 * q * (p + 1.0)))
    if not lo < hi:
        raise EmptyWindow(f"delta window is empty: lower {lo:.6g} >= upper {hi:.6g}")
    return lo, hi


def critical_rhs(params: SystemParams) -> float:
    g1, g2, p, q = params.gamma1, params.gamma2, params.p, params.q
    return ((g2 - g1) * p * q + q * g2 + g1) / (g1 * _pq(params))


def global_condition(params: SystemParams, N: int) -> bool:
    """``N/2 >= ((g2-g1)pq + q g2 + g1) / (g1 (pq-1))`` under the ordering g1 <= g2, p <= q."""
    _check_dim(N)
    if not params.gamma1 <= params.gamma2:
        raise ValueError(f"need gamma1 <= gamma2, got {params.gamma1} > {params.gamma2}")
    if not params.q >= params.p:
        raise ValueError(f"need q >= p, got p={params.p} > q={params.q}")
    return N / 2.0 >= critical_rhs(params)


@dataclass(frozen=True)
class ExponentSet:
    delta: float
    r1: float
    r2: float
    s1: float
    s2: float
    sigma1: float
    sigma2: float
    critical_rhs: float
    p: float
    q: float

    def __post_init__(self):
        tol = INVARIANT_TOL
        checks = {
            "s1 > q": self.s1 > self.q,
            "s2 > p": self.s2 > self.p,
            "s1 > r1": self.s1 > self.r1,
            "s2 > r2": self.s2 > self.r2,
            # r = 1 exactly when the dimension condition is an equality
            "r1 >= 1": self.r1 >= 1.0 - tol,
            "r2 >= 1": self.r2 >= 1.0 - tol,
            "p sigma2 < 1": self.p * self.sigma2 < 1.0,
            "q sigma1 < 1": self.q * self.sigma1 < 1.0,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ValueError(f"exponent invariants violated: {', '.join(bad)} ({self})")

    def identities(self, params: SystemParams, N: int) -> dict:
        """Residuals of the step-one identities (all should vanish)."""
        g1, g2, p, q, d = params.gamma1, params.gamma2, params.p, params.q, self.delta
        return {
            "sigma1": self.sigma1 - 0.5 * N * g1 * (1 / self.r1 - 1 / self.s1),
            "sigma2": self.sigma2 - 0.5 * N * g2 * (1 / self.r2 - 1 / self.s2),
            "balance": self.sigma1 + g1 - g1 * d + (g2 - g2 * d - q * self.sigma1) * p,
            "delta_p": 0.5 * N * (p / self.s2 - 1 / self.s1) - d,
            "delta_q": 0.5 * N * (q / self.s1 - 1 / self.s2) - d,
        }

    def orderings(self) -> dict:
        return {
            "p sigma2 < 1": self.p * self.sigma2 < 1,
            "q sigma1 < 1": self.q * self.sigma1 < 1,
            "p s1 > s2": self.p * self.s1 > self.s2,
            "q s2 > s1": self.q * self.s2 > self.s1,
        }


def exponent_set(params: SystemParams, N: int, delta: Optional[float] = None) -> ExponentSet:
    """Exponents for a delta in the window (midpoint by default)."""
    lo, hi = delta_window(params, N)
    if delta is None:
        delta = 0.5 * (lo + hi)
    if not lo < delta < hi:
        raise ValueError(f"delta={delta} outside the window ({lo:.6g}, {hi:.6g})")
    g1, g2, p, q = params.gamma1, params.gamma2, params.p, params.q
    pq1 = _pq(params)
    return ExponentSet(
        delta=delta,
        r1=N * g1 * pq1 / (2.0 * (g1 * (1 + delta * p) + g2 * p * (1 - delta))),
        r2=N * g2 * pq1 / (2.0 * (g2 * (1 + delta * q) + g1 * q * (1 - delta))),
        s1=N * pq1 / (2.0 * delta * (p + 1)),
        s2=N * pq1 / (2.0 * delta * (q + 1)),
        sigma1=(1 - delta) * (g1 + g2 * p) / pq1,
        sigma2=(1 - delta) * (g2 + g1 * q) / pq1,
        critical_rhs=critical_rhs(params),
        p=p, q=q,
    )


def infinity_decay_rates(params: SystemParams, exps: ExponentSet) -> tuple:
    """``L^inf`` rates for u and v from the final stated bounds (valid when ``qN/(2 s1) < 1``)."""
    g1, g2, p, q, d = params.gamma1, params.gamma2, params.p, params.q, exps.delta
    pq1 = _pq(params)
    return ((g1 + g1 * p * d + (1 - d) * p * g2) / pq1,
            (g2 + g2 * q * d + (1 - d) * q * g1) / pq1)

# }}}


# {{{ blow-up: regions, test-function exponents, Fujita edge

def _region_bounds(g1, g2, p, q) -> list:
    pq1 = p * q - 1.0
    return [(p * g2 + g1) / (g1 * pq1),
            (q * g1 + g2) / (g1 * pq1),
            (p * q * (g1 - g2) + q * g1 + g2) / (g1 * pq1),
            (p + 1.0) / pq1]


def blowup_regions(params: SystemParams, N: int) -> tuple:
    """Truth of the two min-conditions; the second mirrors ``(p, g1) <-> (q, g2)``."""
    _check_dim(N)
    g1, g2, p, q = params.gamma1, params.gamma2, params.p, params.q
    if not (p > 1 and q > 1):
        raise ValueError("blowup_regions needs p > 1 and q > 1 (see fujita_edge)")
    one = N / 2.0 < min(_region_bounds(g1, g2, p, q))
    two = N / 2.0 < min(_region_bounds(g2, g1, q, p))
    return one, two


def conjugate(p: float) -> float:
    if p <= 1.0 + CONJUGATE_GUARD:
        raise ValueError(f"conjugate exponent needs p > 1, got {p}")
    return p / (p - 1.0)


def blowup_exponents(params: SystemParams, N: int) -> tuple:
    """``(delta1, delta2)`` of the test-function argument, scaling ``lambda = 4/g1``."""
    _check_dim(N)
    g1, g2, p, q = params.gamma1, params.gamma2, params.p, params.q
    ip, iq = 1.0 / conjugate(p), 1.0 / conjugate(q)
    A = 4.0 / g1 + 2.0 * N
    scale = p * q / (p * q - 1.0)
    t1 = (4.0 / g1) * (g1 - 1.0)
    t2 = (4.0 / g1) * (g2 - 1.0)
    d1 = max((-4.0 * g2 / (q * g1) + A * ip / q - 4.0 + A * iq) * scale + t1,
             (-4.0 / q + A * ip / q - 4.0 + A * iq) * scale + t1)
    d2 = max((-4.0 * g2 / g1 + A * ip - 4.0 / p + A * iq / p) * scale + t2,
             (-4.0 + A * ip - 4.0 / p + A * iq / p) * scale + t2)
    return d1, d2


def fujita_edge(params: SystemParams, N: int) -> bool:
    """Blow-up criterion when exactly one of p, q equals 1."""
    _check_dim(N)
    p1, q1 = params.p == 1.0, params.q == 1.0
    if p1 == q1:
        raise ValueError("fujita_edge needs exactly one of p, q equal to 1")
    other = params.q if p1 else params.p
    return 1.0 < other < 1.0 + 2.0 / N

# }}}


# {{{ chi weight, Z functional, ODE comparison

def chi_mass(N: int) -> float:
    """``int exp(-sqrt(N^2 + |x|^2)) dx`` over R^N (N = 1, 2)."""
    if N == 1:
        return 2.0 * k1(1.0)
    if N == 2:
        return 2.0 * math.pi * math.exp(-2.0) * 3.0
    raise ValueError(f"chi_mass implemented for N in (1, 2), got {N}")


def chi_weight(spec: GridSpec) -> GridField:
    """Normalized weight ``chi`` with discrete integral exactly 1.

    Raises ``ValueError`` when the discrete mass misses the exact mass on
    R^N by more than ``CHI_TAIL_TOL``: either the box cuts the tail or the
    spacing is too coarse (the Riemann sum error is about exp(-2 pi N / dx)).
    """
    N = spec.dim
    raw = np.exp(-np.sqrt(N * N + spec.radius ** 2))
    total = raw.sum() * spec.cell_volume
    tail = abs(1.0 - total / chi_mass(N))
    if tail > CHI_TAIL_TOL:
        raise ValueError(f"grid (L={spec.half_width}, M={spec.points}) misses chi's mass by {tail:.2e}; "
                         "enlarge L or refine M")
    return GridField(spec, raw / total)


def z_functional(u: GridField, v: GridField, chi: GridField) -> float:
    _same_grid(u, v)
    _same_grid(u, chi)
    return float(np.sum(chi.values * (u.values + v.values)) * u.spec.cell_volume)


def blowup_threshold_z(p: float) -> float:
    return 2.0 ** (p / (p - 1.0))


def _ode_singularity(p: float, z0: float) -> float:
    if not p > 1:
        raise ValueError(f"need p > 1, got {p}")
    if not z0 > blowup_threshold_z(p):
        raise ValueError(f"need Z0 > 2^(p/(p-1)) = {blowup_threshold_z(p):.6g}, got {z0}")
    return math.log(1.0 - 2.0 ** p * z0 ** (1.0 - p)) / (2.0 * (1.0 - p))


def blowup_time_bound(p: float, gamma: float, z0: float) -> float:
    """Upper bound on the blow-up time when ``Z0 > 2^(p/(p-1))``."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    return (_ode_singularity(p, z0) * math.gamma(gamma + 1.0)) ** (1.0 / gamma)


def ode_oracle(p: float, z0: float, t):
    """Closed-form solution of ``w' = 2^(1-p) w^p - 2 w``, ``w(0) = z0``."""
    if not p > 1:
        raise ValueError(f"need p > 1, got {p}")
    tarr = np.asarray(t, dtype=float)
    if z0 > blowup_threshold_z(p) and np.any(tarr >= _ode_singularity(p, z0)):
        raise ValueError(f"t reaches the singularity time {_ode_singularity(p, z0):.6g}")
    base = (np.expm1(2.0 * (1.0 - p) * tarr)) / 2.0 ** p + z0 ** (1.0 - p)
    out = base ** (1.0 / (1.0 - p)) * np.exp(-2.0 * tarr)
    return float(out) if out.ndim == 0 else out


def rescale_lower_solution(p: float, z0: float, gamma: float, t):
    """``w(t^gamma / Gamma(gamma + 1))``: lower solution of the fractional inequality."""
    tbar = np.asarray(t, dtype=float) ** gamma / math.gamma(gamma + 1.0)
    return ode_oracle(p, z0, tbar)

# }}}


# {{{ blow-up report and parameter sweep

@dataclass
class BlowupReport:
    region_one_holds: Optional[bool]
    region_two_holds: Optional[bool]
    delta1: Optional[float]
    delta2: Optional[float]
    z0: Optional[float]
    z_bound_applicable: bool
    t_star_bound: Optional[float]
    observed_blowup: Optional[float] = None

    def __post_init__(self):
        if (self.t_star_bound is not None) != self.z_bound_applicable:
            raise ValueError("t_star_bound is present exactly when the Z-bound applies")


def blowup_report(params: SystemParams, N: int, z0: Optional[float] = None,
                  observed: Optional[float] = None) -> BlowupReport:
    if params.p > 1 and params.q > 1:
        r1, r2 = blowup_regions(params, N)
        d1, d2 = blowup_exponents(params, N)
    else:
        r1 = r2 = d1 = d2 = None
    applicable = (
        z0 is not None and params.gamma1 == params.gamma2 and 1 < params.p <= params.q
        and z0 > blowup_threshold_z(params.p)
    )
    bound = blowup_time_bound(params.p, params.gamma1, z0) if applicable else None
    return BlowupReport(r1, r2, d1, d2, z0, applicable, bound, observed)


CRITERIA_HEADER = ["gamma1", "gamma2", "p", "q", "N", "global_ok", "region1", "region2",
                   "delta1", "delta2", "hypotheses"]


def hypothesis_flags(params: SystemParams) -> list:
    flags = []
    if params.gamma2 < params.gamma1:
        flags.append("gamma2<gamma1")
    if params.q < params.p:
        flags.append("q<p")
    if params.p * params.q - 1.0 < 1e-6:
        flags.append("pq<=1")
    if params.p <= 1.0 or params.q <= 1.0:
        flags.append("p_or_q_eq_1")
    return flags


@dataclass
class CriteriaRow:
    gamma1: float
    gamma2: float
    p: float
    q: float
    N: int
    global_ok: Optional[bool]
    region1: Optional[bool]
    region2: Optional[bool]
    delta1: Optional[float]
    delta2: Optional[float]
    hypotheses: str

    def cells(self) -> list:
        def fmt(x):
            if x is None:
                return "NA"
            if isinstance(x, (bool, np.bool_)):
                return "true" if x else "false"
            if isinstance(x, (int, str)):
                return str(x)
            return repr(float(x))
        return [fmt(getattr(self, k)) for k in CRITERIA_HEADER]


def evaluate_point(g1: float, g2: float, p: float, q: float, N: int) -> CriteriaRow:
    """One sweep row; hypothesis violations are flagged, never dropped."""
    params = SystemParams(g1, g2, p, q)
    flags = hypothesis_flags(params)
    order_ok = "gamma2<gamma1" not in flags and "q<p" not in flags and "pq<=1" not in flags
    glob = global_condition(params, N) if order_ok else None
    if p > 1 and q > 1 and p * q > 1:
        r1, r2 = blowup_regions(params, N)
        d1, d2 = blowup_exponents(params, N)
    else:
        r1 = r2 = d1 = d2 = None
    return CriteriaRow(g1, g2, p, q, int(N), glob, r1, r2, d1, d2, ";".join(flags) or "ok")


def write_criteria_csv(rows: Iterable[CriteriaRow], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CRITERIA_HEADER)
        for row in rows:
            w.writerow(row.cells())


@dataclass
class SweepResult:
    rows: list
    coherence_findings: list = field(default_factory=list)  # region1 true but min(d1, d2) >= 0
    exclusivity_findings: list = field(default_factory=list)  # global condition and a region both true

    def summary(self) -> str:
        return (f"{len(self.rows)} points; region/exponent coherence findings: "
                f"{len(self.coherence_findings)}; global-vs-blow-up overlaps: "
                f"{len(self.exclusivity_findings)}")


def parameter_sweep(n_points: int = 10_000, seed: int = 0, max_dim: int = 6,
                    p_max: float = 6.0) -> SweepResult:
    """Rejection-sampled sweep over ``0 < g1 <= g2 < 1``, ``1 < p <= q``."""
    rng = np.random.default_rng(seed)
    rows = []
    res = SweepResult(rows)
    while len(rows) < n_points:
        g1, g2 = rng.uniform(0.0, 1.0, 2)
        p, q = rng.uniform(1.0, p_max, 2)
        N = int(rng.integers(1, max_dim + 1))
        if not (0 < g1 <= g2 < 1 and 1 < p <= q) or p * q - 1 < 1e-6:
            continue
        if p <= 1 + CONJUGATE_GUARD:
            continue
        row = evaluate_point(float(g1), float(g2), float(p), float(q), N)
        rows.append(row)
        if row.region1 and min(row.delta1, row.delta2) >= 0:
            res.coherence_findings.append(row)
        if row.global_ok and (row.region1 or row.region2):
            res.exclusivity_findings.append(row)
    return res


def admissible_draws(n: int, seed: int = 0, max_dim: int = 12) -> list:
    """Random ``(params, N)`` satisfying the global-existence hypotheses."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        g1, g2 = np.sort(rng.uniform(0.05, 0.99, 2))
        p, q = np.sort(rng.uniform(1.0, 5.0, 2))
        N = int(rng.integers(1, max_dim + 1))
        params = SystemParams(float(g1), float(g2), float(p), float(q))
        if p * q - 1 < 1e-6 or not global_condition(params, N):
            continue
        try:
            exponent_set(params, N)
        except ValueError:
            continue
        out.append((params, N))
    return out

# }}}


# {{{ trajectory analyses

@dataclass
class DecayReport:
    sigma: float
    constant: float  # least C with ||u||_s1 <= C (1+t)^-sigma on the window
    slope: float  # fitted log-log slope of ||u||_s1 against 1+t
    constant_refined: Optional[float] = None
    rel_change: Optional[float] = None
    combined_constant: Optional[float] = None  # 2^sigma max(C1, C2) from the [0,1] / tail split
    combined_holds: Optional[bool] = None
    sigma_v: Optional[float] = None
    constant_v: Optional[float] = None

    @property
    def stable(self) -> bool:
        return self.rel_change is not None and self.rel_change <= 0.10

    @property
    def passed(self) -> bool:
        return math.isfinite(self.constant) and self.stable and bool(self.combined_holds)


def _window_constant(times, norms, sigma, window) -> tuple:
    t_lo, t_hi = window
    sel = (times >= t_lo - 1e-12) & (times <= t_hi + 1e-12)
    if not sel.any():
        raise ValueError(f"window {window} contains no trajectory nodes")
    t, y = times[sel], norms[sel]
    C = float(np.max(y * (1.0 + t) ** sigma))
    pos = y > 0
    slope = float(np.polyfit(np.log1p(t[pos]), np.log(y[pos]), 1)[0]) if pos.sum() >= 2 else float("nan")
    return C, slope


def combined_decay_constant(times: np.ndarray, norms: np.ndarray, sigma: float) -> tuple:
    """Bounded-on-[0,1] plus ``t^-sigma`` tail gives one ``(1+t)^-sigma`` constant.

    Returns ``(K, holds)`` with ``K = 2^sigma max(C1, C2)``; ``holds`` checks
    ``norms <= K (1+t)^-sigma`` at every node.
    """
    early = times <= 1.0
    late = ~early
    C1 = float(norms[early].max()) if early.any() else 0.0
    C2 = float(np.max(norms[late] * times[late] ** sigma)) if late.any() else 0.0
    K = 2.0 ** sigma * max(C1, C2)
    holds = bool(np.all(norms <= K * (1.0 + times) ** (-sigma) * (1 + 1e-12)))
    return K, holds


def decay_verify(traj, exps: ExponentSet, window: tuple, refined=None) -> DecayReport:
    """Decay constant of ``||u(t)||_{s1}`` against ``(1+t)^-sigma1`` on ``window``.

    ``refined`` is the same run with the time step halved; its constant
    gives the stability figure the report passes on.
    """
    for tr in (traj,) if refined is None else (traj, refined):
        if not tr.completed:
            raise NotApplicable("decay_verify needs a completed (non-blow-up) trajectory")
        if abs(tr.s1 - exps.s1) > 1e-9 * exps.s1 or abs(tr.s2 - exps.s2) > 1e-9 * exps.s2:
            raise ValueError("trajectory norms were not recorded with the exponent set's s1, s2")
        if window[1] > tr.times[-1] + 1e-12:
            raise ValueError(f"window end {window[1]} beyond the run end {tr.times[-1]}")
    C, slope = _window_constant(traj.times, traj.norms["u_s1"], exps.sigma1, window)
    Cv, _ = _window_constant(traj.times, traj.norms["v_s2"], exps.sigma2, window)
    K, holds = combined_decay_constant(traj.times, traj.norms["u_s1"], exps.sigma1)
    rep = DecayReport(exps.sigma1, C, slope, combined_constant=K, combined_holds=holds,
                      sigma_v=exps.sigma2, constant_v=Cv)
    if refined is not None:
        C2, _ = _window_constant(refined.times, refined.norms["u_s1"], exps.sigma1, window)
        rep.constant_refined = C2
        if C2 > 0:
            rep.rel_change = abs(C - C2) / C2
        else:
            rep.rel_change = 0.0 if C == 0 else math.inf
    return rep


def bump(spec: GridSpec, radius: Optional[float] = None) -> tuple:
    """``(1 - |x|^2/R^2)^3`` clipped at ``R`` (default ``L/2``) and its exact Laplacian."""
    R = spec.half_width / 2.0 if radius is None else radius
    s = spec.radius ** 2 / R ** 2
    inside = s < 1.0
    one = np.where(inside, 1.0 - s, 0.0)
    phi = one ** 3
    lap = -6.0 * spec.dim / R ** 2 * one ** 2 + 24.0 * s / R ** 2 * one
    return phi, np.where(inside, lap, 0.0)


@dataclass
class WeakResidual:
    res_u: float
    res_v: float
    scale_u: float  # largest single term of each identity
    scale_v: float

    @property
    def rel_u(self) -> float:
        return self.res_u / self.scale_u if self.scale_u > 0 else self.res_u

    @property
    def rel_v(self) -> float:
        return self.res_v / self.scale_v if self.scale_v > 0 else self.res_v

    def __iter__(self):
        return iter((self.res_u, self.res_v))


def _trapezoid(y: np.ndarray, h: float) -> float:
    return float(h * (y.sum() - 0.5 * (y[0] + y[-1])))


def _weak_terms(own, other, data, source, gamma, spec, t, h, phi2, lap2, dv) -> tuple:
    phi1 = spec(t)
    d1 = caputo_right_testfunc(spec, gamma, t)
    l, T = spec.l, spec.horizon
    d1_int = math.gamma(l + 1) / math.gamma(l + 2 - gamma) * T ** (1 - gamma)  # int_0^T D phi1
    m_src = np.array([np.sum(source(f) * phi2) for f in other]) * dv
    m_phi = np.array([np.sum(f * phi2) for f in own]) * dv
    m_lap = np.array([np.sum(f * lap2) for f in own]) * dv
    a_src = _trapezoid(phi1 * m_src, h)
    a_dat = float(np.sum(data.values * phi2) * dv * d1_int)
    b_lap = -_trapezoid(phi1 * m_lap, h)
    b_d = _trapezoid(d1 * m_phi, h)
    res = abs(a_src + a_dat - b_lap - b_d)
    return res, max(abs(a_src), abs(a_dat), abs(b_lap), abs(b_d))


def weak_residual(traj, spec: TestFuncSpec, params: Optional[SystemParams] = None,
                  *, u0: Optional[GridField] = None, v0: Optional[GridField] = None,
                  radius: Optional[float] = None) -> WeakResidual:
    """Weak-form defect for ``phi(t, x) = phi1(t) phi2(x)`` over ``[0, T]``.

    ``phi1`` is the power test function with horizon ``T`` (its right
    derivative in closed form), ``phi2`` the compact bump.  For each
    equation returns ``|int f phi + int u0 D phi - int u (-Lap phi) - int u D phi|``.
    Time integrals use the trapezoid rule on the stored nodes.
    ``u0``/``v0`` default to the trajectory's own data.
    """
    if not traj.completed:
        raise NotApplicable("weak_residual needs a completed trajectory")
    if not traj.has_full_fields:
        raise ValueError("weak_residual needs a trajectory with fields stored at every step")
    params = traj.params if params is None else params
    u0 = traj.u0 if u0 is None else u0
    v0 = traj.v0 if v0 is None else v0
    T = float(traj.times[-1])
    if abs(T - spec.horizon) > 1e-9 * T:
        raise ValueError(f"test function horizon {spec.horizon} differs from the run end {T}")
    h = float(traj.times[1] - traj.times[0])
    gs = traj.spec
    phi2, lap2 = bump(gs, radius)
    t = traj.times

    # f(v) drives u, g(u) drives v
    ru, su = _weak_terms(traj.u_fields, traj.v_fields, u0, params.f, params.gamma1,
                         spec, t, h, phi2, lap2, gs.cell_volume)
    rv, sv = _weak_terms(traj.v_fields, traj.u_fields, v0, params.g, params.gamma2,
                         spec, t, h, phi2, lap2, gs.cell_volume)
    return WeakResidual(ru, rv, su, sv)
