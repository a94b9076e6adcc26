"""Fractional integrals and derivatives on uniform time grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_end, self.n_steps * factor)


@dataclass(frozen=True)
class TestFuncSpec:
    """Power test function ``(1 - t/T)_+^l`` on ``[0, T]``.

    ``lambda_scale`` is the time-scaling exponent used by the blow-up
    argument (horizon ``T**lambda``); ``None`` means ``4/gamma1`` downstream.
    """

    __test__ = False  # not a pytest class

    l: float = 2.0
    horizon: float = 1.0
    lambda_scale: Optional[float] = None

    def __post_init__(self):
        if self.l < 2:
            raise ValueError(f"test function power l must be >= 2, got {self.l}")
        if not self.horizon > 0:
            raise ValueError(f"test function horizon must be positive, got {self.horizon}")
        if self.lambda_scale is not None and not self.lambda_scale > 0:
            raise ValueError(f"lambda_scale must be positive, got {self.lambda_scale}")

    def scale_for(self, gamma1: float) -> float:
        return 4.0 / gamma1 if self.lambda_scale is None else self.lambda_scale

    def __call__(self, t):
        s = np.clip(1.0 - np.asarray(t, dtype=float) / self.horizon, 0.0, None)
        return s ** self.l


def _check_alpha(alpha: float, upper_closed: bool = False) -> None:
    ok = 0.0 < alpha <= 1.0 if upper_closed else 0.0 < alpha < 1.0
    if not ok:
        raise ValueError(f"fractional order must lie in (0, 1{']' if upper_closed else ')'}, got {alpha}")


def l1_weights(n: int, alpha: float) -> np.ndarray:
    """``b_j = (j+1)^(1-alpha) - j^(1-alpha)`` for ``j = 0..n-1``."""
    j = np.arange(n, dtype=float)
    return (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)


def caputo_l1(u, alpha: float, dt: float) -> np.ndarray:
    """L1 approximation of the left Caputo derivative at nodes ``1..n``.

    ``u`` holds samples at ``t_0 = 0, ..., t_n``; the result has length ``n``
    and entry ``i`` approximates the derivative at ``t_{i+1}``.
    """
    _check_alpha(alpha)
    u = np.asarray(u)
    if u.shape[0] < 2:
        raise ValueError("caputo_l1 needs at least 2 samples")
    n = u.shape[0] - 1
    du = np.diff(u, axis=0)
    b = l1_weights(n, alpha)
    c = dt ** (-alpha) / math.gamma(2.0 - alpha)
    if du.ndim == 1:
        return c * np.convolve(b, du)[:n]
    # column-wise for stacked samples
    return c * np.stack([np.convolve(b, du[:, k])[:n] for k in range(du.shape[1])], axis=1)


def rl_derivative(g, alpha: float, dt: float) -> np.ndarray:
    """Left Riemann-Liouville derivative at nodes ``1..n``: L1 part plus ``g(0) t^-alpha / Gamma(1-alpha)``."""
    g = np.asarray(g, dtype=float)
    n = g.shape[0] - 1
    t = dt * np.arange(1, n + 1)
    return caputo_l1(g, alpha, dt) + g[0] * t ** (-alpha) / math.gamma(1.0 - alpha)


def caputo_right_l1(psi, alpha: float, dt: float) -> np.ndarray:
    """Right-sided L1 Caputo derivative ``-(1/Gamma(1-a)) int_t^T psi'(s) (s-t)^-a ds`` at nodes ``0..n-1``."""
    psi = np.asarray(psi, dtype=float)
    return caputo_l1(psi[::-1], alpha, dt)[::-1]


def _product_linear_weights(n: int, alpha: float) -> np.ndarray:
    """Row ``n`` of the product-trapezoid weights for ``I^alpha`` (times ``h^alpha/Gamma(alpha+2)``)."""
    a = np.empty(n + 1)
    a[0] = (n - 1.0) ** (alpha + 1.0) - (n - 1.0 - alpha) * n ** alpha
    m = n - np.arange(1, n, dtype=float)
    a[1:n] = (m + 1.0) ** (alpha + 1.0) - 2.0 * m ** (alpha + 1.0) + (m - 1.0) ** (alpha + 1.0)
    a[n] = 1.0
    return a


def rl_integral(psi, alpha: float, dt: float, side: str = "left", rule: str = "linear") -> np.ndarray:
    """Riemann-Liouville integral of order ``alpha`` at every node.

    Product integration: the kernel ``(t - s)^(alpha-1)`` is integrated
    exactly against a piecewise interpolant of ``psi``.  ``rule="linear"``
    uses the hat-function interpolant (order ~ 1 + alpha on smooth data);
    ``rule="rectangle"`` holds each cell at its endpoint away from the
    reference point, so a left integral never reads ``psi[0]`` (useful when
    ``psi`` is singular at ``t = 0``).  ``side="right"`` integrates over
    ``[t, T]`` instead of ``[0, t]``.
    """
    _check_alpha(alpha, upper_closed=True)
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 1 or psi.shape[0] < 2:
        raise ValueError("rl_integral needs a 1-D array of at least 2 samples")
    if side == "right":
        return rl_integral(psi[::-1], alpha, dt, "left", rule)[::-1]
    if side != "left":
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")

    n = psi.shape[0] - 1
    out = np.zeros(n + 1)
    if rule == "linear":
        scale = dt ** alpha / math.gamma(alpha + 2.0)
        for k in range(1, n + 1):
            out[k] = scale * np.dot(_product_linear_weights(k, alpha), psi[: k + 1])
    elif rule == "rectangle":
        m = np.arange(n + 1, dtype=float)
        # cell j = [t_j, t_{j+1}] weighted by psi[j+1]
        w = (m[1:] ** alpha - m[:-1] ** alpha) * dt ** alpha / math.gamma(alpha + 1.0)
        out[1:] = np.convolve(w, psi[1:])[:n]
    else:
        raise ValueError(f"rule must be 'linear' or 'rectangle', got {rule!r}")
    return out


def caputo_right_testfunc(spec: TestFuncSpec, alpha: float, t):
    """Closed-form right Caputo derivative of ``(1 - t/T)_+^l`` on ``[0, T]``."""
    _check_alpha(alpha)
    tarr = np.asarray(t, dtype=float)
    if np.any(tarr < 0) or np.any(tarr > spec.horizon):
        raise ValueError(f"t must lie in [0, {spec.horizon}]")
    T, l = spec.horizon, spec.l
    const = math.gamma(l + 1.0) / math.gamma(l + 1.0 - alpha) * T ** (-alpha)
    out = const * (1.0 - tarr / T) ** (l - alpha)
    return float(out) if out.ndim == 0 else out


@dataclass
class FodeResult:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    blowup_time: Optional[float]  # first node the implicit step could not reach


def l1_fode_system(
    gamma1: float,
    gamma2: float,
    f: Callable[[float], float],
    g: Callable[[float], float],
    df: Callable[[float], float],
    dg: Callable[[float], float],
    u0: float,
    v0: float,
    grid: TimeGrid,
    threshold: float = 1e12,
) -> FodeResult:
    """Implicit L1 scheme for ``D^g1 u = f(v), D^g2 v = g(u)`` (spatially homogeneous system).

    Each step reduces to one scalar equation in ``u_n`` solved by Newton from
    the previous value.  For convex increasing sources this converges to
    the smallest root; when no root exists (or the solution passes
    ``threshold``) the run stops and ``blowup_time`` is set.
    """
    _check_alpha(gamma1)
    _check_alpha(gamma2)
    n, h = grid.n_steps, grid.dt
    b1, b2 = l1_weights(n + 1, gamma1), l1_weights(n + 1, gamma2)
    c1 = h ** (-gamma1) / math.gamma(2.0 - gamma1)
    c2 = h ** (-gamma2) / math.gamma(2.0 - gamma2)
    u = np.full(n + 1, np.nan)
    v = np.full(n + 1, np.nan)
    du = np.zeros(n + 1)
    dv = np.zeros(n + 1)
    u[0], v[0] = u0, v0
    blowup = None

    for k in range(1, n + 1):
        # history: sum_{j=1}^{k-1} b_j (x_{k-j} - x_{k-j-1}); du[i] = x_i - x_{i-1}
        hist1 = np.dot(b1[1:k], du[k - 1:0:-1]) if k > 1 else 0.0
        hist2 = np.dot(b2[1:k], dv[k - 1:0:-1]) if k > 1 else 0.0
        a1 = u[k - 1] - hist1
        a2 = v[k - 1] - hist2

        x = u[k - 1]
        ok = False
        for _ in range(100):
            vx = a2 + g(x) / c2
            r = a1 + f(vx) / c1 - x
            dr = df(vx) * dg(x) / (c1 * c2) - 1.0
            if not np.isfinite(r) or dr >= 0.0:
                break
            step = r / dr
            x -= step
            if abs(step) <= 1e-14 * max(abs(x), 1.0):
                ok = True
                break
        if not ok or abs(x) > threshold:
            blowup = float(grid.nodes[k])
            break
        u[k] = x
        v[k] = a2 + g(x) / c2
        du[k] = u[k] - u[k - 1]
        dv[k] = v[k] - v[k - 1]

    return FodeResult(grid.nodes, u, v, blowup)
