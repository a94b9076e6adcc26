"""Subordinated solution operators P_alpha(t), S_alpha(t).

Both act diagonally in Fourier space.  The ``ml_symbol`` path uses the
Mittag-Leffler symbols directly; the ``wright_quadrature`` path averages
heat symbols ``exp(-|k|^2 t^alpha theta_j)`` over a Gauss rule for the
Wright density, i.e. it evaluates the subordination integral itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .fieldgrid import GridField
from .specfun import WrightParams, mittag_leffler, wright_quadrature

Path = Literal["ml_symbol", "wright_quadrature"]


def ml_symbol(k2: np.ndarray, scale: float, alpha: float, beta: float) -> np.ndarray:
    """``E_{alpha,beta}(-k2 * scale)`` evaluated once per distinct wavenumber."""
    uniq, inv = np.unique(k2, return_inverse=True)
    vals = mittag_leffler(-uniq * scale, alpha, beta, extended=True)
    return vals[inv].reshape(k2.shape)


@dataclass(frozen=True)
class SubordOperator:
    alpha: float
    path: Path = "ml_symbol"
    n_nodes: int = 64

    def __post_init__(self):
        WrightParams(self.alpha)
        if self.path not in ("ml_symbol", "wright_quadrature"):
            raise ValueError(f"unknown evaluation path {self.path!r}")
        if self.path == "wright_quadrature":
            rule = wright_quadrature(self.alpha, self.n_nodes)
            if not rule.accurate:
                raise ValueError(f"Wright rule with {self.n_nodes} nodes misses its accuracy check")

    def _wright_symbol(self, k2: np.ndarray, t: float, first_moment: bool) -> np.ndarray:
        rule = wright_quadrature(self.alpha, self.n_nodes)
        w = rule.weights * rule.nodes * self.alpha if first_moment else rule.weights
        uniq, inv = np.unique(k2, return_inverse=True)
        vals = np.exp(-np.outer(uniq * t ** self.alpha, rule.nodes)) @ w
        return vals[inv].reshape(k2.shape)

    def p_symbol(self, k2: np.ndarray, t: float) -> np.ndarray:
        if self.path == "ml_symbol":
            return ml_symbol(k2, t ** self.alpha, self.alpha, 1.0)
        return self._wright_symbol(k2, t, first_moment=False)

    def s_symbol(self, k2: np.ndarray, t: float) -> np.ndarray:
        if self.path == "ml_symbol":
            return ml_symbol(k2, t ** self.alpha, self.alpha, self.alpha)
        return self._wright_symbol(k2, t, first_moment=True)

    def p_apply(self, f: GridField, t: float) -> GridField:
        return _apply(f, t, self.p_symbol)

    def s_apply(self, f: GridField, t: float) -> GridField:
        return _apply(f, t, self.s_symbol)


def _apply(f: GridField, t: float, symbol) -> GridField:
    if t < 0:
        raise ValueError(f"operator time must be >= 0, got {t}")
    spec = f.spec
    return GridField(spec, spec.irfft(spec.rfft(f.values) * symbol(spec.k2, t)))


def p_apply(op: SubordOperator, f: GridField, t: float) -> GridField:
    """``P_alpha(t) f``; identity at ``t = 0``."""
    return op.p_apply(f, t)


def s_apply(op: SubordOperator, f: GridField, t: float) -> GridField:
    """``S_alpha(t) f``; at ``t = 0`` this is ``f / Gamma(alpha)``."""
    return op.s_apply(f, t)


def lp_lq_constant(alpha: float, dim: int, r_inv: float, t: float, kind: str = "P") -> float:
    """Constant ``C(t)`` in ``||P_alpha(t) u||_q <= C(t) ||u||_p`` (``kind="S"`` for S_alpha).

    ``r_inv = 1/p - 1/q`` must satisfy ``r_inv < 2/dim``.
    """
    from math import gamma, pi

    a = dim * r_inv / 2.0
    if not 0 <= a < 1:
        raise ValueError(f"need 0 <= 1/r < 2/N, got 1/r={r_inv}, N={dim}")
    heat = (4.0 * pi * t ** alpha) ** (-a)
    if kind == "P":
        return heat * gamma(1.0 - a) / gamma(1.0 - alpha * a)
    if kind == "S":
        return heat * alpha * gamma(1.0 - a) / gamma(1.0 + alpha - alpha * a)
    raise ValueError(f"kind must be 'P' or 'S', got {kind!r}")
