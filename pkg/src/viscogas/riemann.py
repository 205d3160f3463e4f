"""Exact Riemann solution of the isentropic p-system with ``P = k e^{2s} rho^gamma``.

Used as a reference for runs whose entropy is constant: the full system then
reduces to the 2x2 isentropic one.  Vacuum formation is not handled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import GasParams


@dataclass(frozen=True)
class RiemannSolution:
    left: tuple[float, float]
    right: tuple[float, float]
    s: float
    p: GasParams
    x0: float
    rho_star: float
    u_star: float

    def _amp(self, rho):
        return np.power(rho, self.p.theta) * np.exp(self.s)

    def _rho_from_amp(self, a):
        return np.power(a * np.exp(-self.s), 1 / self.p.theta)

    def wave_kinds(self) -> tuple[str, str]:
        left = "shock" if self.rho_star > self.left[0] else "rarefaction"
        right = "shock" if self.rho_star > self.right[0] else "rarefaction"
        return left, right

    def sample(self, x, t: float):
        """Return ``(rho, u)`` at positions ``x`` and time ``t > 0``."""
        if t <= 0:
            raise ValueError("sample needs t > 0")
        th = self.p.theta
        xi = (np.asarray(x, dtype=float) - self.x0) / t
        rl, ul = self.left
        rr, ur = self.right
        rs, us = self.rho_star, self.u_star
        al, ar, as_ = self._amp(rl), self._amp(rr), self._amp(rs)
        rho = np.empty_like(xi)
        u = np.empty_like(xi)

        if rs > rl:
            sigma = (rs * us - rl * ul) / (rs - rl)
            mask_l = xi < sigma
            rho[mask_l], u[mask_l] = rl, ul
            fan_l = np.zeros_like(xi, dtype=bool)
            left_done = mask_l
        else:
            head, tail = ul - th * al, us - th * as_
            mask_l = xi < head
            fan_l = (xi >= head) & (xi < tail)
            rho[mask_l], u[mask_l] = rl, ul
            a = (ul + al - xi[fan_l]) / (1 + th)
            rho[fan_l], u[fan_l] = self._rho_from_amp(a), ul + al - a
            left_done = mask_l | fan_l

        if rs > rr:
            sigma = (rs * us - rr * ur) / (rs - rr)
            mask_r = xi > sigma
            fan_r = np.zeros_like(xi, dtype=bool)
        else:
            head, tail = ur + th * ar, us + th * as_
            mask_r = xi > head
            fan_r = (xi <= head) & (xi > tail) & ~left_done
        rho[mask_r], u[mask_r] = rr, ur
        a = (xi[fan_r] + ar - ur) / (1 + th)
        rho[fan_r], u[fan_r] = self._rho_from_amp(a), a - (ar - ur)

        star = ~(left_done | mask_r | fan_r)
        rho[star], u[star] = rs, us
        return rho, u


def solve_isentropic_riemann(left, right, s: float, p: GasParams, x0: float = 0.0
                             ) -> RiemannSolution:
    """``left`` and ``right`` are ``(rho, u)`` pairs with rho > 0."""
    rl, ul = map(float, left)
    rr, ur = map(float, right)
    if rl <= 0 or rr <= 0:
        raise ValueError("Riemann states need positive density")
    th, g = p.theta, p.gamma
    kappa = p.k * np.exp(2 * s)

    def amp(r):
        return r**th * np.exp(s)

    def pres(r):
        return kappa * r**g

    if ur - ul >= 2 * (amp(rl) + amp(rr)) - 1e-14:
        raise ValueError("data generate a vacuum; not supported")

    def u_left(r):
        if r > rl:
            return ul - np.sqrt((pres(r) - pres(rl)) * (r - rl) / (r * rl))
        return ul + amp(rl) - amp(r)

    def u_right(r):
        if r > rr:
            return ur + np.sqrt((pres(r) - pres(rr)) * (r - rr) / (r * rr))
        return ur - amp(rr) + amp(r)

    def gap(r):
        return u_left(r) - u_right(r)

    lo, hi = 1e-14 * min(rl, rr), 2 * max(rl, rr)
    while gap(hi) > 0:
        hi *= 2
    rho_star = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return RiemannSolution((rl, ul), (rr, ur), s, p, x0, rho_star, u_left(rho_star))
