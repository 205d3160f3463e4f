"""Compactly supported space-time test functions and the trapezoidal
quadrature shared by the monitors and the weak-form verifier."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .model import PrimitiveState
from .solver import Field, Trajectory


def bump(y):
    """``(1 - y^2)^3`` on ``|y| < 1`` and zero outside; C^2 at the edges."""
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) < 1, (1 - y * y) ** 3, 0.0)


def bump_prime(y):
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) < 1, -6 * y * (1 - y * y) ** 2, 0.0)


@dataclass(frozen=True)
class TestFunction:
    """``phi(x, t) = amplitude * B((x - x0)/r_x) * B((t - t0)/r_t)``."""

    x0: float
    t0: float
    r_x: float
    r_t: float
    amplitude: float = 1.0

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not (self.r_x > 0 and self.r_t > 0):
            raise ValueError("test-function radii must be positive")

    def phi(self, x, t):
        return self.amplitude * bump((x - self.x0) / self.r_x) * bump((t - self.t0) / self.r_t)

    def phi_x(self, x, t):
        return (self.amplitude / self.r_x * bump_prime((x - self.x0) / self.r_x)
                * bump((t - self.t0) / self.r_t))

    def phi_t(self, x, t):
        return (self.amplitude / self.r_t * bump((x - self.x0) / self.r_x)
                * bump_prime((t - self.t0) / self.r_t))

    def scaled(self, factor: float) -> "TestFunction":
        return replace(self, amplitude=self.amplitude * factor)

    @property
    def nonnegative(self) -> bool:
        return self.amplitude >= 0

    @property
    def x_support(self) -> tuple[float, float]:
        return self.x0 - self.r_x, self.x0 + self.r_x

    @property
    def t_support(self) -> tuple[float, float]:
        return self.t0 - self.r_t, self.t0 + self.r_t


def validate_support(phi: TestFunction, traj: Trajectory, allow_initial: bool) -> None:
    """Reject test functions whose support leaves the computed data, or whose
    time profile is not resolved by the snapshot stride."""
    grid = traj.grid
    lo, hi = phi.x_support
    if lo <= grid.x_min or hi >= grid.x_max:
        raise ValueError(
            f"test-function x-support [{lo:.4g}, {hi:.4g}] must lie strictly inside "
            f"[{grid.x_min:.4g}, {grid.x_max:.4g}]")
    t_lo, t_hi = phi.t_support
    t_end = traj.final.t
    if t_hi > t_end:
        raise ValueError(
            f"test-function t-support ends at {t_hi:.4g}, after the last snapshot {t_end:.4g}")
    if t_lo < 0 and not allow_initial:
        raise ValueError("test-function support must stay away from t = 0 here")
    times = traj.times
    if len(times) < 2:
        raise ValueError("need at least two snapshots for a space-time integral")
    stride = float(np.max(np.diff(times)))
    if stride > phi.r_t / 10 * (1 + 1e-9):
        raise ValueError(
            f"snapshot stride {stride:.3g} exceeds r_t/10 = {phi.r_t / 10:.3g}")


def spacetime_integral(traj: Trajectory, integrand: Callable[[Field, np.ndarray], np.ndarray]
                       ) -> float:
    """Trapezoid in t over the stored snapshots of ``sum_i integrand * dx``.

    ``integrand(snapshot, x)`` returns the pointwise values on the cells.
    """
    x = traj.grid.x
    dx = traj.grid.dx
    slices = np.array([np.sum(integrand(snap, x)) * dx for snap in traj.snapshots])
    return float(np.trapezoid(slices, traj.times))


def weak_pair_integral(traj: Trajectory, pair: Callable[[PrimitiveState], tuple],
                       phi: TestFunction) -> float:
    """``iint eta phi_t + q phi_x`` for a density/flux pair of primitives."""

    def integrand(snap, x):
        eta, q = pair(snap.primitive())
        return eta * phi.phi_t(x, snap.t) + q * phi.phi_x(x, snap.t)

    return spacetime_integral(traj, integrand)
