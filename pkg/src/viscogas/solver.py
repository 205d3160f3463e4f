"""Explicit method-of-lines integrator for the flux-viscosity gas system.

Conserved unknowns ``(rho, m, upsilon) = (rho, rho u, rho s)`` evolve by

    rho_t + ((rho - 2 delta) u)_x                          = eps rho_xx
    m_t   + (rho u^2 - delta u^2 + P1(rho, delta) e^{2s})_x = eps m_xx
    ups_t + ((rho - 2 delta) u s)_x                        = eps ups_xx

with second-order centered differences, a three-point Laplacian and Heun
time stepping.  No numerical viscosity is added; the physical ``eps`` term is
the only stabiliser, which is why the mesh has to resolve ``eps``.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .model import (
    ApproxParams,
    GasParams,
    PrimitiveState,
    eigenvalues,
    perturbed_eigenvalues,
    perturbed_pressure,
    pressure,
)

logger = logging.getLogger(__name__)

BOUNDARIES = ("zero-gradient", "periodic")
VARIANTS = ("flux-viscosity", "pure-viscosity")


class PositivityError(RuntimeError):
    """Raised when a step produces rho <= 0 or non-finite values."""

    def __init__(self, message: str, cells: np.ndarray | None = None):
        super().__init__(message)
        self.cells = cells


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_cells: int
    boundary: str = "zero-gradient"

    def __post_init__(self):
        if self.n_cells < 16:
            raise ValueError(f"need at least 16 cells, got {self.n_cells}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass
class Field:
    grid: Grid1D
    t: float
    rho: np.ndarray
    m: np.ndarray
    upsilon: np.ndarray

    @property
    def u(self) -> np.ndarray:
        return self.m / self.rho

    @property
    def s(self) -> np.ndarray:
        return self.upsilon / self.rho

    def primitive(self) -> PrimitiveState:
        return PrimitiveState(self.rho, self.m / self.rho, self.upsilon / self.rho)

    def stacked(self) -> np.ndarray:
        return np.stack([self.rho, self.m, self.upsilon])

    @classmethod
    def from_stacked(cls, grid: Grid1D, t: float, state: np.ndarray) -> "Field":
        return cls(grid, t, state[0].copy(), state[1].copy(), state[2].copy())

    @classmethod
    def from_primitive(cls, grid: Grid1D, t: float, rho, u, s) -> "Field":
        rho = np.broadcast_to(np.asarray(rho, dtype=float), (grid.n_cells,)).copy()
        u = np.broadcast_to(np.asarray(u, dtype=float), (grid.n_cells,))
        s = np.broadcast_to(np.asarray(s, dtype=float), (grid.n_cells,))
        return cls(grid, t, rho, rho * u, rho * s)

    def copy(self) -> "Field":
        return Field(self.grid, self.t, self.rho.copy(), self.m.copy(), self.upsilon.copy())


@dataclass(frozen=True)
class SolverConfig:
    params: GasParams
    approx: ApproxParams
    grid: Grid1D
    t_end: float
    cfl: float = 0.4
    snapshot_every: int = 1
    variant: str = "flux-viscosity"
    dt: float | None = None

    def __post_init__(self):
        if not (0 < self.cfl <= 0.9):
            raise ValueError(f"cfl must lie in (0, 0.9], got {self.cfl}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("fixed dt must be positive")

    @property
    def flux_delta(self) -> float:
        """delta as seen by the fluxes; the pure-viscosity variant drops it."""
        return self.approx.delta if self.variant == "flux-viscosity" else 0.0


@dataclass
class Trajectory:
    config: SolverConfig
    snapshots: list[Field] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    n_steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.snapshots])

    @property
    def initial(self) -> Field:
        return self.snapshots[0]

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    @property
    def grid(self) -> Grid1D:
        return self.config.grid

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)


@dataclass(frozen=True)
class RawData:
    """Unmollified initial data as three vectorised callables of x."""

    rho0: Callable[[np.ndarray], np.ndarray]
    u0: Callable[[np.ndarray], np.ndarray]
    s0: Callable[[np.ndarray], np.ndarray]


def constant_data(rho: float, u: float, s: float) -> RawData:
    return RawData(
        lambda x: np.full_like(x, rho, dtype=float),
        lambda x: np.full_like(x, u, dtype=float),
        lambda x: np.full_like(x, s, dtype=float),
    )


def riemann_data(left: Sequence[float], right: Sequence[float], x0: float = 0.0) -> RawData:
    """Piecewise-constant ``(rho, u, s)`` with a single jump at ``x0``."""

    def pick(i):
        return lambda x: np.where(np.asarray(x) < x0, left[i], right[i]).astype(float)

    return RawData(pick(0), pick(1), pick(2))


def sine_data(rho=(1.0, 0.0), u=(0.0, 0.0), s=(0.0, 0.0), wavenumber: float = 1.0,
              length: float = 2.0, x_ref: float = 0.0) -> RawData:
    """Each argument is ``(mean, amplitude)`` of ``mean + amp sin(2 pi k (x - x_ref) / L)``."""

    def wave(pair):
        mean, amp = pair
        return lambda x: mean + amp * np.sin(2 * np.pi * wavenumber * (np.asarray(x) - x_ref) / length)

    return RawData(wave(rho), wave(u), wave(s))


def check_resolution(dx: float, epsilon: float) -> None:
    if dx > 2 * epsilon:
        raise ValueError(
            f"grid does not resolve the viscosity: dx={dx:.3g} > 2*epsilon={2 * epsilon:.3g}")
    if dx > epsilon / 2:
        warnings.warn(
            f"dx={dx:.3g} exceeds epsilon/2={epsilon / 2:.3g}; the viscous scale is "
            "under-resolved", stacklevel=3)


def mollify_initial_data(raw: RawData, approx: ApproxParams, grid: Grid1D) -> Field:
    """Convolve raw data with a discrete Gaussian of width ``epsilon`` and lift
    the density by ``2 delta``.

    The kernel is truncated at six standard deviations and renormalised to
    unit sum.  Beyond the domain ends the raw callables are sampled directly
    (zero-gradient grids) or periodically wrapped.
    """
    eps = approx.epsilon
    check_resolution(grid.dx, eps)
    dx = grid.dx
    half = int(math.ceil(6 * eps / dx))
    offsets = np.arange(-half, half + 1) * dx
    kernel = np.exp(-0.5 * (offsets / eps) ** 2)
    kernel /= kernel.sum()

    x_ext = grid.x_min + (np.arange(-half, grid.n_cells + half) + 0.5) * dx
    if grid.boundary == "periodic":
        x_ext = grid.x_min + np.mod(x_ext - grid.x_min, grid.length)

    rho_raw = np.asarray(raw.rho0(x_ext), dtype=float)
    if np.any(rho_raw < 0):
        raise ValueError("raw density must be nonnegative")
    if not np.all(np.isfinite(rho_raw)):
        raise ValueError("raw density must be finite")

    def smooth(values):
        values = np.broadcast_to(np.asarray(values, dtype=float), x_ext.shape)
        return np.convolve(values, kernel, mode="valid")

    # adding the floor after the convolution keeps rho >= 2 delta exact
    rho = 2 * approx.delta + smooth(rho_raw)
    u = smooth(raw.u0(x_ext))
    s = smooth(raw.s0(x_ext))
    return Field(grid, 0.0, rho, rho * u, rho * s)


def max_wave_speed(field: Field, cfg: SolverConfig) -> float:
    state = field.primitive()
    if cfg.variant == "flux-viscosity":
        l1, l2 = perturbed_eigenvalues(state, cfg.approx.delta, cfg.params)
    else:
        l1, l2, _ = eigenvalues(state, cfg.params)
    return float(np.max(np.maximum(np.maximum(np.abs(l1), np.abs(l2)), np.abs(state.u))))


def stable_dt(field: Field, cfg: SolverConfig) -> float:
    if np.any(field.rho <= 0):
        raise ValueError("stable_dt requires rho > 0 in every cell")
    dx = field.grid.dx
    speed = max_wave_speed(field, cfg)
    advective = dx / speed if speed > 0 else math.inf
    diffusive = dx * dx / (2 * cfg.approx.epsilon)
    return cfg.cfl * min(advective, diffusive)


def pad(values: np.ndarray, boundary: str) -> np.ndarray:
    """One ghost cell per side along the last axis."""
    out = np.empty(values.shape[:-1] + (values.shape[-1] + 2,))
    out[..., 1:-1] = values
    if boundary == "periodic":
        out[..., 0] = values[..., -1]
        out[..., -1] = values[..., 0]
    else:
        out[..., 0] = values[..., 0]
        out[..., -1] = values[..., -1]
    return out


def fluxes(state: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Physical fluxes of the (shifted) system for stacked conserved variables."""
    rho, m, ups = state
    u = m / rho
    s = ups / rho
    p = cfg.params
    delta = cfg.flux_delta
    out = np.empty_like(state)
    out[0] = (rho - 2 * delta) * u
    if delta:
        out[1] = rho * u * u - delta * u * u + perturbed_pressure(rho, delta, p) * np.exp(2 * s)
    else:
        out[1] = rho * u * u + p.k * np.power(rho, p.gamma) * np.exp(2 * s)
    out[2] = out[0] * s
    return out


def rhs(state: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    grid = cfg.grid
    dx = grid.dx
    ghosted = pad(state, grid.boundary)
    f = fluxes(ghosted, cfg)
    lap = ghosted[:, 2:] - 2 * ghosted[:, 1:-1] + ghosted[:, :-2]
    return -(f[:, 2:] - f[:, :-2]) / (2 * dx) + (cfg.approx.epsilon / (dx * dx)) * lap


def _check_state(state: np.ndarray, t: float) -> None:
    bad = ~np.all(np.isfinite(state), axis=0)
    if np.any(bad):
        raise PositivityError(f"non-finite values at t={t:.6g}", np.flatnonzero(bad))
    bad = state[0] <= 0
    if np.any(bad):
        cells = np.flatnonzero(bad)
        raise PositivityError(
            f"rho <= 0 in {cells.size} cell(s) at t={t:.6g}, first at index {cells[0]}",
            cells)


def step(field: Field, dt: float, cfg: SolverConfig) -> Field:
    """One Heun (two-stage, second order) step."""
    u0 = field.stacked()
    u1 = u0 + dt * rhs(u0, cfg)
    _check_state(u1, field.t + dt)
    u2 = 0.5 * u0 + 0.5 * (u1 + dt * rhs(u1, cfg))
    _check_state(u2, field.t + dt)
    return Field.from_stacked(field.grid, field.t + dt, u2)


def run(cfg: SolverConfig, raw: RawData | Field) -> Trajectory:
    """Integrate from mollified data to ``cfg.t_end``, keeping every
    ``snapshot_every``-th state plus the initial and final ones."""
    current = raw.copy() if isinstance(raw, Field) else mollify_initial_data(raw, cfg.approx, cfg.grid)
    traj = Trajectory(config=cfg, snapshots=[current.copy()], steps=[0])
    n = 0
    tol = 1e-12 * cfg.t_end
    while current.t < cfg.t_end - tol:
        limit = stable_dt(current, cfg)
        if cfg.dt is not None:
            if cfg.dt > limit * (1 + 1e-12):
                raise ValueError(
                    f"fixed dt={cfg.dt:.3g} exceeds the stable step {limit:.3g} at t={current.t:.6g}")
            dt = cfg.dt
        else:
            dt = limit
        last = dt >= cfg.t_end - current.t - tol
        dt = min(dt, cfg.t_end - current.t)
        current = step(current, dt, cfg)
        if last:
            current.t = cfg.t_end
        n += 1
        if n % cfg.snapshot_every == 0:
            traj.snapshots.append(current.copy())
            traj.steps.append(n)
    if traj.steps[-1] != n:
        traj.snapshots.append(current.copy())
        traj.steps.append(n)
    traj.n_steps = n
    _warn_boundary_contact(traj)
    logger.debug("run finished: %d steps, %d snapshots", n, len(traj))
    return traj


def _warn_boundary_contact(traj: Trajectory, width: int = 10):
    if traj.grid.boundary != "zero-gradient":
        return
    first, last = traj.initial.stacked(), traj.final.stacked()
    # density sets the scale so that components starting at zero are not amplified
    change = np.abs(last - first) / np.max(np.abs(first[0]))
    edge = np.concatenate([change[:, :width], change[:, -width:]], axis=1)
    if np.max(edge) > 1e-6:
        warnings.warn(
            f"waves reached within {width} cells of the boundary", stacklevel=3)


def ddx(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Centered first derivative; one-sided at the ends of non-periodic grids."""
    if grid.boundary == "periodic":
        return (np.roll(values, -1, axis=-1) - np.roll(values, 1, axis=-1)) / (2 * grid.dx)
    return np.gradient(values, grid.dx, axis=-1)


def d2dx2(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    g = pad(values, grid.boundary)
    return (g[..., 2:] - 2 * g[..., 1:-1] + g[..., :-2]) / grid.dx**2


def _interior(grid: Grid1D, margin: int = 2) -> slice:
    return slice(None) if grid.boundary == "periodic" else slice(margin, -margin)


def conservative_residuals(before: Field, after: Field, dt: float,
                           cfg: SolverConfig) -> np.ndarray:
    """Pointwise residuals of the three continuous equations on two
    consecutive states: forward time difference, centered space differences
    at the earlier time.  Shape ``(3, n_cells)``."""
    grid = cfg.grid
    u_t = (after.stacked() - before.stacked()) / dt
    state = before.stacked()
    f = fluxes(state, cfg)
    return u_t + ddx(f, grid) - cfg.approx.epsilon * d2dx2(state, grid)


def s_equation_pointwise(before: Field, after: Field, dt: float,
                         cfg: SolverConfig) -> np.ndarray:
    grid = cfg.grid
    eps = cfg.approx.epsilon
    delta = cfg.flux_delta
    rho, u, s = before.rho, before.u, before.s
    s_t = (after.s - s) / dt
    s_x = ddx(s, grid)
    rho_x = ddx(rho, grid)
    return (s_t + (rho - 2 * delta) / rho * u * s_x
            - eps * d2dx2(s, grid) - 2 * eps * rho_x / rho * s_x)


def s_equation_residual(before: Field, after: Field, dt: float, cfg: SolverConfig) -> float:
    """Max residual of the nonconservative entropy equation over interior cells."""
    r = s_equation_pointwise(before, after, dt, cfg)
    return float(np.max(np.abs(r[_interior(cfg.grid)])))


def write_snapshots_csv(traj: Trajectory, path) -> None:
    """Long-format dump: one row per (snapshot, cell) with columns t, x, rho, u, s."""
    x = traj.grid.x
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "x", "rho", "u", "s"])
        for snap in traj.snapshots:
            t = f"{snap.t:.17g}"
            for xi, r, v, e in zip(x, snap.rho, snap.u, snap.s):
                writer.writerow([t, f"{xi:.17g}", f"{r:.17g}", f"{v:.17g}", f"{e:.17g}"])


def read_snapshots_csv(path) -> list[tuple[float, np.ndarray]]:
    """Inverse of :func:`write_snapshots_csv`: list of ``(t, rows)`` with rows
    of shape ``(n_cells, 4)`` holding x, rho, u, s."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = []
    for t in np.unique(data[:, 0]):
        out.append((float(t), data[data[:, 0] == t, 1:]))
    return out


def with_grid(cfg: SolverConfig, n_cells: int) -> SolverConfig:
    return replace(cfg, grid=replace(cfg.grid, n_cells=n_cells))
