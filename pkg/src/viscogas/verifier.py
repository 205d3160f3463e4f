"""Weak-form residuals, the entropy inequality, the energy-form equivalence
and refinement studies for viscous flux-approximate trajectories."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .entropy_kernel import EntropyPair
from .model import ApproxParams, GasParams, PrimitiveState, dissipation_A, dissipation_D, pressure
from .monitors import MonitorReport
from .solver import (
    Grid1D,
    RawData,
    SolverConfig,
    Trajectory,
    check_resolution,
    d2dx2,
    ddx,
    run,
)
from .testfunction import (
    TestFunction,
    spacetime_integral,
    validate_support,
    weak_pair_integral,
)

__all__ = [
    "TestFunction", "WeakResidual", "weak_residual", "entropy_inequality_residual",
    "entropy_inequality_scale", "check_entropy_inequality", "equivalence_residual",
    "Jet", "random_jets", "field_jets", "energy_identity_defect", "sub_identity_residuals",
    "RefinementLadder", "ConvergenceRow", "convergence_study", "run_ladder",
    "write_convergence_csv",
]


class WeakResidual(NamedTuple):
    r_mass: float
    r_momentum: float
    r_entropy: float


def limit_pairs(p: GasParams):
    """Density/flux pairs of the inviscid system, as functions of primitives."""
    return (
        lambda st: (st.rho, st.rho * st.u),
        lambda st: (st.rho * st.u, st.rho * st.u * st.u + pressure(st, p)),
        lambda st: (st.rho * st.s, st.rho * st.u * st.s),
    )


def weak_residual(traj: Trajectory, phi: TestFunction, p: GasParams) -> WeakResidual:
    """``iint U phi_t + F(U) phi_x dx dt + int U(x, 0) phi(x, 0) dx`` for each
    conserved component, with the fluxes of the inviscid system."""
    validate_support(phi, traj, allow_initial=True)
    x = traj.grid.x
    first = traj.initial
    phi0 = phi.phi(x, first.t)
    dx = traj.grid.dx
    st0 = first.primitive()
    out = []
    for pair in limit_pairs(p):
        value = weak_pair_integral(traj, pair, phi)
        if np.any(phi0 != 0):
            value += float(np.sum(pair(st0)[0] * phi0) * dx)
        out.append(value)
    return WeakResidual(*out)


def entropy_inequality_residual(traj: Trajectory, pair: EntropyPair, phi: TestFunction,
                                p: GasParams | None = None) -> float:
    """``iint eta phi_t + q phi_x``; for a convex pair and ``phi >= 0`` the
    vanishing-viscosity limit makes this nonnegative."""
    validate_support(phi, traj, allow_initial=False)
    return weak_pair_integral(traj, pair.evaluate, phi)


def entropy_inequality_scale(traj: Trajectory, pair: EntropyPair, phi: TestFunction) -> float:
    """``(||phi_t||_1 + ||phi_x||_1) * max(|eta|, |q|)`` over the trajectory."""
    def weights(snap, x):
        return np.abs(phi.phi_t(x, snap.t)) + np.abs(phi.phi_x(x, snap.t))

    norm_phi = spacetime_integral(traj, weights)
    norm_eta = 0.0
    for snap in traj.snapshots:
        eta, q = pair.evaluate(snap.primitive())
        norm_eta = max(norm_eta, float(np.max(np.abs(eta))), float(np.max(np.abs(q))))
    return norm_phi * norm_eta


def check_entropy_inequality(traj: Trajectory, pair: EntropyPair, phi: TestFunction,
                             p: GasParams | None = None, tol_factor: float = 1e-3
                             ) -> MonitorReport:
    if not pair.convex:
        raise ValueError(f"entropy pair {pair.name!r} is not convex; no sign is implied")
    if not phi.nonnegative:
        raise ValueError("the entropy inequality is tested with phi >= 0")
    value = entropy_inequality_residual(traj, pair, phi, p)
    threshold = -tol_factor * entropy_inequality_scale(traj, pair, phi)
    return MonitorReport(f"entropy-inequality-{pair.name}", value, threshold,
                         value >= threshold, details={"pair": pair.name})


def _energy(st: PrimitiveState, p: GasParams):
    g = p.gamma
    thermal = p.k / (g - 1) * np.power(st.rho, g) * np.exp(2 * st.s)
    kinetic = 0.5 * st.rho * st.u * st.u
    return kinetic + thermal, st.u * (kinetic + g * thermal)


def equivalence_profile(traj: Trajectory, approx: ApproxParams, p: GasParams,
                        n: int) -> np.ndarray:
    """Pointwise energy-equation residual between snapshots ``n`` and ``n + 1``."""
    cfg = traj.config
    grid = traj.grid
    before, after = traj.snapshots[n], traj.snapshots[n + 1]
    dt = after.t - before.t
    st = before.primitive()
    e0, flux = _energy(st, p)
    e1, _ = _energy(after.primitive(), p)
    rho_x, u_x, s_x = ddx(st.rho, grid), ddx(st.u, grid), ddx(st.s, grid)
    a = dissipation_A(st, rho_x, u_x, s_x, p)
    d = dissipation_D(st, u_x, s_x, rho_x, p)
    delta = approx.delta if cfg.variant == "flux-viscosity" else 0.0
    return ((e1 - e0) / dt + ddx(flux, grid) - approx.epsilon * d2dx2(e0, grid)
            + approx.epsilon * a - delta * d)


def equivalence_residual(traj: Trajectory, approx: ApproxParams, p: GasParams,
                         margin: int = 2) -> float:
    """Max over stored step pairs and interior cells of the discrete residual
    of the energy equation with sources ``-eps A + delta D``."""
    if traj.config.snapshot_every != 1:
        raise ValueError("equivalence_residual needs every step stored (snapshot_every = 1)")
    if len(traj) < 2:
        raise ValueError("need at least two consecutive snapshots")
    sl = slice(None) if traj.grid.boundary == "periodic" else slice(margin, -margin)
    worst = 0.0
    for n in range(len(traj) - 1):
        r = equivalence_profile(traj, approx, p, n)
        worst = max(worst, float(np.max(np.abs(r[sl]))))
    return worst


@dataclass(frozen=True)
class Jet:
    """Value with exact first x/t and second x derivatives, closed under
    arithmetic, ``exp`` and real powers by the chain rule."""

    v: np.ndarray
    x: np.ndarray
    t: np.ndarray
    xx: np.ndarray

    # make ``array * jet`` dispatch to Jet.__rmul__ instead of broadcasting
    __array_ufunc__ = None

    @staticmethod
    def const(c, like: "Jet") -> "Jet":
        z = np.zeros_like(like.v)
        return Jet(z + c, z, z, z)

    def _lift(self, other):
        return other if isinstance(other, Jet) else Jet.const(other, self)

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.v + o.v, self.x + o.x, self.t + o.t, self.xx + o.xx)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.x, -self.t, -self.xx)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v * other, self.x * other, self.t * other, self.xx * other)
        o = other
        return Jet(self.v * o.v, self.x * o.v + self.v * o.x, self.t * o.v + self.v * o.t,
                   self.xx * o.v + 2 * self.x * o.x + self.v * o.xx)

    __rmul__ = __mul__

    def _apply(self, f, f1, f2):
        return Jet(f, f1 * self.x, f1 * self.t, f2 * self.x**2 + f1 * self.xx)

    def __pow__(self, a: float):
        return self._apply(self.v**a, a * self.v ** (a - 1), a * (a - 1) * self.v ** (a - 2))

    def exp(self):
        e = np.exp(self.v)
        return self._apply(e, e, e)

    def reciprocal(self):
        return self ** -1.0

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / other)
        return self * other.reciprocal()


def random_jets(rng: np.random.Generator, n: int, rho_range=(0.5, 2.0)):
    """Random pointwise jets of ``(rho, u, s)`` with O(1) derivatives."""
    def jet(v):
        return Jet(v, rng.normal(size=n), rng.normal(size=n), rng.normal(size=n))

    return (jet(rng.uniform(*rho_range, n)), jet(rng.uniform(-2, 2, n)),
            jet(rng.uniform(-0.5, 0.5, n)))


def field_jets(traj: Trajectory, n: int):
    """Jets of ``(rho, u, s)`` at snapshot ``n`` built from discrete derivatives
    (centered in space, forward in time)."""
    grid = traj.grid
    before, after = traj.snapshots[n], traj.snapshots[n + 1]
    dt = after.t - before.t

    def jet(a, b):
        return Jet(a, ddx(a, grid), (b - a) / dt, d2dx2(a, grid))

    return jet(before.rho, after.rho), jet(before.u, after.u), jet(before.s, after.s)


def _residual_jets(rho: Jet, u: Jet, s: Jet, approx: ApproxParams, p: GasParams):
    g, k = p.gamma, p.k
    eps, delta = approx.epsilon, approx.delta
    e2s = (s * 2.0).exp()
    shift = rho - 2 * delta
    m = rho * u
    ups = rho * s
    p1 = k * rho**g - (2 * delta * k * g / (g - 1)) * rho ** (g - 1)
    mass_flux = shift * u
    mom_flux = m * u - delta * (u * u) + p1 * e2s
    ent_flux = mass_flux * s
    r1 = rho.t + mass_flux.x - eps * rho.xx
    r2 = m.t + mom_flux.x - eps * m.xx
    r3 = ups.t + ent_flux.x - eps * ups.xx
    return r1, r2, r3


def energy_identity_defect(rho: Jet, u: Jet, s: Jet, approx: ApproxParams, p: GasParams
                           ) -> np.ndarray:
    """Relative pointwise gap between the energy-equation residual and the
    combination ``E_rho R1 + E_m R2 + E_ups R3`` of the conservative residuals.

    The two agree identically for smooth fields, so this measures roundoff
    plus any algebra error in ``A`` and ``D``.
    """
    g, k = p.gamma, p.k
    eps, delta = approx.epsilon, approx.delta
    kk = k / (g - 1)
    st = PrimitiveState(rho.v, u.v, s.v)
    e2s = (s * 2.0).exp()
    energy = 0.5 * rho * u * u + kk * rho**g * e2s
    flux = u * (0.5 * rho * u * u + (kk * g) * rho**g * e2s)
    a = dissipation_A(st, rho.x, u.x, s.x, p)
    d = dissipation_D(st, u.x, s.x, rho.x, p)
    terms = [energy.t, flux.x, -eps * energy.xx, eps * a, -delta * d]
    re = sum(terms)

    r1, r2, r3 = _residual_jets(rho, u, s, approx, p)
    base = rho.v ** (g - 1) * np.exp(2 * s.v)
    e_rho = -0.5 * u.v**2 + kk * g * base - 2 * kk * base * s.v
    e_m = u.v
    e_ups = 2 * kk * base
    combo = e_rho * r1 + e_m * r2 + e_ups * r3
    scale = (sum(np.abs(t) for t in terms) + np.abs(e_rho * r1) + np.abs(e_m * r2)
             + np.abs(e_ups * r3) + 1e-300)
    return np.abs(re - combo) / scale


def sub_identity_residuals(rho: Jet, u: Jet, s: Jet, delta: float, p: GasParams) -> dict:
    """Relative residuals of the three exact rearrangements used to pass from
    the energy form to the conservative entropy equation."""
    g, k = p.gamma, p.k
    e2s = (s * 2.0).exp()
    base = rho ** (g - 1) * e2s

    def rel(lhs, rhs):
        return float(np.max(np.abs(lhs - rhs) / (np.abs(lhs) + np.abs(rhs) + 1e-300)))

    # pressure part of the flux shift
    lhs = (rho.v * u.v * (2 * delta * k * g / ((g - 1) * rho.v)) * base.x
           + k * g / (g - 1) * base.v * (2 * delta * u.x))
    rhs = 2 * delta * k * g / (g - 1) * (base * u).x
    pressure_shift = rel(lhs, rhs)

    # transport of s with the shifted velocity
    coef = 2 * k / (g - 1)
    lhs = coef * rho.v**g * np.exp(2 * s.v) * (s.t + u.v * s.x)
    rhs = (coef * base.v * (rho.v * s.t + (rho.v - 2 * delta) * u.v * s.x)
           + delta * 2 * coef * base.v * u.v * s.x)
    entropy_transport = rel(lhs, rhs)

    # kinetic part of the flux shift
    lhs = 0.5 * u.v**2 * (2 * delta * u.x)
    rhs = delta / 3 * (u * u * u).x
    cubic_shift = rel(lhs, rhs)
    return {"pressure_shift": pressure_shift, "entropy_transport": entropy_transport,
            "cubic_shift": cubic_shift}


@dataclass(frozen=True)
class RefinementLadder:
    """Levels ``(delta_j, eps_j, grid_j)`` with halving delta and nested grids."""

    deltas: tuple[float, ...]
    epsilons: tuple[float, ...]
    grids: tuple[Grid1D, ...]
    t_end: float
    cfl: float = 0.4
    snapshot_every: int | Sequence[int] = 1
    variant: str = "flux-viscosity"

    def __post_init__(self):
        if not (len(self.deltas) == len(self.epsilons) == len(self.grids)):
            raise ValueError("ladder sequences must have equal length")
        if len(self.deltas) < 3:
            raise ValueError("a ladder needs at least three levels")
        ratios = [e / d for e, d in zip(self.epsilons, self.deltas)]
        if not all(b < a for a, b in zip(ratios, ratios[1:])):
            raise ValueError("epsilon/delta must decrease along the ladder")
        counts = [g.n_cells for g in self.grids]
        if any(b % a for a, b in zip(counts, counts[1:])):
            raise ValueError("ladder grids must be nested (cell counts dividing)")
        finest = self.grids[-1]
        if finest.dx > self.epsilons[-1] / 2 * (1 + 1e-12):
            raise ValueError(
                f"finest level does not resolve epsilon: dx={finest.dx:.3g} > "
                f"eps/2={self.epsilons[-1] / 2:.3g}")

    @classmethod
    def halving(cls, delta0: float, levels: int, n0: int, x_min: float, x_max: float,
                t_end: float, boundary: str = "zero-gradient", power: float = 2.0,
                **kw) -> "RefinementLadder":
        """delta halves, eps = delta**power, and the cell count grows by 2**power
        so that dx/eps stays fixed."""
        factor = 2**power
        if abs(factor - round(factor)) > 1e-12:
            raise ValueError("2**power must be an integer for nested grids")
        deltas = tuple(delta0 / 2**j for j in range(levels))
        epsilons = tuple(d**power for d in deltas)
        grids = tuple(Grid1D(x_min, x_max, n0 * int(round(factor)) ** j, boundary)
                      for j in range(levels))
        return cls(deltas, epsilons, grids, t_end, **kw)

    def __len__(self):
        return len(self.deltas)

    def approx(self, j: int) -> ApproxParams:
        return ApproxParams(self.epsilons[j], self.deltas[j])

    def config(self, j: int, p: GasParams) -> SolverConfig:
        every = self.snapshot_every
        if not isinstance(every, int):
            every = every[j]
        return SolverConfig(p, self.approx(j), self.grids[j], self.t_end, cfl=self.cfl,
                            snapshot_every=every, variant=self.variant)


def run_ladder(ladder: RefinementLadder, raw: RawData, p: GasParams,
               max_workers: int = 1) -> list[Trajectory]:
    check_resolution(ladder.grids[-1].dx, ladder.epsilons[-1])
    configs = [ladder.config(j, p) for j in range(len(ladder))]
    if max_workers <= 1:
        return [run(c, raw) for c in configs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda c: run(c, raw), configs))


def restrict(values: np.ndarray, factor: int) -> np.ndarray:
    """Block average onto a grid ``factor`` times coarser."""
    return values.reshape(-1, factor).mean(axis=1)


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    delta: float
    epsilon: float
    dx: float
    err_rho: float
    err_u: float
    err_s: float
    order: float | None = None


def convergence_study(ladder: RefinementLadder, raw: RawData | None, p: GasParams,
                      trajectories: Sequence[Trajectory] | None = None,
                      max_workers: int = 1) -> list[ConvergenceRow]:
    """L1 distances at ``t_end`` of every level to the finest one.

    Velocity and entropy are compared only where both densities exceed
    ``4 max(delta)``.  The order column is ``log2`` of successive ``err_rho``
    ratios, i.e. per halving of delta.
    """
    if trajectories is None:
        trajectories = run_ladder(ladder, raw, p, max_workers)
    else:
        check_resolution(ladder.grids[-1].dx, ladder.epsilons[-1])
    ref = trajectories[-1].final
    n_ref = ladder.grids[-1].n_cells
    rho_cut = 4 * max(ladder.deltas)
    rows = []
    for j, traj in enumerate(trajectories):
        f = traj.final
        factor = n_ref // ladder.grids[j].n_cells
        r_rho, r_u, r_s = (restrict(v, factor) for v in (ref.rho, ref.u, ref.s))
        dx = ladder.grids[j].dx
        mask = (f.rho > rho_cut) & (r_rho > rho_cut)
        err_rho = float(np.sum(np.abs(f.rho - r_rho)) * dx)
        err_u = float(np.sum(np.abs(f.u - r_u)[mask]) * dx)
        err_s = float(np.sum(np.abs(f.s - r_s)[mask]) * dx)
        rows.append(ConvergenceRow(j, ladder.deltas[j], ladder.epsilons[j], dx,
                                   err_rho, err_u, err_s))
    for j in range(1, len(rows) - 1):
        a, b = rows[j - 1].err_rho, rows[j].err_rho
        if a > 0 and b > 0:
            rows[j] = replace(rows[j], order=math.log2(a / b))
    return rows


def write_convergence_csv(rows: Sequence[ConvergenceRow], path) -> None:
    cols = ["level", "delta", "epsilon", "dx", "err_rho", "err_u", "err_s", "order"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for r in rows:
            writer.writerow([r.level] + [f"{v:.17g}" for v in
                                         (r.delta, r.epsilon, r.dx, r.err_rho, r.err_u, r.err_s)]
                            + ["" if r.order is None else f"{r.order:.6g}"])
