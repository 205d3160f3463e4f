"""Snapshot and trajectory checks for the a-priori estimates of the
viscous flux-approximate solutions.

Every check returns a :class:`MonitorReport`; the location of the worst
value is reported as ``(x_index, snapshot_index)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ApproxParams,
    BoundsSpec,
    GasParams,
    dissipation_A,
    riemann_invariants,
    sound_amplitude,
)
from .solver import Field, Trajectory, ddx
from .testfunction import TestFunction, spacetime_integral, validate_support

POSITIVITY_TOL = 1e-8
S_BOUND_TOL = 1e-8
REGION_TOL = 1e-6


@dataclass(frozen=True)
class MonitorReport:
    name: str
    worst_value: float
    threshold: float
    passed: bool
    x_index: int | None = None
    snapshot_index: int | None = None
    details: dict = field(default_factory=dict)

    @property
    def location(self):
        return self.x_index, self.snapshot_index

    def as_record(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "worst_value": self.worst_value,
            "threshold": self.threshold,
            "x_index": "" if self.x_index is None else self.x_index,
            "snapshot_index": "" if self.snapshot_index is None else self.snapshot_index,
        }


@dataclass(frozen=True)
class VariationProfile:
    """Discrete ``c * int_{-inf}^x |s_x| dx`` at the cell centers."""

    beta: np.ndarray
    c_shift: float


def tv_s(field: Field) -> float:
    # summed left to right like the running sum in variation_profile, so that
    # beta[-1] == c * tv_s holds bit for bit
    jumps = np.abs(np.diff(field.s))
    return float(np.cumsum(jumps)[-1]) if jumps.size else 0.0


def variation_profile(field: Field, c_shift: float) -> VariationProfile:
    # beta[0] = 0 and beta[i] sums the i interface jumps to the left of cell i
    jumps = np.abs(np.diff(field.s))
    beta = c_shift * np.concatenate([[0.0], np.cumsum(jumps)])
    return VariationProfile(beta=beta, c_shift=c_shift)


def check_lower_bound(field: Field, delta: float, snapshot_index: int | None = None
                      ) -> MonitorReport:
    gap = field.rho - 2 * delta
    i = int(np.argmin(gap))
    threshold = -POSITIVITY_TOL * (1 + 2 * delta)
    worst = float(gap[i])
    return MonitorReport("lower-bound", worst, threshold, worst >= threshold, i, snapshot_index)


def check_lower_bound_trajectory(traj: Trajectory, delta: float) -> MonitorReport:
    reports = [check_lower_bound(f, delta, n) for n, f in enumerate(traj.snapshots)]
    return min(reports, key=lambda r: r.worst_value)


def check_s_bounds(traj: Trajectory, bounds: BoundsSpec) -> MonitorReport:
    """Sup bound ``|s| <= N`` and variation bound ``TV(s) <= c0`` on every snapshot.

    ``worst_value`` is the largest excess over either bound; whether TV(s) is
    nonincreasing in time is reported in ``details`` only.
    """
    s0 = traj.initial.s
    if bounds.n_bound < np.max(np.abs(s0)) - 1e-12:
        raise ValueError(
            f"N={bounds.n_bound} is below max|s0|={np.max(np.abs(s0)):.6g}")
    tv0 = tv_s(traj.initial)
    if bounds.c0 < tv0 - 1e-12:
        raise ValueError(f"c0={bounds.c0} is below TV(s0)={tv0:.6g}")

    worst, where = -np.inf, (None, None)
    tvs = []
    for n, snap in enumerate(traj.snapshots):
        abs_s = np.abs(snap.s)
        i = int(np.argmax(abs_s))
        tv = tv_s(snap)
        tvs.append(tv)
        for excess, idx in ((abs_s[i] - bounds.n_bound, i), (tv - bounds.c0, None)):
            if excess > worst:
                worst, where = float(excess), (idx, n)
    tvs = np.array(tvs)
    monotone = bool(np.all(np.diff(tvs) <= S_BOUND_TOL))
    return MonitorReport(
        "s-bounds", worst, S_BOUND_TOL, worst <= S_BOUND_TOL, where[0], where[1],
        details={"tv_nonincreasing": monotone, "tv_max": float(tvs.max()),
                 "tv_initial": float(tvs[0])})


def invariant_region_excess(field: Field, bounds: BoundsSpec, p: GasParams):
    """Pointwise ``(w - M - beta, z - M + beta)``."""
    z, w = riemann_invariants(field.primitive(), p)
    beta = variation_profile(field, bounds.c_shift).beta
    return w - bounds.big_m - beta, z - bounds.big_m + beta


def check_invariant_region(traj: Trajectory, bounds: BoundsSpec, p: GasParams
                           ) -> MonitorReport:
    v1, v2 = invariant_region_excess(traj.initial, bounds, p)
    if np.max(v1) > 0 or np.max(v2) > 0:
        raise ValueError(
            "initial data lie outside the region w <= M + beta, z <= M - beta; "
            f"max excess {max(np.max(v1), np.max(v2)):.3g}, increase M")
    worst, where = -np.inf, (None, None)
    worst_w = worst_z = -np.inf
    for n, snap in enumerate(traj.snapshots):
        v1, v2 = invariant_region_excess(snap, bounds, p)
        worst_w = max(worst_w, float(v1.max()))
        worst_z = max(worst_z, float(v2.max()))
        for v in (v1, v2):
            i = int(np.argmax(v))
            if v[i] > worst:
                worst, where = float(v[i]), (i, n)
    return MonitorReport(
        "invariant-region", worst, REGION_TOL, worst <= REGION_TOL, where[0], where[1],
        details={"worst_w": worst_w, "worst_z": worst_z})


def source_sign_terms(field: Field, bounds: BoundsSpec, delta: float, p: GasParams) -> dict:
    """Pointwise quantities behind the comparison argument for ``(v1, v2)``.

    ``I1`` is the source collected in the ``v1`` inequality, evaluated both in
    its raw form and in the factored form used to read off its sign.  The
    factored form gives ``I1 >= (2 delta/rho)|s_x|(c - sgn(s_x) a)(v1 - v2)/2``
    with ``a = rho^theta e^s``; ``J`` is the part of ``I`` that must stay
    nonnegative near the density floor.
    """
    th = p.theta
    c = bounds.c_shift
    rho, u, s = field.rho, field.u, field.s
    a = sound_amplitude(field.primitive(), p)
    s_x = ddx(s, field.grid)
    abs_sx = np.abs(s_x)
    shift = (rho - 2 * delta) / rho
    lam2 = u + shift * th * a
    raw = (lam2 * c * abs_sx
           - (2 * delta / rho * u + th * (rho - 2 * delta) * a / rho) * a * s_x
           - c * shift * u * abs_sx)
    sign = np.where(s_x >= 0, 1.0, -1.0)
    factored = (th * shift * a * abs_sx * (c - sign * a)
                + 2 * delta / rho * abs_sx * u * (c - sign * a))
    v1, v2 = invariant_region_excess(field, bounds, p)
    lower = 2 * delta / rho * abs_sx * (c - sign * a) * 0.5 * (v1 - v2)
    beta = variation_profile(field, c).beta
    j = (th - (th + 1) * 2 * delta / rho) * a + 2 * delta / rho * (bounds.big_m - beta)
    return {"I1": raw, "I1_factored": factored, "I1_margin": raw - lower, "J": j}


def check_source_signs(traj: Trajectory, bounds: BoundsSpec, delta: float, p: GasParams
                      ) -> MonitorReport:
    """Diagnostic: minimum over cells and snapshots of the I1 sign margin and of J.

    Negative values flag points where the comparison argument would not
    close; the identity mismatch between the two I1 forms goes into details.
    """
    worst, where = np.inf, (None, None)
    identity = 0.0
    for n, snap in enumerate(traj.snapshots):
        terms = source_sign_terms(snap, bounds, delta, p)
        scale = 1 + np.max(np.abs(terms["I1"]))
        identity = max(identity, float(np.max(np.abs(terms["I1"] - terms["I1_factored"])) / scale))
        for key in ("I1_margin", "J"):
            v = terms[key]
            i = int(np.argmin(v))
            if v[i] < worst:
                worst, where = float(v[i]), (i, n)
    threshold = -1e-10
    return MonitorReport("source-signs", worst, threshold, worst >= threshold,
                         where[0], where[1], details={"I1_identity": identity})


def estimate_mu(traj: Trajectory, phi: TestFunction, approx: ApproxParams, p: GasParams
                ) -> float:
    """``iint eps A phi dx dt``, the dissipation tested against ``phi >= 0``."""
    if not phi.nonnegative:
        raise ValueError("estimate_mu needs a nonnegative test function")
    validate_support(phi, traj, allow_initial=False)
    grid = traj.grid

    def integrand(snap, x):
        st = snap.primitive()
        a = dissipation_A(st, ddx(st.rho, grid), ddx(st.u, grid), ddx(st.s, grid), p)
        return approx.epsilon * a * phi.phi(x, snap.t)

    return spacetime_integral(traj, integrand)


def uniform_bounds_limits(bounds: BoundsSpec, p: GasParams) -> tuple[float, float]:
    """Sup bounds on rho and |u| implied by the invariant region."""
    rho_max = (bounds.big_m * np.exp(bounds.n_bound)) ** (1 / p.theta)
    u_max = bounds.big_m + bounds.c_shift * bounds.c0
    return float(rho_max), float(u_max)


def check_uniform_bounds(traj: Trajectory, bounds: BoundsSpec, approx: ApproxParams,
                         p: GasParams) -> MonitorReport:
    """Aggregate of the floor, the entropy bounds and the sup bounds on rho, |u|.

    ``worst_value`` is the largest excess over a bound after subtracting that
    bound's tolerance, so the report passes iff ``worst_value <= 0``.
    """
    rho_max, u_max = uniform_bounds_limits(bounds, p)
    sub = {
        "lower-bound": check_lower_bound_trajectory(traj, approx.delta),
        "s-bounds": check_s_bounds(traj, bounds),
    }
    candidates = [
        (-(sub["lower-bound"].worst_value - sub["lower-bound"].threshold),
         sub["lower-bound"].location, "lower-bound"),
        (sub["s-bounds"].worst_value - sub["s-bounds"].threshold,
         sub["s-bounds"].location, "s-bounds"),
    ]
    for n, snap in enumerate(traj.snapshots):
        i = int(np.argmax(snap.rho))
        candidates.append((float(snap.rho[i] - rho_max - REGION_TOL), (i, n), "rho-max"))
        abs_u = np.abs(snap.u)
        i = int(np.argmax(abs_u))
        candidates.append((float(abs_u[i] - u_max - REGION_TOL), (i, n), "u-max"))
    worst, loc, which = max(candidates, key=lambda c: c[0])
    return MonitorReport(
        "uniform-bounds", float(worst), 0.0, worst <= 0, loc[0], loc[1],
        details={"violated_by": which, "rho_max": rho_max, "u_max": u_max})


MONITOR_IDS = ("lower-bound", "s-bounds", "invariant-region", "source-signs",
               "uniform-bounds")


def write_monitors_csv(reports, path) -> None:
    cols = ["name", "pass", "worst_value", "threshold", "x_index", "snapshot_index"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            rec = r.as_record()
            rec["worst_value"] = f"{rec['worst_value']:.17g}"
            rec["threshold"] = f"{rec['threshold']:.17g}"
            rec["pass"] = "true" if rec["pass"] else "false"
            writer.writerow(rec)
