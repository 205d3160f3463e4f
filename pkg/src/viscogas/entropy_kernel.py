"""Weak entropy / entropy-flux pairs generated by the Beta-weighted kernel.

For a generator ``g`` the weak entropy is

    eta(rho, u, s) = rho * int_0^1 [tau (1 - tau)]^lam g(Phi) dtau,
    Phi = u + a - 2 a tau,   a = rho^theta e^s,

and the flux of the flux-shifted system splits as ``q = q1 - 2 delta q2``.
All tau-integrals are evaluated with a Gauss-Jacobi rule that carries the
endpoint weight exactly, so singular weights (gamma > 3) cost nothing extra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import betaln

from .model import GasParams, PrimitiveState, sound_amplitude


@dataclass(frozen=True)
class EntropyGenerator:
    """Test function ``g`` with its first two derivatives and the
    antiderivative ``G`` normalised by ``G(0) = 0``.

    ``kind`` is one of ``constant``, ``linear``, ``quadratic``, ``polynomial``
    (all stored as power-series ``coeffs``, lowest degree first) or
    ``exponential`` with ``g(xi) = exp(rate * xi)``.
    """

    kind: str
    coeffs: tuple[float, ...] = ()
    rate: float = 0.0

    @classmethod
    def constant(cls, value: float = 1.0):
        return cls("constant", (float(value),))

    @classmethod
    def linear(cls, slope: float = 1.0, offset: float = 0.0):
        return cls("linear", (float(offset), float(slope)))

    @classmethod
    def quadratic(cls, a: float = 1.0, b: float = 0.0, c: float = 0.0):
        """``g(xi) = a xi^2 + b xi + c``."""
        return cls("quadratic", (float(c), float(b), float(a)))

    @classmethod
    def exponential(cls, rate: float):
        if rate == 0:
            raise ValueError("exponential generator needs a nonzero rate")
        return cls("exponential", rate=float(rate))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]):
        if len(coeffs) == 0:
            raise ValueError("polynomial generator needs at least one coefficient")
        return cls("polynomial", tuple(float(c) for c in coeffs))

    @property
    def _poly(self):
        return np.polynomial.Polynomial(self.coeffs)

    def g(self, xi):
        if self.kind == "exponential":
            return np.exp(self.rate * xi)
        return self._poly(xi)

    def dg(self, xi):
        if self.kind == "exponential":
            return self.rate * np.exp(self.rate * xi)
        return self._poly.deriv(1)(xi)

    def d2g(self, xi):
        if self.kind == "exponential":
            return self.rate**2 * np.exp(self.rate * xi)
        return self._poly.deriv(2)(xi)

    def antideriv(self, xi):
        if self.kind == "exponential":
            return np.expm1(self.rate * xi) / self.rate
        return self._poly.integ(1, lbnd=0.0)(xi)

    def min_curvature(self, lo: float, hi: float) -> float:
        """Lower bound of ``g''`` on ``[lo, hi]``."""
        if self.kind == "exponential":
            return float(min(self.d2g(lo), self.d2g(hi)))
        second = self._poly.deriv(2)
        candidates = [lo, hi] + [
            r.real for r in second.deriv(1).roots()
            if abs(r.imag) < 1e-12 and lo <= r.real <= hi
        ]
        return float(min(second(c) for c in candidates))

    def is_convex(self, lo: float = -1e3, hi: float = 1e3) -> bool:
        return self.min_curvature(lo, hi) > 0


@dataclass(frozen=True)
class QuadratureRule:
    lambda_kernel: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return len(self.nodes)

    @property
    def odd_moment(self) -> np.ndarray:
        """``1 - 2 tau`` at the nodes."""
        return 1.0 - 2.0 * self.nodes


def build_quadrature(lambda_kernel: float, n: int = 32) -> QuadratureRule:
    """Gauss-Jacobi rule for the weight ``[tau (1 - tau)]^lam`` on (0, 1).

    Golub-Welsch on the symmetric Jacobi recurrence (alpha = beta = lam) on
    [-1, 1], mapped by ``tau = (x + 1) / 2``.
    """
    lam = float(lambda_kernel)
    if not lam > -1:
        raise ValueError(f"weight exponent must exceed -1, got {lam}")
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got n={n}")

    j = np.arange(1, n, dtype=float)
    s = 2 * j + 2 * lam
    with np.errstate(divide="ignore", invalid="ignore"):
        off2 = 4 * j * (j + lam) ** 2 * (j + 2 * lam) / (s**2 * (s + 1) * (s - 1))
    # the generic expression is 0/0 at j = 1 when lam = -1/2
    off2[0] = 4 * (1 + lam) ** 2 / ((2 + 2 * lam) ** 2 * (3 + 2 * lam))
    jacobi = np.diag(np.sqrt(off2), 1)
    jacobi = jacobi + jacobi.T
    x, vecs = np.linalg.eigh(jacobi)

    # the map to (0, 1) turns the [-1, 1] moment 2^(2 lam + 1) B into B
    total = np.exp(betaln(lam + 1, lam + 1))
    weights = vecs[0] ** 2 * total
    nodes = 0.5 * (x + 1.0)
    # exact symmetry about tau = 1/2
    nodes = 0.5 * (nodes + (1.0 - nodes[::-1]))
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(lambda_kernel=lam, nodes=nodes, weights=weights)


def kernel_argument(state: PrimitiveState, q: QuadratureRule, p: GasParams):
    """``Phi(rho, u, s, tau)`` at the quadrature nodes, shape ``state.shape + (n,)``."""
    a = np.asarray(sound_amplitude(state, p), dtype=float)[..., None]
    u = np.asarray(state.u, dtype=float)[..., None]
    return u + a * q.odd_moment


def _moment(values, q: QuadratureRule, power: int = 0):
    if power:
        values = values * q.odd_moment**power
    return values @ q.weights


def weak_entropy(state: PrimitiveState, g: EntropyGenerator, q: QuadratureRule,
                 p: GasParams):
    phi = kernel_argument(state, q, p)
    return np.asarray(state.rho, dtype=float) * _moment(g.g(phi), q)


def weak_entropy_flux(state: PrimitiveState, g: EntropyGenerator, delta: float,
                      q: QuadratureRule, p: GasParams):
    """Return ``(q_total, q1, q2)`` with ``q_total = q1 - 2 delta q2``."""
    phi = kernel_argument(state, q, p)
    rho = np.asarray(state.rho, dtype=float)
    u = np.asarray(state.u, dtype=float)
    a = np.asarray(sound_amplitude(state, p), dtype=float)
    gphi = g.g(phi)
    m0 = _moment(gphi, q)
    m1 = _moment(gphi, q, 1)
    q1 = rho * (u * m0 + p.theta * a * m1)
    q2 = _moment(g.antideriv(phi), q) + p.theta * a * m1
    return q1 - 2 * delta * q2, q1, q2


def physical_entropy_pair(state: PrimitiveState, p: GasParams):
    """Mechanical energy and its flux, ``(eta0, q0)``."""
    g = p.gamma
    rho, u = state.rho, state.u
    thermal = p.k / (g - 1) * np.power(rho, g) * np.exp(2 * state.s)
    kinetic = 0.5 * rho * u**2
    return kinetic + thermal, u * (kinetic + g * thermal)


@dataclass(frozen=True)
class EntropyDerivatives:
    eta_rho: np.ndarray
    eta_u: np.ndarray
    eta_s: np.ndarray
    eta_rhorho: np.ndarray
    eta_rhou: np.ndarray
    eta_uu: np.ndarray
    eta_rhos: np.ndarray
    eta_ss: np.ndarray
    eta_us: np.ndarray


def entropy_derivatives(state: PrimitiveState, g: EntropyGenerator,
                        q: QuadratureRule, p: GasParams) -> EntropyDerivatives:
    rho = np.asarray(state.rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("entropy derivatives require rho > 0")
    th = p.theta
    a = np.asarray(sound_amplitude(state, p), dtype=float)
    phi = kernel_argument(state, q, p)
    g0, g1, g2 = g.g(phi), g.dg(phi), g.d2g(phi)

    m0_g = _moment(g0, q)
    m0_g1, m1_g1 = _moment(g1, q), _moment(g1, q, 1)
    m0_g2, m1_g2, m2_g2 = _moment(g2, q), _moment(g2, q, 1), _moment(g2, q, 2)
    a_over_rho = a / rho

    return EntropyDerivatives(
        eta_rho=m0_g + th * a * m1_g1,
        eta_u=rho * m0_g1,
        eta_s=rho * a * m1_g1,
        eta_rhorho=(th + th**2) * a_over_rho * m1_g1
        + th**2 * a * a_over_rho * m2_g2,
        eta_rhou=m0_g1 + th * a * m1_g2,
        eta_uu=rho * m0_g2,
        eta_rhos=(1 + th) * a * m1_g1 + th * a**2 * m2_g2,
        eta_ss=rho * a * m1_g1 + rho * a**2 * m2_g2,
        eta_us=rho * a * m1_g2,
    )


@dataclass
class KernelResidualReport:
    """Max over sample states of the four compatibility residuals at step ``h``."""

    h: float
    entropy_equation: float
    flux_u: float
    flux1_rho: float
    flux2_rho: float

    def as_dict(self) -> dict[str, float]:
        return {
            "entropy_equation": self.entropy_equation,
            "flux_u": self.flux_u,
            "flux1_rho": self.flux1_rho,
            "flux2_rho": self.flux2_rho,
        }

    def max(self) -> float:
        return max(self.as_dict().values())


def verify_entropy_pde(g: EntropyGenerator, sample_states: PrimitiveState, h: float,
                       p: GasParams, delta: float = 0.0,
                       q: QuadratureRule | None = None) -> KernelResidualReport:
    """Finite-difference check that the kernel pair solves the compatibility system.

    Flux derivatives are centered differences of the kernel fluxes.  The
    second derivatives of the entropy are centered differences of the
    closed-form first derivatives, which keeps the check independent of the
    second-derivative formulas and out of the roundoff regime of a
    three-point second difference.
    """
    if q is None:
        q = build_quadrature(p.lambda_kernel)
    rho = np.asarray(sample_states.rho, dtype=float)
    u = np.asarray(sample_states.u, dtype=float)
    s = np.asarray(sample_states.s, dtype=float)
    if np.any(rho - h <= 0):
        raise ValueError("sample states must keep rho - h > 0")

    def first(r, v):
        d = entropy_derivatives(PrimitiveState(r, v, s), g, q, p)
        return d.eta_rho, d.eta_u

    def fluxes(r, v):
        return weak_entropy_flux(PrimitiveState(r, v, s), g, delta, q, p)

    eta_rho, eta_u = first(rho, u)
    eta_rhorho = (first(rho + h, u)[0] - first(rho - h, u)[0]) / (2 * h)
    eta_uu = (first(rho, u + h)[1] - first(rho, u - h)[1]) / (2 * h)

    qt_up, _, _ = fluxes(rho, u + h)
    qt_um, _, _ = fluxes(rho, u - h)
    _, q1_rp, q2_rp = fluxes(rho + h, u)
    _, q1_rm, q2_rm = fluxes(rho - h, u)
    q_u = (qt_up - qt_um) / (2 * h)
    q1_rho = (q1_rp - q1_rm) / (2 * h)
    q2_rho = (q2_rp - q2_rm) / (2 * h)

    coef = p.theta**2 * np.power(rho, p.gamma - 3) * np.exp(2 * s)
    return KernelResidualReport(
        h=h,
        entropy_equation=float(np.max(np.abs(eta_rhorho - coef * eta_uu))),
        flux_u=float(np.max(np.abs(q_u - ((rho - 2 * delta) * eta_rho + u * eta_u)))),
        flux1_rho=float(np.max(np.abs(q1_rho - (u * eta_rho + coef * rho * eta_u)))),
        flux2_rho=float(np.max(np.abs(q2_rho - coef * eta_u))),
    )


# Residuals below this are treated as exact; their step-halving ratio is noise.
ROUNDOFF_FLOOR = 1e-9


def richardson_orders(coarse: KernelResidualReport,
                      fine: KernelResidualReport) -> dict[str, float | None]:
    """Observed order ``log2(r(h) / r(h/2))`` per residual; ``None`` when the
    coarse residual is already at the roundoff floor."""
    ratio = coarse.h / fine.h
    orders: dict[str, float | None] = {}
    for name, rc in coarse.as_dict().items():
        rf = fine.as_dict()[name]
        if rc <= ROUNDOFF_FLOOR:
            orders[name] = None
        else:
            orders[name] = float(np.log(rc / max(rf, 1e-300)) / np.log(ratio))
    return orders


def random_states(n: int, rng: np.random.Generator, rho_range=(0.5, 2.0),
                  u_max: float = 2.0, s_max: float = 0.5) -> PrimitiveState:
    return PrimitiveState(
        rho=rng.uniform(*rho_range, size=n),
        u=rng.uniform(-u_max, u_max, size=n),
        s=rng.uniform(-s_max, s_max, size=n),
    )


@dataclass(frozen=True)
class EntropyPair:
    """An entropy/flux pair of the limit system evaluated on primitive states."""

    name: str
    evaluate: Callable[[PrimitiveState], tuple]
    convex: bool


def mass_pair() -> EntropyPair:
    return EntropyPair("mass", lambda st: (st.rho, st.rho * st.u), convex=False)


def physical_pair(p: GasParams) -> EntropyPair:
    return EntropyPair("physical", lambda st: physical_entropy_pair(st, p), convex=True)


def kernel_pair(g: EntropyGenerator, p: GasParams,
                q: QuadratureRule | None = None) -> EntropyPair:
    """Weak entropy pair of the unshifted system (delta = 0)."""
    if q is None:
        q = build_quadrature(p.lambda_kernel)

    def evaluate(st):
        return weak_entropy(st, g, q, p), weak_entropy_flux(st, g, 0.0, q, p)[1]

    return EntropyPair(f"kernel-{g.kind}", evaluate, convex=g.is_convex())
