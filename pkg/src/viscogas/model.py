"""Pointwise algebra of the polytropic gas system with variable entropy.

Pressure law ``P = k rho**gamma * exp(2 s)`` with the normalisation
``theta = (gamma - 1) / 2`` and ``k = theta**2 / gamma``.  Every function here
is a pure function of its arguments and accepts scalars or numpy arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GasParams:
    gamma: float
    theta: float
    k: float
    lambda_kernel: float


@dataclass(frozen=True)
class PrimitiveState:
    rho: np.ndarray | float
    u: np.ndarray | float
    s: np.ndarray | float


@dataclass(frozen=True)
class ConservedState:
    rho: np.ndarray | float
    m: np.ndarray | float
    upsilon: np.ndarray | float


@dataclass(frozen=True)
class ApproxParams:
    """Viscosity scale ``epsilon`` and flux-shift scale ``delta``."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon > 0 and self.delta > 0):
            raise ValueError(
                f"epsilon and delta must be positive, got epsilon={self.epsilon}, "
                f"delta={self.delta}")

    @classmethod
    def coupled(cls, delta: float, power: float = 2.0) -> "ApproxParams":
        """Default coupling ``epsilon = delta**power`` (epsilon = o(delta))."""
        if power <= 1:
            raise ValueError("coupling power must exceed 1 so that epsilon = o(delta)")
        return cls(epsilon=delta**power, delta=delta)


@dataclass(frozen=True)
class BoundsSpec:
    """Constants of the a-priori estimates: |s| <= N, TV(s) <= c0, and the
    invariant-region pair (M, c)."""

    n_bound: float
    c0: float
    big_m: float
    c_shift: float

    def __post_init__(self):
        if not (0 < self.c0 < 1):
            raise ValueError(f"c0 must satisfy 0 < c0 < 1, got {self.c0}")
        if self.big_m > self.c_shift:
            raise ValueError(
                f"M <= c is required, got M={self.big_m}, c={self.c_shift}")
        if not (0 < self.c_shift * self.c0 < self.big_m):
            raise ValueError(
                f"0 < c*c0 < M is required, got c*c0={self.c_shift * self.c0}, "
                f"M={self.big_m}")
        if self.n_bound < 0:
            raise ValueError(f"N must be nonnegative, got {self.n_bound}")


def derive_params(gamma: float) -> GasParams:
    if not gamma > 1:
        raise ValueError(f"adiabatic exponent must exceed 1, got gamma={gamma}")
    if gamma > 3:
        warnings.warn(
            f"gamma={gamma} > 3: the acoustic fields are not genuinely nonlinear "
            "at vacuum", stacklevel=2)
    theta = (gamma - 1) / 2
    return GasParams(
        gamma=gamma,
        theta=theta,
        k=theta**2 / gamma,
        lambda_kernel=(3 - gamma) / (2 * (gamma - 1)),
    )


def sound_amplitude(state: PrimitiveState, p: GasParams):
    """``rho**theta * exp(s)``, half the sum of the two Riemann invariants."""
    return np.power(state.rho, p.theta) * np.exp(state.s)


def pressure(state: PrimitiveState, p: GasParams):
    return p.k * np.power(state.rho, p.gamma) * np.exp(2 * state.s)


def perturbed_pressure(rho, delta, p: GasParams):
    """Flux-shifted pressure ``P1(rho, delta)``; the caller multiplies by exp(2s)."""
    g = p.gamma
    return p.k * np.power(rho, g) - 2 * delta * p.k * g / (g - 1) * np.power(rho, g - 1)


def eigenvalues(state: PrimitiveState, p: GasParams):
    c = p.theta * sound_amplitude(state, p)
    return state.u - c, state.u + c, state.u + 0.0 * c


def perturbed_eigenvalues(state: PrimitiveState, delta, p: GasParams):
    rho = np.asarray(state.rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("perturbed eigenvalues require rho > 0")
    c = (rho - 2 * delta) / rho * p.theta * sound_amplitude(state, p)
    return state.u - c, state.u + c


def riemann_invariants(state: PrimitiveState, p: GasParams):
    """Return ``(z, w)`` with ``z = rho^theta e^s - u`` and ``w = rho^theta e^s + u``."""
    a = sound_amplitude(state, p)
    return a - state.u, a + state.u


def genuine_nonlinearity(state: PrimitiveState, p: GasParams):
    rho = np.asarray(state.rho, dtype=float)
    if p.theta < 1 and np.any(rho <= 0):
        raise ValueError("grad(lambda).r is singular at rho = 0 when gamma < 3")
    g2 = p.theta * (1 + p.theta) * np.power(rho, p.theta - 1) * np.exp(state.s)
    return -g2, g2, np.zeros_like(g2)


def to_conserved(state: PrimitiveState) -> ConservedState:
    return ConservedState(
        rho=state.rho, m=state.rho * state.u, upsilon=state.rho * state.s)


def to_primitive(c: ConservedState) -> PrimitiveState:
    rho = np.asarray(c.rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("primitive recovery requires rho > 0")
    return PrimitiveState(rho=c.rho, u=c.m / c.rho, s=c.upsilon / c.rho)


def dissipation_A(state: PrimitiveState, rho_x, u_x, s_x, p: GasParams):
    """Nonnegative viscous dissipation density of the energy equation.

    ``A = rho u_x^2 + k rho^(gamma-2) e^(2s) (gamma rho_x^2 + 4/(gamma-1) rho^2 s_x^2
    + 4 rho rho_x s_x)``.  The bracket is a positive definite quadratic form in
    ``(rho_x, rho s_x)`` for every gamma > 1.
    """
    g = p.gamma
    rho = np.asarray(state.rho, dtype=float)
    if g < 2 and np.any((rho <= 0) & (np.asarray(rho_x) != 0)):
        raise ValueError("rho^(gamma-2) rho_x^2 is singular at vacuum for gamma < 2")
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = p.k * np.power(rho, g - 2) * np.exp(2 * state.s)
        form = (g * rho_x**2 + 4 / (g - 1) * rho**2 * s_x**2
                + 4 * rho * rho_x * s_x)
        thermal = np.where(form == 0, 0.0, weight * form)
    return rho * u_x**2 + thermal


def dissipation_D(state: PrimitiveState, u_x, s_x, rho_x, p: GasParams):
    """Flux-shift source ``D`` of the energy equation, with the two x-derivative
    groups expanded by the chain rule from the supplied gradients."""
    g = p.gamma
    rho, u, s = state.rho, state.u, state.s
    base = np.power(rho, g - 1) * np.exp(2 * s)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_grad = np.where(rho_x == 0, 0.0, (g - 1) * rho_x / rho)
    base_u_x = base * (u_x + u * (log_grad + 2 * s_x))
    return (u**2 * u_x
            + 4 * p.k / (g - 1) * base * u * s_x
            + 2 * p.k * g / (g - 1) * base_u_x)
