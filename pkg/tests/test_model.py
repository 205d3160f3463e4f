import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from viscogas.model import (
    ApproxParams,
    BoundsSpec,
    ConservedState,
    PrimitiveState,
    derive_params,
    dissipation_A,
    dissipation_D,
    eigenvalues,
    genuine_nonlinearity,
    perturbed_eigenvalues,
    perturbed_pressure,
    pressure,
    riemann_invariants,
    to_conserved,
    to_primitive,
)

finite = dict(allow_nan=False, allow_infinity=False)
gammas = st.sampled_from([1.4, 5 / 3, 2.0, 3.0])


def test_params_gamma_3():
    p = derive_params(3.0)
    assert (p.theta, p.k, p.lambda_kernel) == (1.0, 1 / 3, 0.0)


def test_params_gamma_2():
    p = derive_params(2.0)
    assert p.theta == 0.5 and p.k == 0.125
    # the defining formula (3 - gamma) / (2 (gamma - 1)) gives 1/2 here
    assert p.lambda_kernel == 0.5


def test_params_five_thirds_against_rationals():
    g = Fraction(5, 3)
    theta = (g - 1) / 2
    k = theta**2 / g
    lam = (3 - g) / (2 * (g - 1))
    assert (theta, k, lam) == (Fraction(1, 3), Fraction(1, 15), Fraction(1))
    p = derive_params(5 / 3)
    assert p.theta == pytest.approx(float(theta), rel=1e-15)
    assert p.k == pytest.approx(float(k), rel=1e-15)
    assert p.lambda_kernel == pytest.approx(float(lam), rel=1e-15)


@pytest.mark.parametrize("gamma", [1.0, 0.5, -2.0])
def test_params_reject_gamma_at_most_one(gamma):
    with pytest.raises(ValueError):
        derive_params(gamma)


def test_params_warn_above_three():
    with pytest.warns(UserWarning, match="genuinely nonlinear"):
        p = derive_params(4.0)
    assert -1 < p.lambda_kernel < 0


@given(st.floats(1.0001, 50.0))
def test_lambda_integrable(gamma):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert derive_params(gamma).lambda_kernel > -1


def test_pressure_values():
    p2 = derive_params(2.0)
    assert pressure(PrimitiveState(0.0, 3.0, 1.0), p2) == 0.0
    assert pressure(PrimitiveState(1.0, 0.0, 0.0), p2) == 0.125
    assert pressure(PrimitiveState(2.0, 0.0, 0.5), p2) == pytest.approx(0.5 * math.e, rel=1e-14)
    assert pressure(PrimitiveState(2.0, 0.0, 0.5), p2) == pytest.approx(1.35914, abs=1e-5)


def test_perturbed_pressure():
    p2 = derive_params(2.0)
    assert perturbed_pressure(1.0, 0.1, p2) == pytest.approx(0.075, rel=1e-14)
    p = derive_params(1.4)
    rho = np.linspace(0.1, 3, 7)
    assert np.allclose(perturbed_pressure(rho, 0.0, p), p.k * rho**1.4, rtol=1e-15)
    for delta in (0.01, 0.3):
        expected = -p.k * (2 * delta) ** p.gamma / (p.gamma - 1)
        assert perturbed_pressure(2 * delta, delta, p) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("gamma", [1.4, 2.0, 3.0])
def test_perturbed_pressure_monotone_above_floor(gamma):
    p = derive_params(gamma)
    delta, h = 0.05, 1e-6
    rho = np.linspace(2 * delta, 4, 200)
    fd = (perturbed_pressure(rho + h, delta, p) - perturbed_pressure(rho - h, delta, p)) / (2 * h)
    exact = p.k * gamma * rho ** (gamma - 2) * (rho - 2 * delta)
    assert np.all(fd >= -1e-8)
    assert np.allclose(fd, exact, atol=1e-7)


def test_eigenvalue_examples():
    assert eigenvalues(PrimitiveState(1.0, 0.0, 0.0), derive_params(2.0)) == (-0.5, 0.5, 0.0)
    assert eigenvalues(PrimitiveState(0.0, 7.0, 2.0), derive_params(1.4)) == (7.0, 7.0, 7.0)
    assert eigenvalues(PrimitiveState(4.0, 1.0, 0.0), derive_params(3.0)) == (-3.0, 5.0, 1.0)


@given(gammas, st.floats(1e-3, 10), st.floats(-5, 5), st.floats(-2, 2))
def test_strict_hyperbolicity_and_invariant_consistency(gamma, rho, u, s):
    p = derive_params(gamma)
    state = PrimitiveState(rho, u, s)
    l1, l2, l3 = eigenvalues(state, p)
    assert l1 < l3 < l2
    z, w = riemann_invariants(state, p)
    assert l2 - l1 == pytest.approx(p.theta * (w + z), rel=1e-12)
    d1, d2 = perturbed_eigenvalues(state, 0.0, p)
    assert d1 == pytest.approx(l1, rel=4e-16, abs=4e-16 * abs(u))
    assert d2 == pytest.approx(l2, rel=4e-16, abs=4e-16 * abs(u))


def test_perturbed_eigenvalue_examples():
    p2 = derive_params(2.0)
    assert perturbed_eigenvalues(PrimitiveState(1.0, 0.0, 0.0), 0.25, p2) == (-0.25, 0.25)
    lo, hi = perturbed_eigenvalues(PrimitiveState(0.5, 1.3, 0.2), 0.25, p2)
    assert lo == hi == 1.3
    with pytest.raises(ValueError):
        perturbed_eigenvalues(PrimitiveState(0.0, 0.0, 0.0), 0.1, p2)


def test_riemann_invariant_examples():
    assert riemann_invariants(PrimitiveState(1.0, 2.0, 0.0), derive_params(3.0)) == (-1.0, 3.0)
    assert riemann_invariants(PrimitiveState(0.0, 1.5, 0.3), derive_params(1.4)) == (-1.5, 1.5)


@given(gammas, st.floats(0.0, 10), st.floats(-5, 5), st.floats(-2, 2))
def test_riemann_invariant_sums(gamma, rho, u, s):
    p = derive_params(gamma)
    state = PrimitiveState(rho, u, s)
    z, w = riemann_invariants(state, p)
    amp = rho**p.theta * math.exp(s)
    assert w + z == pytest.approx(2 * amp, rel=1e-12, abs=1e-12)
    assert w - z == pytest.approx(2 * u, rel=1e-12, abs=1e-12)


def test_genuine_nonlinearity():
    p2 = derive_params(2.0)
    assert genuine_nonlinearity(PrimitiveState(1.0, 0.0, 0.0), p2) == (-0.75, 0.75, 0.0)
    with pytest.raises(ValueError):
        genuine_nonlinearity(PrimitiveState(0.0, 0.0, 0.0), p2)


def test_genuine_nonlinearity_symbolic():
    # grad(lambda_2) . r_2 in (rho, u) coordinates at fixed s, with r_2 = (1, c/rho)
    rho, u, s, th = sp.symbols("rho u s theta", positive=True)
    c = th * rho**th * sp.exp(s)
    lam2 = u + c
    r2 = (1, c / rho)
    expr = sp.simplify(sp.diff(lam2, rho) * r2[0] + sp.diff(lam2, u) * r2[1])
    p = derive_params(1.4)
    for r_val, s_val in [(0.7, 0.1), (2.0, -0.3)]:
        exact = float(expr.subs({rho: r_val, s: s_val, th: p.theta, u: 0.0}))
        g1, g2, g3 = genuine_nonlinearity(PrimitiveState(r_val, 0.0, s_val), p)
        assert g2 == pytest.approx(exact, rel=1e-13)
        assert g1 == -g2 and g3 == 0


def test_conversions():
    c = to_conserved(PrimitiveState(2.0, 3.0, -1.0))
    assert (c.rho, c.m, c.upsilon) == (2.0, 6.0, -2.0)
    with pytest.raises(ValueError):
        to_primitive(ConservedState(0.0, 0.0, 0.0))


@given(st.floats(1e-3, 1e3), st.integers(-6, 6), st.integers(-6, 6),
       st.sampled_from([-1.0, 1.0]))
def test_round_trip(rho, ku, ks, sign):
    # powers of two make rho*u and rho*s exact, hence exactly invertible
    u, s = sign * 2.0**ku, -sign * 2.0**ks
    back = to_primitive(to_conserved(PrimitiveState(rho, u, s)))
    assert (back.rho, back.u, back.s) == (rho, u, s)


@given(st.floats(1e-2, 1e2), st.floats(-3, 3), st.floats(-3, 3))
def test_round_trip_close(rho, u, s):
    back = to_primitive(to_conserved(PrimitiveState(rho, u, s)))
    assert back.u == pytest.approx(u, rel=4e-16, abs=1e-300)
    assert back.s == pytest.approx(s, rel=4e-16, abs=1e-300)


def test_dissipation_A_simple_cases():
    p = derive_params(1.4)
    state = PrimitiveState(1.3, 0.2, 0.1)
    assert dissipation_A(state, 0.0, 0.0, 0.0, p) == 0.0
    single = p.k * p.gamma * 1.3 ** (p.gamma - 2) * math.exp(0.2) * 0.7**2
    assert dissipation_A(state, 0.7, 0.0, 0.0, p) == pytest.approx(single, rel=1e-14)


def test_dissipation_A_vacuum():
    state = PrimitiveState(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        dissipation_A(state, 1.0, 0.0, 0.0, derive_params(1.4))
    assert dissipation_A(state, 0.0, 1.0, 1.0, derive_params(1.4)) == 0.0
    assert dissipation_A(state, 1.0, 0.0, 0.0, derive_params(3.0)) == 0.0


@pytest.mark.parametrize("gamma", [1.4, 2.0, 3.0])
def test_dissipation_A_nonnegative_sweep(gamma, rng):
    p = derive_params(gamma)
    n = 10_000
    state = PrimitiveState(rng.uniform(1e-3, 5, n), rng.normal(size=n), rng.uniform(-2, 2, n))
    a = dissipation_A(state, rng.normal(size=n) * 10, rng.normal(size=n) * 10,
                      rng.normal(size=n) * 10, p)
    assert np.all(a >= 0)


def test_dissipation_D_zero_cases():
    p = derive_params(1.4)
    assert dissipation_D(PrimitiveState(1.0, 0.5, 0.1), 0.0, 0.0, 0.0, p) == 0.0
    assert dissipation_D(PrimitiveState(1.0, 0.0, 0.1), 0.0, 0.3, 0.4, p) == 0.0


def test_dissipation_D_symbolic_oracle():
    x = sp.symbols("x")
    g = sp.Integer(2)
    k = sp.Rational(1, 8)
    rho = 1 + sp.Rational(1, 10) * sp.sin(x)
    u = sp.cos(x)
    s = sp.Integer(0)
    base = rho ** (g - 1) * sp.exp(2 * s)
    d = (sp.diff(u**3, x) / 3 + 4 * k / (g - 1) * base * u * sp.diff(s, x)
         + 2 * k * g / (g - 1) * sp.diff(base * u, x))
    for x0 in (0.0, 0.7):
        exact = float(d.subs(x, x0))
        val = dissipation_D(
            PrimitiveState(float(rho.subs(x, x0)), float(u.subs(x, x0)), 0.0),
            float(sp.diff(u, x).subs(x, x0)), 0.0, float(sp.diff(rho, x).subs(x, x0)),
            derive_params(2.0))
        assert val == pytest.approx(exact, abs=1e-12)


def test_approx_params():
    a = ApproxParams.coupled(0.1)
    assert a.epsilon == pytest.approx(0.01) and a.delta == 0.1
    with pytest.raises(ValueError):
        ApproxParams(0.0, 0.1)
    with pytest.raises(ValueError):
        ApproxParams(0.1, -1.0)
    with pytest.raises(ValueError):
        ApproxParams.coupled(0.1, power=1.0)


def test_bounds_spec_validation():
    BoundsSpec(n_bound=0.5, c0=0.4, big_m=2.0, c_shift=2.0)
    with pytest.raises(ValueError, match="c0"):
        BoundsSpec(0.5, 1.0, 2.0, 2.0)
    with pytest.raises(ValueError, match="M <= c"):
        BoundsSpec(0.5, 0.4, 3.0, 2.0)
    with pytest.raises(ValueError, match="c\\*c0 < M"):
        BoundsSpec(0.5, 0.6, 1.0, 2.0)
    with pytest.raises(ValueError, match="N"):
        BoundsSpec(-0.1, 0.4, 2.0, 2.0)
