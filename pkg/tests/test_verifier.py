import csv

import numpy as np
import pytest
import sympy as sp

from viscogas.entropy_kernel import mass_pair, physical_pair
from viscogas.model import ApproxParams, derive_params
from viscogas.solver import Grid1D, SolverConfig, constant_data, riemann_data, run, sine_data
from viscogas.verifier import (
    Jet,
    RefinementLadder,
    TestFunction,
    check_entropy_inequality,
    convergence_study,
    energy_identity_defect,
    entropy_inequality_residual,
    entropy_inequality_scale,
    equivalence_residual,
    random_jets,
    restrict,
    sub_identity_residuals,
    weak_residual,
    write_convergence_csv,
)

PHI = TestFunction(0.0, 0.05, 0.5, 0.04)


def test_test_function_derivatives():
    phi = TestFunction(0.2, 0.3, 0.25, 0.1, 1.5)
    x = np.linspace(0.0, 0.4, 13)[1:-1]
    t = 0.27
    h = 1e-6
    fd_x = (phi.phi(x + h, t) - phi.phi(x - h, t)) / (2 * h)
    fd_t = (phi.phi(x, t + h) - phi.phi(x, t - h)) / (2 * h)
    assert np.allclose(phi.phi_x(x, t), fd_x, rtol=1e-7, atol=1e-9)
    assert np.allclose(phi.phi_t(x, t), fd_t, rtol=1e-7, atol=1e-9)
    outside = np.array([-0.1, 0.05, 0.45, 0.6])
    for f in (phi.phi, phi.phi_x, phi.phi_t):
        assert np.all(f(outside, 0.5) == 0)
        assert np.all(f(outside, t)[[0, 3]] == 0)
    assert np.all(phi.phi(x, t) >= 0)
    with pytest.raises(ValueError):
        TestFunction(0.0, 0.1, 0.0, 0.1)


def test_constant_trajectory_residuals_vanish(constant_run, gas14):
    r = weak_residual(constant_run, PHI.__class__(0.0, 0.025, 0.5, 0.025), gas14)
    assert max(abs(v) for v in r) <= 1e-12


def test_weak_residual_initial_term(constant_run, gas14):
    # a test function straddling t = 0 picks up the initial-data integral
    phi = TestFunction(0.0, 0.0, 0.5, 0.025)
    r = weak_residual(constant_run, phi, gas14)
    first = constant_run.initial
    x, dx = constant_run.grid.x, constant_run.grid.dx
    initial = [np.sum(u0 * phi.phi(x, 0.0)) * dx for u0 in (first.rho, first.m, first.upsilon)]
    # what remains is the O(stride^2) trapezoid error in time
    for value, init in zip(r, initial):
        assert abs(value) <= 1e-2 * abs(init)
    with pytest.raises(ValueError):
        entropy_inequality_residual(constant_run, physical_pair(gas14), phi, gas14)


def test_weak_residual_linear(small_shock_tube, gas14):
    a = weak_residual(small_shock_tube, PHI, gas14)
    b = weak_residual(small_shock_tube, PHI.scaled(2.0), gas14)
    assert all(2 * x == y for x, y in zip(a, b))
    left = TestFunction(-0.4, 0.05, 0.3, 0.04)
    right = TestFunction(0.3, 0.05, 0.3, 0.04)
    ra, rb = weak_residual(small_shock_tube, left, gas14), weak_residual(small_shock_tube, right, gas14)

    def both(x, t, name):
        return getattr(left, name)(x, t) + getattr(right, name)(x, t)

    class Sum:
        x_support = (-0.7, 0.6)
        t_support = left.t_support
        r_t = left.r_t
        nonnegative = True

        def phi(self, x, t):
            return both(x, t, "phi")

        def phi_x(self, x, t):
            return both(x, t, "phi_x")

        def phi_t(self, x, t):
            return both(x, t, "phi_t")

    rs = weak_residual(small_shock_tube, Sum(), gas14)
    assert np.allclose(rs, np.add(ra, rb), rtol=1e-12, atol=1e-15)


def test_mass_pair_matches_mass_residual(small_shock_tube, gas14):
    r = weak_residual(small_shock_tube, PHI, gas14)
    assert entropy_inequality_residual(small_shock_tube, mass_pair(), PHI) == r.r_mass


def test_constant_entropy_couples_entropy_to_mass(gas14):
    grid = Grid1D(-1.0, 1.0, 400)
    cfg = SolverConfig(gas14, ApproxParams(0.01, 0.05), grid, t_end=0.1, snapshot_every=5)
    traj = run(cfg, riemann_data((1.0, 0.0, 0.3), (0.4, 0.0, 0.3)))
    r = weak_residual(traj, PHI, gas14)
    assert abs(r.r_entropy - 0.3 * r.r_mass) <= 1e-12 * max(abs(r.r_mass), 1e-300) + 1e-16


def test_physical_entropy_inequality(small_shock_tube, gas14):
    rep = check_entropy_inequality(small_shock_tube, physical_pair(gas14), PHI, gas14)
    assert rep.passed
    assert rep.threshold == pytest.approx(
        -1e-3 * entropy_inequality_scale(small_shock_tube, physical_pair(gas14), PHI))


def test_entropy_inequality_rejections(small_shock_tube, gas14):
    with pytest.raises(ValueError, match="not convex"):
        check_entropy_inequality(small_shock_tube, mass_pair(), PHI, gas14)
    with pytest.raises(ValueError, match="phi >= 0"):
        check_entropy_inequality(small_shock_tube, physical_pair(gas14), PHI.scaled(-1.0), gas14)


def test_equivalence_residual_constant(gas14):
    grid = Grid1D(-1.0, 1.0, 200)
    cfg = SolverConfig(gas14, ApproxParams(0.02, 0.05), grid, t_end=0.01)
    traj = run(cfg, constant_data(1.0, 0.3, 0.1))
    assert equivalence_residual(traj, cfg.approx, gas14) <= 1e-11
    sparse = run(SolverConfig(gas14, ApproxParams(0.02, 0.05), grid, t_end=0.01,
                              snapshot_every=2), constant_data(1.0, 0.3, 0.1))
    with pytest.raises(ValueError, match="snapshot_every"):
        equivalence_residual(sparse, cfg.approx, gas14)


@pytest.mark.parametrize("gamma", [1.4, 2.0, 3.0])
def test_sub_identities_exact(gamma, rng):
    rho, u, s = random_jets(rng, 500)
    res = sub_identity_residuals(rho, u, s, 0.07, derive_params(gamma))
    assert set(res) == {"pressure_shift", "entropy_transport", "cubic_shift"}
    assert max(res.values()) <= 1e-12


@pytest.mark.parametrize("gamma", [1.4, 5 / 3, 3.0])
def test_energy_identity_on_random_jets(gamma, rng):
    rho, u, s = random_jets(rng, 500)
    defect = energy_identity_defect(rho, u, s, ApproxParams(0.01, 0.05), derive_params(gamma))
    assert defect.max() <= 1e-10


def test_energy_identity_detects_wrong_source(rng, monkeypatch):
    import viscogas.verifier as verifier

    rho, u, s = random_jets(rng, 200)
    p = derive_params(1.4)
    approx = ApproxParams(0.01, 0.05)
    original = verifier.dissipation_D
    monkeypatch.setattr(verifier, "dissipation_D", lambda *a: 1.01 * original(*a))
    assert energy_identity_defect(rho, u, s, approx, p).max() > 1e-5


def test_jet_against_sympy():
    x, t = sp.symbols("x t")
    rho_e = 1 + sp.Rational(3, 10) * sp.sin(x + 2 * t)
    u_e = sp.Rational(1, 5) * sp.cos(3 * x - t)
    expr = rho_e ** sp.Rational(7, 5) * sp.exp(2 * u_e) / (rho_e + u_e) - rho_e * u_e
    xs = np.linspace(-1, 1, 7)
    t0 = 0.3

    def jet(e):
        fs = [sp.lambdify(x, d.subs(t, t0), "numpy")
              for d in (e, sp.diff(e, x), sp.diff(e, t), sp.diff(e, x, 2))]
        return Jet(*(np.broadcast_to(f(xs), xs.shape).astype(float) for f in fs))

    rho, u = jet(rho_e), jet(u_e)
    got = rho**1.4 * (u * 2.0).exp() / (rho + u) - rho * u
    want = jet(expr)
    for name in ("v", "x", "t", "xx"):
        assert np.allclose(getattr(got, name), getattr(want, name), rtol=1e-12, atol=1e-13)


def test_jet_arithmetic_with_scalars():
    a = Jet(np.array([2.0]), np.array([1.0]), np.array([0.5]), np.array([0.0]))
    b = 3.0 - a
    assert b.v[0] == 1.0 and b.x[0] == -1.0
    c = 1.0 / a.v * a  # scalar array times jet
    assert np.allclose(c.v, 1.0)
    r = a.reciprocal()
    assert r.x[0] == pytest.approx(-0.25) and r.xx[0] == pytest.approx(0.25)


def test_ladder_validation():
    grids = tuple(Grid1D(0.0, 1.0, 100 * 4**j) for j in range(3))
    with pytest.raises(ValueError, match="three levels"):
        RefinementLadder((0.1, 0.05), (0.01, 0.0025), grids[:2], t_end=0.1)
    with pytest.raises(ValueError, match="decrease"):
        RefinementLadder((0.1, 0.05, 0.025), (0.01, 0.005, 0.0025), grids, t_end=0.1)
    with pytest.raises(ValueError, match="nested"):
        bad = (grids[0], Grid1D(0.0, 1.0, 150), grids[2])
        RefinementLadder((0.1, 0.05, 0.025), (0.01, 0.0025, 0.000625), bad, t_end=0.1)
    with pytest.raises(ValueError, match="resolve"):
        coarse = tuple(Grid1D(0.0, 1.0, 20 * 4**j) for j in range(3))
        RefinementLadder((0.1, 0.05, 0.025), (0.01, 0.0025, 0.000625), coarse, t_end=0.1)
    with pytest.raises(ValueError):
        RefinementLadder.halving(0.1, 3, 100, 0.0, 1.0, 0.1, power=1.5)
    lad = RefinementLadder.halving(0.1, 3, 400, 0.0, 1.0, 0.1, snapshot_every=(1, 4, 16))
    assert lad.epsilons == pytest.approx((0.01, 0.0025, 0.000625))
    assert [g.n_cells for g in lad.grids] == [400, 1600, 6400]
    assert lad.config(2, derive_params(1.4)).snapshot_every == 16


def test_restrict():
    v = np.arange(12.0)
    assert np.array_equal(restrict(v, 4), [1.5, 5.5, 9.5])


def test_convergence_on_constant_data(tmp_path):
    p = derive_params(1.4)
    lad = RefinementLadder.halving(0.1, 3, 400, 0.0, 1.0, 0.01, boundary="periodic",
                                   snapshot_every=10**6)
    rows = convergence_study(lad, constant_data(0.8, 0.2, -0.1), p)
    # only the 2 delta lift of the density differs between levels
    for r in rows:
        assert r.err_rho == pytest.approx(2 * (r.delta - lad.deltas[-1]), abs=1e-14)
        assert r.err_u <= 1e-14 and r.err_s <= 1e-14
    path = tmp_path / "conv.csv"
    write_convergence_csv(rows, path)
    with path.open() as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["level", "delta", "epsilon", "dx", "err_rho", "err_u", "err_s", "order"]
    assert len(table) == 4
    assert float(table[2][1]) == 0.05


def test_convergence_on_smooth_data_decreases():
    p = derive_params(1.4)
    lad = RefinementLadder.halving(0.1, 3, 200, 0.0, 1.0, 0.05, boundary="periodic",
                                   snapshot_every=10**6)
    data = sine_data(rho=(1.0, 0.2), u=(0.0, 0.1), s=(0.1, 0.1), length=1.0)
    rows = convergence_study(lad, data, p, max_workers=2)
    assert rows[0].err_rho > rows[1].err_rho > 0
    assert rows[-1].err_rho == 0.0
    assert rows[1].order is not None and rows[1].order > 0
