"""Command-line harness: ``viscogas {run, verify-kernel, converge, identities} <config>``.

Configs are INI documents.  Every subcommand writes its CSV artifacts and a
``summary.txt`` into the configured output directory and exits 0 iff all of
its pass criteria hold.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .entropy_kernel import (
    EntropyGenerator,
    build_quadrature,
    random_states,
    richardson_orders,
    verify_entropy_pde,
)
from .model import ApproxParams, BoundsSpec, GasParams, derive_params, riemann_invariants
from .monitors import (
    MONITOR_IDS,
    check_invariant_region,
    check_lower_bound_trajectory,
    check_s_bounds,
    check_source_signs,
    check_uniform_bounds,
    estimate_mu,
    tv_s,
    write_monitors_csv,
)
from .solver import (
    Field,
    Grid1D,
    RawData,
    SolverConfig,
    constant_data,
    mollify_initial_data,
    riemann_data,
    run,
    sine_data,
    stable_dt,
    write_snapshots_csv,
)
from .verifier import (
    RefinementLadder,
    TestFunction,
    convergence_study,
    energy_identity_defect,
    equivalence_residual,
    field_jets,
    random_jets,
    sub_identity_residuals,
    weak_residual,
    write_convergence_csv,
)

logger = logging.getLogger("viscogas")

SUB_IDENTITY_TOL = 1e-12
ENERGY_DEFECT_TOL = 1e-10
KERNEL_TOL = 1e-4
KERNEL_MIN_ORDER = 1.9

SCHEMA: dict[str, dict[str, bool]] = {
    # section -> key -> required
    "gas": {"gamma": True},
    "approx": {"delta": True, "epsilon": False, "variant": False},
    "grid": {"x_min": True, "x_max": True, "n_cells": True, "boundary": False},
    "run": {"t_end": True, "cfl": False, "snapshot_every": False, "dt": False,
            "output_dir": False, "seed": False, "figures": False},
    "data": {"kind": False, "rho": False, "u": False, "s": False, "left": False,
             "right": False, "x0": False, "rho_wave": False, "u_wave": False,
             "s_wave": False, "wavenumber": False},
    "bounds": {"n_bound": False, "c0": False, "big_m": False, "c_shift": False},
    "monitors": {"ids": False},
    "test_functions": {},
    "kernel": {"generator": False, "coeffs": False, "rate": False, "h": False,
               "n_states": False, "n_quadrature": False, "gammas": False},
    "ladder": {"levels": False, "delta0": False, "n0": False, "power": False,
               "snapshot_every": False},
    "identities": {"n_samples": False, "equivalence_steps": False},
}
OPTIONAL_SECTIONS = {"data", "bounds", "monitors", "test_functions", "kernel", "ladder",
                     "identities"}
FIGURES = ("profile_rho", "profile_u", "profile_s", "tv_s", "min_rho")


class ConfigError(ValueError):
    def __init__(self, message: str, key_path: str = "", line: int | None = None):
        where = key_path + (f" (line {line})" if line else "")
        super().__init__(f"{where}: {message}" if where else message)
        self.key_path = key_path
        self.line = line


@dataclass
class KernelSpec:
    generator: EntropyGenerator
    h: float = 1e-3
    n_states: int = 100
    n_quadrature: int = 32
    gammas: tuple[float, ...] = ()


@dataclass
class LadderSpec:
    levels: int = 3
    delta0: float | None = None
    n0: int | None = None
    power: float = 2.0
    snapshot_every: tuple[int, ...] | None = None


@dataclass
class RunConfig:
    solver: SolverConfig
    data: RawData
    data_kind: str
    bounds: BoundsSpec | None
    monitors: list[str]
    test_functions: dict[str, TestFunction]
    output_dir: Path
    seed: int = 0
    figures: list[str] = field(default_factory=list)
    kernel: KernelSpec | None = None
    ladder: LadderSpec | None = None
    identity_samples: int = 1000
    equivalence_steps: int = 200

    @property
    def params(self) -> GasParams:
        return self.solver.params


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = ""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            lines[(section, "")] = no
        elif "=" in line and section:
            lines.setdefault((section, line.split("=", 1)[0].strip().lower()), no)
    return lines


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, lines):
        self.cp = cp
        self.lines = lines

    def line(self, section, key=""):
        return self.lines.get((section, key))

    def error(self, section, key, message):
        path = f"[{section}]" + (f".{key}" if key else "")
        return ConfigError(message, path, self.line(section, key))

    def has(self, section, key):
        return self.cp.has_option(section, key)

    def raw(self, section, key, default=None):
        if not self.has(section, key):
            return default
        return self.cp.get(section, key).strip()

    def float(self, section, key, default=None):
        value = self.raw(section, key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise self.error(section, key, f"expected a number, got {value!r}") from None

    def int(self, section, key, default=None):
        value = self.raw(section, key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise self.error(section, key, f"expected an integer, got {value!r}") from None

    def floats(self, section, key, default=None, count=None):
        value = self.raw(section, key)
        if value is None:
            return default
        try:
            out = tuple(float(v) for v in value.split(",") if v.strip())
        except ValueError:
            raise self.error(section, key, f"expected comma-separated numbers, got {value!r}") from None
        if count is not None and len(out) != count:
            raise self.error(section, key, f"expected {count} values, got {len(out)}")
        return out


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"syntax error: {exc.message if hasattr(exc, 'message') else exc}",
                          "", line) from None
    r = _Reader(cp, _key_lines(text))

    for section in cp.sections():
        if section not in SCHEMA:
            raise r.error(section, "", "unknown section")
        if section == "test_functions":
            continue
        for key in cp.options(section):
            if key not in SCHEMA[section]:
                raise r.error(section, key, "unknown key")
    for section, keys in SCHEMA.items():
        if section not in cp.sections():
            if section in OPTIONAL_SECTIONS:
                continue
            raise ConfigError("missing required section", f"[{section}]")
        for key, required in keys.items():
            if required and not cp.has_option(section, key):
                raise r.error(section, "", f"missing required key {key!r}")

    gamma = r.float("gas", "gamma")
    try:
        params = derive_params(gamma)
    except ValueError as exc:
        raise r.error("gas", "gamma", str(exc)) from None

    delta = r.float("approx", "delta")
    epsilon = r.float("approx", "epsilon", delta * delta if delta is not None else None)
    try:
        approx = ApproxParams(epsilon=epsilon, delta=delta)
    except ValueError as exc:
        raise r.error("approx", "delta", str(exc)) from None
    variant = r.raw("approx", "variant", "flux-viscosity")

    try:
        grid = Grid1D(r.float("grid", "x_min"), r.float("grid", "x_max"),
                      r.int("grid", "n_cells"), r.raw("grid", "boundary", "zero-gradient"))
    except ValueError as exc:
        raise r.error("grid", "", str(exc)) from None
    if grid.dx > 2 * approx.epsilon:
        raise r.error("grid", "n_cells",
                      f"dx={grid.dx:.3g} does not resolve epsilon={approx.epsilon:.3g} "
                      "(need dx <= 2 epsilon, preferably <= epsilon/2)")

    try:
        solver = SolverConfig(
            params=params, approx=approx, grid=grid, t_end=r.float("run", "t_end"),
            cfl=r.float("run", "cfl", 0.4), snapshot_every=r.int("run", "snapshot_every", 1),
            variant=variant, dt=r.float("run", "dt"))
    except ValueError as exc:
        raise r.error("run", "", str(exc)) from None

    data, kind = _parse_data(r)
    bounds = _parse_bounds(r)

    ids = [s.strip() for s in r.raw("monitors", "ids", ",".join(MONITOR_IDS)).split(",") if s.strip()]
    for mid in ids:
        if mid not in MONITOR_IDS:
            raise r.error("monitors", "ids", f"unknown monitor id {mid!r}; known: {', '.join(MONITOR_IDS)}")

    tests = {}
    if cp.has_section("test_functions"):
        for key in cp.options("test_functions"):
            vals = r.floats("test_functions", key, count=4)
            try:
                tests[key] = TestFunction(*vals)
            except ValueError as exc:
                raise r.error("test_functions", key, str(exc)) from None

    figures = [s.strip() for s in (r.raw("run", "figures", "") or "").split(",") if s.strip()]
    for fig in figures:
        if fig not in FIGURES:
            raise r.error("run", "figures", f"unknown figure {fig!r}; known: {', '.join(FIGURES)}")

    out = Path(r.raw("run", "output_dir", "viscogas-out"))
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out

    return RunConfig(
        solver=solver, data=data, data_kind=kind, bounds=bounds, monitors=ids,
        test_functions=tests, output_dir=out, seed=r.int("run", "seed", 0), figures=figures,
        kernel=_parse_kernel(r), ladder=_parse_ladder(r),
        identity_samples=r.int("identities", "n_samples", 1000),
        equivalence_steps=r.int("identities", "equivalence_steps", 200))


def _parse_data(r: _Reader) -> tuple[RawData, str]:
    kind = r.raw("data", "kind", "constant")
    if kind == "constant":
        return constant_data(r.float("data", "rho", 1.0), r.float("data", "u", 0.0),
                             r.float("data", "s", 0.0)), kind
    if kind == "riemann":
        for key in ("left", "right"):
            if not r.has("data", key):
                raise r.error("data", "", f"riemann data need {key!r} = rho, u, s")
        left = r.floats("data", "left", count=3)
        right = r.floats("data", "right", count=3)
        if left[0] < 0 or right[0] < 0:
            raise r.error("data", "left", "densities must be nonnegative")
        return riemann_data(left, right, r.float("data", "x0", 0.0)), kind
    if kind == "sine":
        # one period spans the domain; the grid is attached when the run starts
        return _SineSpec(
            rho=r.floats("data", "rho_wave", (1.0, 0.0), count=2),
            u=r.floats("data", "u_wave", (0.0, 0.0), count=2),
            s=r.floats("data", "s_wave", (0.0, 0.0), count=2),
            wavenumber=r.float("data", "wavenumber", 1.0)), kind
    raise r.error("data", "kind", f"unknown data kind {kind!r}; use constant, riemann or sine")


@dataclass(frozen=True)
class _SineSpec:
    rho: tuple
    u: tuple
    s: tuple
    wavenumber: float

    def on(self, grid: Grid1D) -> RawData:
        return sine_data(self.rho, self.u, self.s, self.wavenumber, grid.length, grid.x_min)


def _raw_for(cfg: RunConfig) -> RawData:
    if isinstance(cfg.data, _SineSpec):
        return cfg.data.on(cfg.solver.grid)
    return cfg.data


def _parse_bounds(r: _Reader) -> BoundsSpec | None:
    keys = ("n_bound", "c0", "big_m", "c_shift")
    given = [r.has("bounds", k) for k in keys]
    if not any(given):
        return None
    if not all(given):
        missing = [k for k, g in zip(keys, given) if not g]
        raise r.error("bounds", "", f"give all of n_bound, c0, big_m, c_shift (missing {missing})")
    vals = {k: r.float("bounds", k) for k in keys}
    if not vals["c0"] < 1:
        raise r.error("bounds", "c0", "the entropy variation bound requires c0 < 1")
    if vals["big_m"] > vals["c_shift"]:
        raise r.error("bounds", "big_m", "the invariant-region constants require M <= c")
    try:
        return BoundsSpec(**vals)
    except ValueError as exc:
        raise r.error("bounds", "", str(exc)) from None


def _parse_kernel(r: _Reader) -> KernelSpec | None:
    if not r.cp.has_section("kernel"):
        return None
    name = r.raw("kernel", "generator", "quadratic")
    if name == "constant":
        gen = EntropyGenerator.constant()
    elif name == "linear":
        gen = EntropyGenerator.linear()
    elif name == "quadratic":
        gen = EntropyGenerator.quadratic()
    elif name == "exponential":
        gen = EntropyGenerator.exponential(r.float("kernel", "rate", 0.5))
    elif name == "polynomial":
        coeffs = r.floats("kernel", "coeffs")
        if not coeffs:
            raise r.error("kernel", "coeffs", "polynomial generator needs coeffs")
        gen = EntropyGenerator.polynomial(coeffs)
    else:
        raise r.error("kernel", "generator", f"unknown generator {name!r}")
    n_q = r.int("kernel", "n_quadrature", 32)
    if n_q < 2:
        raise r.error("kernel", "n_quadrature", "need at least 2 nodes")
    return KernelSpec(gen, r.float("kernel", "h", 1e-3), r.int("kernel", "n_states", 100), n_q,
                      r.floats("kernel", "gammas", ()))


def _parse_ladder(r: _Reader) -> LadderSpec | None:
    if not r.cp.has_section("ladder"):
        return None
    every = r.raw("ladder", "snapshot_every")
    spec = LadderSpec(
        levels=r.int("ladder", "levels", 3), delta0=r.float("ladder", "delta0"),
        n0=r.int("ladder", "n0"), power=r.float("ladder", "power", 2.0),
        snapshot_every=None if every is None else tuple(
            int(v) for v in r.floats("ladder", "snapshot_every")))
    if spec.levels < 3:
        raise r.error("ladder", "levels", "a ladder needs at least three levels")
    if spec.snapshot_every is not None and len(spec.snapshot_every) != spec.levels:
        raise r.error("ladder", "snapshot_every", "give one stride per level")
    return spec


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


def default_bounds(initial: Field, p: GasParams) -> BoundsSpec:
    """``N = max|s0|``, ``c0 = TV(s0)`` (floored at 1e-6), ``M = 1.5 max(w0, z0, 1)``, ``c = M``."""
    z, w = riemann_invariants(initial.primitive(), p)
    big_m = 1.5 * max(float(np.max(w)), float(np.max(z)), 1.0)
    tv = tv_s(initial)
    if tv >= 1:
        raise ConfigError(f"TV(s0)={tv:.4g} violates the requirement c0 < 1", "[data]")
    return BoundsSpec(float(np.max(np.abs(initial.s))), max(tv, 1e-6), big_m, big_m)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("VISCOGAS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class Outcome:
    failures: list[str] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)

    def check(self, name: str, ok: bool, detail: str):
        self.lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            self.failures.append(f"{name}: {detail}")

    def info(self, text: str):
        self.lines.append(text)


def _write_summary(cfg: RunConfig, command: str, outcome: Outcome) -> None:
    header = [
        f"viscogas {__version__} {command}",
        f"seed = {cfg.seed}",
        f"gamma = {cfg.params.gamma!r}, delta = {cfg.solver.approx.delta!r}, "
        f"epsilon = {cfg.solver.approx.epsilon!r}, variant = {cfg.solver.variant}",
        f"grid = [{cfg.solver.grid.x_min!r}, {cfg.solver.grid.x_max!r}] x "
        f"{cfg.solver.grid.n_cells} ({cfg.solver.grid.boundary})",
        f"status = {'pass' if not outcome.failures else 'fail'}",
        "",
    ]
    (cfg.output_dir / "summary.txt").write_text("\n".join(header + outcome.lines) + "\n",
                                                encoding="utf-8")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def _write_figures(cfg: RunConfig, traj) -> None:
    x = cfg.solver.grid.x
    final = traj.final
    series = {
        "profile_rho": (("x", "rho"), zip(x, final.rho)),
        "profile_u": (("x", "u"), zip(x, final.u)),
        "profile_s": (("x", "s"), zip(x, final.s)),
        "tv_s": (("t", "tv_s"), ((f.t, tv_s(f)) for f in traj.snapshots)),
        "min_rho": (("t", "min_rho"), ((f.t, float(np.min(f.rho))) for f in traj.snapshots)),
    }
    for name in cfg.figures:
        header, rows = series[name]
        _write_rows(cfg.output_dir / f"fig_{name}.csv", header,
                    ([float(a), float(b)] for a, b in rows))


def cmd_run(cfg: RunConfig) -> int:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    p = cfg.params
    raw = _raw_for(cfg)
    initial = mollify_initial_data(raw, cfg.solver.approx, cfg.solver.grid)
    bounds = cfg.bounds or default_bounds(initial, p)
    traj = run(cfg.solver, initial)
    outcome = Outcome()
    outcome.info(f"steps = {traj.n_steps}, snapshots = {len(traj)}")
    outcome.info(f"bounds: N = {bounds.n_bound!r}, c0 = {bounds.c0!r}, M = {bounds.big_m!r}, "
                 f"c = {bounds.c_shift!r}")

    reports = []
    delta = cfg.solver.approx.delta
    runners = {
        "lower-bound": lambda: check_lower_bound_trajectory(traj, delta),
        "s-bounds": lambda: check_s_bounds(traj, bounds),
        "invariant-region": lambda: check_invariant_region(traj, bounds, p),
        "source-signs": lambda: check_source_signs(traj, bounds, delta, p),
        "uniform-bounds": lambda: check_uniform_bounds(traj, bounds, cfg.solver.approx, p),
    }
    for mid in cfg.monitors:
        if mid == "lower-bound" and cfg.solver.variant != "flux-viscosity":
            outcome.info("lower-bound skipped: only meaningful for the flux-viscosity variant")
            continue
        try:
            rep = runners[mid]()
        except ValueError as exc:
            outcome.check(mid, False, f"precondition: {exc}")
            continue
        reports.append(rep)
        outcome.check(rep.name, rep.passed,
                      f"worst={rep.worst_value:.6g} threshold={rep.threshold:.6g} "
                      f"at x_index={rep.x_index} snapshot={rep.snapshot_index}")
    write_monitors_csv(reports, cfg.output_dir / "monitors.csv")
    write_snapshots_csv(traj, cfg.output_dir / "snapshots.csv")

    rows = []
    for name, phi in sorted(cfg.test_functions.items()):
        try:
            r = weak_residual(traj, phi, p)
            rows += [(name, "r_mass", r.r_mass), (name, "r_momentum", r.r_momentum),
                     (name, "r_entropy", r.r_entropy)]
            mu = estimate_mu(traj, phi, cfg.solver.approx, p) if phi.t_support[0] >= 0 else None
        except ValueError as exc:
            outcome.check(f"test-function {name}", False, str(exc))
            continue
        if mu is not None:
            rows.append((name, "mu", mu))
            outcome.check(f"mu {name}", mu >= -1e-10, f"mu={mu:.6g}")
    if rows:
        _write_rows(cfg.output_dir / "residuals.csv", ("test_function", "quantity", "value"),
                    ([a, b, float(v)] for a, b, v in rows))
    _write_figures(cfg, traj)
    _write_summary(cfg, "run", outcome)
    return _finish(outcome)


def kernel_table(spec: KernelSpec, gammas, seed: int):
    """One row per gamma: residuals at h and h/2 and the Richardson orders."""
    rows = []
    for gamma in gammas:
        p = derive_params(gamma)
        rng = np.random.default_rng(seed)
        states = random_states(spec.n_states, rng)
        q = build_quadrature(p.lambda_kernel, spec.n_quadrature)
        coarse = verify_entropy_pde(spec.generator, states, spec.h, p, q=q)
        fine = verify_entropy_pde(spec.generator, states, spec.h / 2, p, q=q)
        orders = richardson_orders(coarse, fine)
        rows.append((gamma, coarse, fine, orders))
    return rows


def cmd_verify_kernel(cfg: RunConfig) -> int:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    spec = cfg.kernel or KernelSpec(EntropyGenerator.quadratic())
    gammas = spec.gammas or (cfg.params.gamma,)
    outcome = Outcome()
    out_rows = []
    for gamma, coarse, fine, orders in kernel_table(spec, gammas, cfg.seed):
        for name, value in coarse.as_dict().items():
            order = orders[name]
            ok = value <= KERNEL_TOL and (order is None or order >= KERNEL_MIN_ORDER)
            out_rows.append([float(gamma), spec.generator.kind, name, float(spec.h), float(value),
                             float(fine.as_dict()[name]), "" if order is None else float(order)])
            outcome.check(f"kernel gamma={gamma:g} {name}", ok,
                          f"residual={value:.3g} order={'roundoff' if order is None else f'{order:.3f}'}")
    _write_rows(cfg.output_dir / "residuals.csv",
                ("gamma", "generator", "residual", "h", "value", "value_half_h", "order"),
                out_rows)
    _write_summary(cfg, "verify-kernel", outcome)
    return _finish(outcome)


def build_ladder(cfg: RunConfig) -> RefinementLadder:
    spec = cfg.ladder or LadderSpec()
    grid = cfg.solver.grid
    delta0 = spec.delta0 if spec.delta0 is not None else cfg.solver.approx.delta
    factor = int(round(2**spec.power))
    n_fine = grid.n_cells
    n0 = spec.n0 if spec.n0 is not None else max(16, n_fine // factor ** (spec.levels - 1))
    kw = {"cfl": cfg.solver.cfl, "variant": cfg.solver.variant}
    if spec.snapshot_every is not None:
        kw["snapshot_every"] = spec.snapshot_every
    else:
        kw["snapshot_every"] = 10**9  # only initial and final states are needed
    return RefinementLadder.halving(delta0, spec.levels, n0, grid.x_min, grid.x_max,
                                    cfg.solver.t_end, grid.boundary, spec.power, **kw)


def cmd_converge(cfg: RunConfig) -> int:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    outcome = Outcome()
    try:
        ladder = build_ladder(cfg)
    except ValueError as exc:
        outcome.check("ladder", False, str(exc))
        _write_summary(cfg, "converge", outcome)
        return _finish(outcome)
    raw = _raw_for(cfg)
    rows = convergence_study(ladder, raw, cfg.params, max_workers=_threads())
    write_convergence_csv(rows, cfg.output_dir / "convergence.csv")
    errs = [r.err_rho for r in rows[:-1]]
    decreasing = all(b <= a for a, b in zip(errs, errs[1:]))
    for r in rows:
        outcome.info(f"level {r.level}: delta={r.delta:.4g} eps={r.epsilon:.4g} dx={r.dx:.4g} "
                     f"err_rho={r.err_rho:.4g} err_u={r.err_u:.4g} err_s={r.err_s:.4g}")
    outcome.check("convergence", decreasing, "err_rho nonincreasing along the ladder")
    _write_summary(cfg, "converge", outcome)
    return _finish(outcome)


def cmd_identities(cfg: RunConfig) -> int:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    p = cfg.params
    approx = cfg.solver.approx
    outcome = Outcome()
    rng = np.random.default_rng(cfg.seed)
    jets = random_jets(rng, cfg.identity_samples)
    rows = []
    subs = sub_identity_residuals(*jets, approx.delta, p)
    for name, value in subs.items():
        rows.append(["random-jets", name, value])
        outcome.check(f"sub-identity {name}", value <= SUB_IDENTITY_TOL, f"relative={value:.3g}")
    defect = float(np.max(energy_identity_defect(*jets, approx, p)))
    rows.append(["random-jets", "energy_identity_defect", defect])
    outcome.check("energy identity", defect <= ENERGY_DEFECT_TOL, f"relative={defect:.3g}")

    # a short run storing every step for the discrete equivalence residual
    grid = cfg.solver.grid
    initial = mollify_initial_data(_raw_for(cfg), approx, grid)
    probe = replace(cfg.solver, snapshot_every=1, t_end=1.0)
    dt = cfg.solver.dt or stable_dt(initial, probe)
    short = replace(probe, t_end=min(cfg.solver.t_end, cfg.equivalence_steps * dt), dt=dt)
    traj = run(short, initial)
    value = equivalence_residual(traj, approx, p)
    rows.append(["trajectory", "equivalence_residual", value])
    outcome.info(f"equivalence residual over {traj.n_steps} steps: {value:.6g}")
    defect_traj = max(float(np.max(energy_identity_defect(*field_jets(traj, n), approx, p)))
                      for n in range(len(traj) - 1))
    rows.append(["trajectory", "energy_identity_defect", defect_traj])
    outcome.check("energy identity on trajectory", defect_traj <= ENERGY_DEFECT_TOL,
                  f"relative={defect_traj:.3g}")
    _write_rows(cfg.output_dir / "residuals.csv", ("source", "quantity", "value"),
                ([a, b, float(v)] for a, b, v in rows))
    _write_summary(cfg, "identities", outcome)
    return _finish(outcome)


def _finish(outcome: Outcome) -> int:
    for line in outcome.lines:
        print(line)
    for failure in outcome.failures:
        print(f"FAIL {failure}", file=sys.stderr)
    return 0 if not outcome.failures else 1


COMMANDS = {
    "run": cmd_run,
    "verify-kernel": cmd_verify_kernel,
    "converge": cmd_converge,
    "identities": cmd_identities,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="viscogas", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"viscogas {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="INI configuration file")
        sp.add_argument("-o", "--output-dir", help="override [run] output_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.output_dir:
        cfg.output_dir = Path(args.output_dir)
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
