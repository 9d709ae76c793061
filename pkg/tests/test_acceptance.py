"""Acceptance gate. Each test checks one criterion at its stated tolerance and
records a PASS/FAIL line that appears in the pytest terminal summary."""
import itertools
import math

import networkx as nx
import numpy as np
import pytest

from spinboson.bath import BathSpec, bound_Cb, build_modes
from spinboson.combinatorics import count_connected, double_factorial, enumerate_pairings
from spinboson.config import RunSpec, parse
from spinboson.inchworm import SolveSpec, connected_sum, correlation_for, observable_curve, solve_table
from spinboson.harness import run_compare, run_convergence, run_single, run_variance
from spinboson.system import SystemSpec

from oracles import connected_oracle

pytestmark = pytest.mark.acceptance

# largest entry norm of every table solved by the baseline acceptance runs
NORMS: dict[str, float] = {}


def read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    return body[0].split(","), [[float(x) for x in ln.split(",")] for ln in body[1:]]


def test_c1_convergence_order(tmp_path, record):
    run = RunSpec(output=str(tmp_path / "convergence.csv"))
    _, errors, orders, norm = run_convergence(run)
    NORMS["convergence (eps = 0, every step size)"] = norm
    decreasing = bool(np.all(np.diff(errors, axis=0) < 0))
    ok = bool(np.all((orders >= 1.8) & (orders <= 2.2))) and decreasing
    record("1 convergence order", ok,
           f"orders in [{orders.min():.4f}, {orders.max():.4f}], errors strictly decreasing: {decreasing}; "
           f"h=1/20, t=1: error {errors[1, 1]:.3e}, order {orders[0, 1]:.4f}")
    assert ok, orders


def test_c2_decoupled_oracle(tmp_path, record):
    def max_error(integrator, dt):
        run = parse(f"bath.xi = 0\nsystem.epsilon = 0\nrun.t_final = 2\nsolver.dt = {dt}\n"
                    f"solver.integrator = {integrator}\noutput.path = {tmp_path / 'single.csv'}\n")
        _, rows = run_single(run)
        return max(abs(complex(re, im) - math.cos(2 * tau)) for tau, re, im, _ in rows)

    exp_err = max_error("exponential-heun", 0.1)
    heun = [max_error("heun", dt) for dt in (0.1, 0.05)]
    ratio = heun[0] / heun[1]
    ok = exp_err <= 1e-10 and heun[0] <= 1e-2 and 3.5 <= ratio <= 4.5
    record("2 decoupled oracle", ok,
           f"exponential {exp_err:.2e} (<= 1e-10); Heun {heun[0]:.3e} (<= 1e-2), halving ratio {ratio:.3f}")
    assert ok


def _matchings(points):
    if not points:
        yield ()
        return
    first, rest = points[0], points[1:]
    for i, other in enumerate(rest):
        for tail in _matchings(rest[:i] + rest[i + 1:]):
            yield ((first, other),) + tail


def _connected(matching):
    g = nx.Graph()
    g.add_nodes_from(matching)
    for (a, b), (c, d) in itertools.combinations(matching, 2):
        if a < c < b < d or c < a < d < b:
            g.add_edge((a, b), (c, d))
    return nx.is_connected(g)


def test_c3_combinatorics(record):
    pairings = {m: len(enumerate_pairings(m)) for m in range(2, 11, 2)}
    counts_ok = all(n == double_factorial(m - 1) for m, n in pairings.items())
    brute = {m: sum(_connected(q) for q in _matchings(tuple(range(m + 1)))) for m in (1, 3, 5, 7, 9)}
    connected = {m: count_connected(m) for m in brute}
    ok = counts_ok and connected == brute == {1: 1, 3: 1, 5: 4, 7: 27, 9: 248}
    record("3 combinatorics", ok, f"pairings {pairings}; connected {connected}")
    assert ok


def test_c4_connected_sum_oracle(record):
    system, bath = SystemSpec(epsilon=1.0), BathSpec(xi=0.2)
    table = solve_table(system, bath, SolveSpec(dt=0.1), 1.0)
    NORMS["frozen table for the quadrature oracle"] = table.max_norm()
    corr = correlation_for(bath, 1.0, SolveSpec(mode="monte-carlo"))
    spec = SolveSpec(mode="monte-carlo", M=3, samples_per_order=100_000)
    modes = build_modes(bath)
    rng = np.random.default_rng(2024)
    windows = set()
    while len(windows) < 5:
        kp = int(rng.integers(0, table.P - 3))
        windows.add((int(rng.integers(kp + 2, table.P)), kp))
    worst, details = 0.0, []
    for w, (hp, kp) in enumerate(sorted(windows)):
        fine = connected_oracle(table, hp, kp, modes, bath.beta, order=6)
        oracle_err = np.abs(fine - connected_oracle(table, hp, kp, modes, bath.beta, order=5))
        mc, se = connected_sum(table, hp, kp, corr, spec, rng=np.random.default_rng([7, w]), entrywise=True)
        z = np.abs(mc - fine) / np.hypot(se, oracle_err)
        worst = max(worst, float(z.max()))
        details.append(f"({table.index(kp).label(table.N)}->{table.index(hp).label(table.N)}) z={z.max():.2f}")
    ok = worst <= 3.0
    record("4 connected-sum oracle", ok, f"max {worst:.2f} combined sigma; " + ", ".join(details))
    assert ok


def test_c5_cross_solver(tmp_path, record):
    run = parse("system.epsilon = 1\nbath.xi = 0.2\nrun.t_final = 1\nsolver.dt = 0.05\n"
                "solver.M = 3\nsolver.mode = monte-carlo\nsolver.integrator = exponential-heun\n"
                "solver.samples_per_order = 10000\nsolver.replicas = 8\n"
                f"compare.bare_samples = 100000\noutput.path = {tmp_path / 'compare.csv'}\n")
    _, taus, table, norm = run_compare(run)
    NORMS["cross-solver (eps = 1, M = 1 and M = 3)"] = norm
    bare, bare_se = table["bare_M4"]
    inch, inch_se = table["inch_M3"]
    # tau = 0 is exact in both columns and carries no error bar
    keep = (taus > 0) & (taus <= 1.0 + 1e-12)
    z = np.abs(bare - inch)[keep] / np.hypot(bare_se, inch_se)[keep]
    ok = bool(np.all(z <= 3.0))
    record("5 cross-solver", ok, f"bare M=4 vs inchworm M=3 on tau <= 1: max {z.max():.2f} combined sigma")
    assert ok


def test_c5b_first_vs_third_order(record):
    text = "system.epsilon = 1\nbath.xi = 0.1\nrun.t_final = 5\nsolver.dt = 0.1\n"
    _, m1, _, t1 = observable_curve(parse(text))
    mc = text + "solver.M = 3\nsolver.mode = monte-carlo\nsolver.samples_per_order = 2000\n"
    _, m3, _, t3 = observable_curve(parse(mc))
    NORMS["xi = 0.1 first and third order"] = max(t.max_norm() for t in t1 + t3)
    dev = float(np.abs(m1.real - m3.real).max())
    ok = dev <= 0.1
    record("5b M=1 vs M=3 at xi=0.1", ok, f"max deviation {dev:.4f} (<= 0.1) on [0, 5]")
    assert ok


def test_c6_norm_bound(record):
    if not NORMS:
        NORMS["baseline eps = 0"] = solve_table(SystemSpec(), BathSpec(), SolveSpec(), 5.0).max_norm()
    worst = max(NORMS.values())
    ok = worst <= 1.05
    record("6 norm bound", ok, f"max entry norm {worst:.6f} over {len(NORMS)} runs (<= 1.05)")
    assert ok, NORMS


def test_c7_variance_envelope(tmp_path, record):
    run = RunSpec(output=str(tmp_path / "variance.csv"))
    path, _ = run_variance(run)
    columns, rows = read_csv(path)
    assert columns == ["length", "variance", "variance_std_error", "envelope"]
    c_b = bound_Cb(build_modes(run.bath), run.bath.beta)
    envelope_exact = all(env == math.expm1(c_b**2 * length**2 / 2) for length, _, _, env in rows)
    steps = [(b[1] - a[1]) / math.hypot(a[2], b[2]) for a, b in zip(rows, rows[1:])]
    monotone = all(s >= -2.0 for s in steps)
    ok = envelope_exact and monotone and [r[0] for r in rows] == [1.0, 2.0, 3.0, 4.0]
    record("7 sign-problem envelope", ok,
           f"variances {[f'{r[1]:.4g}' for r in rows]}, steps in sigma {[f'{s:.1f}' for s in steps]}, "
           f"envelope exact: {envelope_exact}")
    assert ok
