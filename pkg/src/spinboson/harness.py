"""Run orchestration: single curves, convergence studies, cross-solver
comparisons, variance profiles and bath dumps, all written as CSV."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from . import __version__
from .bath import build_modes, bound_Cb, tabulate, write_table_csv, DEFAULT_TABLE_STEP
from .config import RunSpec, to_text
from .contour import antidiagonal_observables
from .dyson import bare_observable, variance_profile
from .inchworm import SolveSpec, observable_curve, solve_table
from .system import expectation

__all__ = [
    "compare_to_reference",
    "convergence_orders",
    "header_lines",
    "read_reference",
    "run_compare",
    "run_convergence",
    "run_single",
    "run_variance",
    "dump_bath",
    "write_csv",
]


def header_lines(run: RunSpec, **extra) -> list[str]:
    """Self-describing header: version, seed, ``C_b`` and the full parameter echo."""
    c_b = bound_Cb(build_modes(run.bath), run.bath.beta)
    lines = [f"spinboson {__version__}", f"seed = {run.seed}", f"C_b = {c_b!r}"]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    lines += to_text(run).splitlines()
    return lines


def write_csv(path, header: list[str], columns: list[str], rows) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def _out(run: RunSpec, default: str) -> Path:
    return Path(run.output or default)


def run_single(run: RunSpec):
    """Inchworm curve ``<O(tau)>`` on ``tau = 0, dt, ..., t_final``.

    Returns ``(path, rows)`` with rows ``(tau, re, im, std_error)``.
    """
    taus, mean, se, tables = observable_curve(run)
    rows = [(float(t), float(v.real), float(v.imag), float(e)) for t, v, e in zip(taus, mean, se)]
    s = run.solver
    header = header_lines(run, solver_mode=s.mode, M=s.M, samples_per_order=s.samples_per_order,
                          replicas=s.replicas, max_norm=max(t.max_norm() for t in tables))
    path = write_csv(_out(run, "single.csv"), header, ["tau", "re", "im", "std_error"], rows)
    return path, rows


def convergence_orders(errors: np.ndarray, h_list) -> np.ndarray:
    """Observed orders ``log(e_a / e_b) / log(h_a / h_b)`` between consecutive
    step sizes; ``errors`` has one row per step size."""
    h = np.asarray(h_list, dtype=float)
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(h[:-1] / h[1:])[:, None]


def _probe_values(run: RunSpec, h: float, t_solve: float, probes) -> tuple[np.ndarray, float]:
    solver = SolveSpec(M=1, mode="deterministic", integrator=run.solver.integrator, dt=h)
    tab = solve_table(run.system, run.bath, solver, t_solve, literal=run.bath_literal)
    obs = dict((round(tau / h), v) for tau, v in antidiagonal_observables(tab, run.system.rho_s))
    out = []
    for p in probes:
        k = round(p / h)
        if abs(k * h - p) > 1e-9:
            raise ValueError(f"step {h} does not divide probe time {p}")
        out.append(obs[k])
    return np.array(out), tab.max_norm()


def run_convergence(run: RunSpec):
    """Errors at the probe times against a fine-step reference, and orders.

    One deterministic first-order solve per step size up to the largest probe
    time; every probe is read off its anti-diagonal. Returns
    ``(path, errors, orders, max_norm)`` where ``max_norm`` covers every
    solved table.
    """
    if run.solver.M != 1 or run.solver.mode != "deterministic":
        raise ValueError("convergence studies need solver.M = 1 in deterministic mode")
    probes = tuple(run.probe_times)
    t_solve = max(probes)
    ref, norm = _probe_values(run, run.reference_h, t_solve, probes)
    errors = []
    for h in run.h_list:
        vals, n = _probe_values(run, h, t_solve, probes)
        errors.append(np.abs(vals - ref))
        norm = max(norm, n)
    errors = np.array(errors)
    orders = convergence_orders(errors, run.h_list)
    columns = ["h"]
    for p in probes:
        columns += [f"error_t{p:g}", f"order_t{p:g}"]
    rows = []
    for i, h in enumerate(run.h_list):
        row = [h]
        for c in range(len(probes)):
            row += [errors[i, c], orders[i - 1, c] if i > 0 else ""]
        rows.append(row)
    header = header_lines(run, reference_h=run.reference_h, max_norm=norm)
    path = write_csv(_out(run, "convergence.csv"), header, columns, rows)
    return path, errors, orders, norm


def read_reference(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column ``(tau, value)`` CSV; ``#`` lines and a text header row are skipped."""
    taus, vals = [], []
    with Path(path).open(encoding="utf-8") as fh:
        for row in csv.reader(line for line in fh if not line.lstrip().startswith("#")):
            if not row:
                continue
            try:
                taus.append(float(row[0]))
                vals.append(float(row[1]))
            except ValueError:
                if taus:
                    raise
    if len(taus) < 2:
        raise ValueError(f"reference file {path} holds fewer than two data rows")
    order = np.argsort(taus)
    return np.asarray(taus)[order], np.asarray(vals)[order]


def compare_to_reference(taus, values, ref_taus, ref_values) -> tuple[float, float]:
    """Max and mean absolute deviation of ``values`` from the reference curve,
    interpolated onto ``taus`` within the reference range."""
    taus = np.asarray(taus)
    inside = (taus >= ref_taus[0]) & (taus <= ref_taus[-1])
    if not inside.any():
        raise ValueError("reference data does not overlap the computed times")
    dev = np.abs(np.asarray(values)[inside].real - np.interp(taus[inside], ref_taus, ref_values))
    return float(dev.max()), float(dev.mean())


def run_compare(run: RunSpec):
    """Aligned columns for bare series (each order in ``compare.bare_orders``),
    the deterministic first-order inchworm curve and the Monte Carlo
    inchworm curve. Returns ``(path, taus, table, max_norm)`` where ``table``
    maps a column label to ``(mean array, std_error array)`` and ``max_norm``
    covers every solved inchworm table.
    """
    s = run.solver
    det = run.replace(solver=SolveSpec(M=1, mode="deterministic", integrator=s.integrator, dt=s.dt))
    taus, m1, m1_se, det_tables = observable_curve(det)
    mc_solver = SolveSpec(M=max(s.M, 3), mode="monte-carlo", samples_per_order=s.samples_per_order,
                          integrator=s.integrator, dt=s.dt, replicas=s.replicas)
    _, mc, mc_se, mc_tables = observable_curve(run.replace(solver=mc_solver))
    norm = max(t.max_norm() for t in det_tables + mc_tables)
    table = {"inch_M1": (m1, m1_se), f"inch_M{mc_solver.M}": (mc, mc_se)}

    orders = sorted(run.bare_orders)
    corr = tabulate(build_modes(run.bath), run.bath.beta, 2 * run.t_final,
                    run.table_step or DEFAULT_TABLE_STEP)
    top = max(orders) if orders else 0
    bare = {M: (np.zeros(len(taus), complex), np.zeros(len(taus))) for M in orders}
    for i, tau in enumerate(taus):
        rng = np.random.default_rng([run.seed, 1, i])
        if tau == 0:
            for M in orders:
                bare[M][0][i] = expectation(run.system.rho_s, run.system.observable)
            continue
        est = bare_observable(run.system, corr, float(tau), top, run.bare_samples, rng, run.bath_literal)
        for M in orders:
            parts = [est.per_order[m] for m in range(0, M + 1, 2)]
            bare[M][0][i] = sum(p[0] for p in parts)
            bare[M][1][i] = math.sqrt(sum(p[1] ** 2 for p in parts))
    for M in orders:
        table[f"bare_M{M}"] = bare[M]

    extra = {"bare_samples": run.bare_samples, "mc_M": mc_solver.M, "replicas": s.replicas,
             "samples_per_order": s.samples_per_order, "max_norm": norm}
    if run.reference:
        ref_t, ref_v = read_reference(run.reference)
        for label, (mean, _) in table.items():
            mx, mn = compare_to_reference(taus, mean, ref_t, ref_v)
            extra[f"reference_{label}"] = f"max_abs_dev={mx!r} mean_abs_dev={mn!r}"
    columns = ["tau"]
    for label in table:
        columns += [f"{label}_re", f"{label}_im", f"{label}_std_error"]
    rows = []
    for i, tau in enumerate(taus):
        row = [float(tau)]
        for mean, se in table.values():
            row += [float(mean[i].real), float(mean[i].imag), float(se[i])]
        rows.append(row)
    path = write_csv(_out(run, "compare.csv"), header_lines(run, **extra), columns, rows)
    return path, taus, table, norm


def run_variance(run: RunSpec):
    """Bare-estimator variance against contour length with the analytic envelope."""
    corr = tabulate(build_modes(run.bath), run.bath.beta, max(run.variance_lengths),
                    run.table_step or DEFAULT_TABLE_STEP)
    rng = np.random.default_rng([run.seed, 2])
    rows = variance_profile(run.system, corr, run.variance_lengths, run.variance_M, run.variance_samples,
                            rng, run.bath_literal)
    header = header_lines(run, variance_M=run.variance_M, variance_samples=run.variance_samples)
    path = write_csv(_out(run, "variance.csv"), header, ["length", "variance", "variance_std_error", "envelope"], rows)
    return path, rows


def dump_bath(run: RunSpec):
    """Tabulated correlation function on ``[-2 t_final, 2 t_final]``."""
    corr = tabulate(build_modes(run.bath), run.bath.beta, 2 * run.t_final, run.table_step or DEFAULT_TABLE_STEP)
    path = _out(run, "bath.csv")
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    write_table_csv(corr, path, header_lines(run))
    return path, corr
