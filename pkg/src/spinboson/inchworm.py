"""Inchworm integro-differential solver for the full propagator ``G``.

Along each row of the grid ``G(., t_k)`` obeys

    dG/ds = sgn(s - t) * [1j H_s G + S(s, t_k)],

where ``S`` is the sum of connected diagrams built from already-known
propagators. Rows are advanced with Heun's method (or its exponential
variant); ``S`` is evaluated by the composite midpoint rule at first order or
by Monte Carlo over sorted simplex samples at higher orders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K
from .bath import BathSpec, CorrelationTable, DEFAULT_TABLE_STEP, build_modes, tabulate
from .combinatorics import (
    DEFAULT_MAX_ORDER,
    UnsupportedOrderError,
    connected_index_table,
    count_connected,
)
from .contour import PropagatorTable, SweepOrderError, antidiagonal_observables
from .system import IDENTITY, SIGMA_Z, SystemSpec, evolve, hamiltonian

__all__ = [
    "INTEGRATORS",
    "MODES",
    "SolveSpec",
    "connected_sum",
    "correlation_for",
    "exponential_heun_step",
    "heun_step",
    "observable_curve",
    "solve",
    "solve_table",
    "steps_for",
]

MODES = ("deterministic", "monte-carlo")
INTEGRATORS = ("heun", "exponential-heun")
COUPLING = SIGMA_Z


@dataclass(frozen=True)
class SolveSpec:
    """Solver settings.

    ``replicas`` independent Monte Carlo solves are averaged to give error
    bars on the output curve. ``diagrams=False`` zeroes the connected sum,
    leaving only the linear part; it exists to isolate the time stepper.
    """

    M: int = 1
    mode: str = "deterministic"
    samples_per_order: int = 10_000
    integrator: str = "heun"
    dt: float = 0.1
    replicas: int = 1
    max_order: int = DEFAULT_MAX_ORDER
    diagrams: bool = True

    def __post_init__(self):
        if self.M < 1 or self.M % 2 == 0:
            raise ValueError(f"M must be a positive odd integer, got {self.M}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.mode == "deterministic" and self.M != 1:
            raise UnsupportedOrderError("deterministic quadrature is only available for M = 1")
        if self.M > self.max_order:
            raise UnsupportedOrderError(f"M = {self.M} exceeds the cap {self.max_order}")
        if self.samples_per_order < 1 or self.replicas < 1:
            raise ValueError("samples_per_order and replicas must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def steps_for(t_final: float, dt: float) -> int:
    """Number of steps per branch, requiring ``t_final`` to be a multiple of ``dt``."""
    N = round(t_final / dt)
    if N < 1 or abs(N * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"t_final = {t_final} is not a positive multiple of dt = {dt}")
    return N


def correlation_for(bath: BathSpec, t: float, solver: SolveSpec, table_step: float | None = None) -> CorrelationTable:
    """Correlation table covering ``[-2t, 2t]``.

    Deterministic solves use step ``dt / 2`` so that every midpoint lookup
    lands on a node and no interpolation error enters.
    """
    if table_step is None:
        table_step = solver.dt / 2 if solver.mode == "deterministic" else DEFAULT_TABLE_STEP
    return tabulate(build_modes(bath), bath.beta, 2 * t, table_step)


def _tuple(a):
    a = np.asarray(a, dtype=complex)
    return (a[0, 0], a[0, 1], a[1, 0], a[1, 1])


def _matrix(tup):
    return np.array(tup, dtype=complex).reshape(2, 2)


def _pos(table: PropagatorTable, idx) -> int:
    return idx if isinstance(idx, (int, np.integer)) else table.pos(idx)


def connected_sum(table: PropagatorTable, head, base, corr: CorrelationTable, spec: SolveSpec,
                  rng: np.random.Generator | None = None, literal: bool = False,
                  seeder: Callable[[int], np.random.Generator] | None = None, entrywise: bool = False):
    """Truncated connected-diagram sum on the window from ``base`` to ``head``.

    ``head`` and ``base`` are grid indices (or storage positions). Returns
    ``(value, std_error)``; ``std_error`` is zero for the deterministic rule.
    It is the root of the summed entry variances, or a 2x2 array of per-entry
    errors when ``entrywise`` is set. In Monte Carlo mode each order draws
    from ``seeder(m)`` if given, else from ``rng``.
    """
    hp, kp = _pos(table, head), _pos(table, base)
    N, dt = table.N, table.dt
    if kp > hp:
        raise ValueError("the head must not precede the base")
    if corr.t_max < 2 * table.t * (1 - 1e-12):
        raise ValueError("correlation table does not cover [-2t, 2t]")
    zero = np.zeros((2, 2), dtype=complex)
    no_error = np.zeros((2, 2)) if entrywise else 0.0
    width = (table.node(hp) - table.node(kp)) * dt
    if not spec.diagrams or width < np.finfo(float).eps:
        return zero, no_error
    err = np.zeros(1, dtype=np.int64)
    W, O = _tuple(COUPLING), _tuple(table.observable)
    bvals, bn, bstep = corr.values, corr.n_max, corr.step
    if spec.mode == "deterministic":
        val = K.det_connected(table.G, table.filled, N, dt, hp, kp, W, O, bvals, bn, bstep, literal, err)
        if err[0]:
            raise SweepOrderError(f"connected sum at ({hp}, {kp}) read an uncomputed entry")
        return _matrix(val), no_error
    total = np.zeros(4, dtype=complex)
    var = np.zeros(4)
    n = spec.samples_per_order
    for m in range(1, spec.M + 1, 2):
        pairs = connected_index_table(m, spec.max_order)
        gen = seeder(m) if seeder is not None else rng
        if gen is None:
            raise ValueError("Monte Carlo mode needs a random generator")
        U = gen.random((n, m))
        choice = gen.integers(len(pairs), size=n)
        weight = count_connected(m) * width**m / math.factorial(m)
        mean, v = K.mc_connected(table.G, table.filled, N, dt, hp, kp, m, U, choice, pairs, weight,
                                 W, O, bvals, bn, bstep, literal, err)
        total += mean
        var += v / n
    if err[0]:
        raise SweepOrderError(f"connected sum at ({hp}, {kp}) read an uncomputed entry")
    if entrywise:
        return total.reshape(2, 2), np.sqrt(var).reshape(2, 2)
    return total.reshape(2, 2), float(np.sqrt(var.sum()))


def _sigma(table: PropagatorTable, jp: int) -> float:
    return -1.0 if jp <= table.N else 1.0


def _check_steppable(table: PropagatorTable, jp: int, kp: int) -> None:
    N = table.N
    if kp >= jp or jp == N + 1 or (kp == N and jp > N):
        raise ValueError(f"entry ({jp}, {kp}) is set by a special rule, not stepped")
    if not table.filled[jp - 1, kp]:
        raise SweepOrderError(f"predecessor of ({jp}, {kp}) has not been computed")


def heun_step(table: PropagatorTable, jp: int, kp: int, H, connected):
    """Two-stage Heun update of entry ``(jp, kp)`` (storage positions).

    ``connected(head_pos, base_pos, stage)`` returns ``(S, std_error)``. The
    predictor is written into the table before stage two so that the second
    connected sum interpolates through it. Returns ``(G_jk, std_error)``.
    """
    _check_steppable(table, jp, kp)
    sig, dt = _sigma(table, jp), table.dt
    iH = 1j * np.asarray(H)
    Gp = table.G[jp - 1, kp].copy()
    S1, e1 = connected(jp - 1, kp, 1)
    Gs = Gp + sig * dt * (iH @ Gp + S1)
    table.set_value(jp, kp, Gs)
    S2, e2 = connected(jp, kp, 2)
    G = 0.5 * (Gp + Gs) + 0.5 * sig * dt * (iH @ Gs + S2)
    return G, 0.5 * dt * math.hypot(e1, e2)


def exponential_heun_step(table: PropagatorTable, jp: int, kp: int, H, connected):
    """Heun update with the linear part ``sgn * 1j H`` integrated exactly.

    With ``E = exp(sgn * 1j * dt * H)`` the stages are
    ``G* = E G_prev + sgn dt S1`` and
    ``G = E G_prev + sgn dt / 2 * (E S1 + S2)``.
    """
    _check_steppable(table, jp, kp)
    sig, dt = _sigma(table, jp), table.dt
    E = evolve(np.asarray(H), -sig * dt)
    Gp = table.G[jp - 1, kp].copy()
    S1, e1 = connected(jp - 1, kp, 1)
    Gs = E @ Gp + sig * dt * S1
    table.set_value(jp, kp, Gs)
    S2, e2 = connected(jp, kp, 2)
    G = E @ Gp + 0.5 * sig * dt * (E @ S1 + S2)
    return G, 0.5 * dt * math.hypot(e1, e2)


def _sweep_python(table: PropagatorTable, H, connected, exponential: bool) -> None:
    N = table.N
    O = table.observable
    step = exponential_heun_step if exponential else heun_step
    counter = 0
    for jp in table.rows_in_order():
        for kp in range(jp, -1, -1):
            se = 0.0
            if kp == jp:
                val = IDENTITY
            elif jp == N + 1:
                val = O @ table.G[N, kp]
            elif kp == N and jp > N:
                val = table.G[jp, N + 1] @ O
            else:
                val, se = step(table, jp, kp, H, connected)
            table.set_value(jp, kp, val, counter)
            table.std_error[jp, kp] = se
            counter += 1


def solve_table(system: SystemSpec, bath: BathSpec, solver: SolveSpec, t_final: float, seed: int = 0,
                literal: bool = False, table_step: float | None = None, replica: int = 0,
                corr: CorrelationTable | None = None) -> PropagatorTable:
    """Fill the full propagator table for measurement time ``t_final``."""
    N = steps_for(t_final, solver.dt)
    dt = t_final / N
    table = PropagatorTable(N, dt, system.observable)
    H = hamiltonian(system)
    if corr is None:
        corr = correlation_for(bath, t_final, solver, table_step)
    exponential = solver.integrator == "exponential-heun"

    if solver.mode == "deterministic":
        err = np.zeros(1, dtype=np.int64)
        K.sweep_deterministic(
            table.G, table.filled, table.order, N, dt, _tuple(H), _tuple(system.observable), _tuple(COUPLING),
            _tuple(evolve(H, dt)), _tuple(evolve(H, -dt)), exponential, solver.diagrams,
            corr.values, corr.n_max, corr.step, literal, err,
        )
        if err[0]:
            raise SweepOrderError("deterministic sweep read an uncomputed entry")
        return table

    def connected(hp, kp, stage):
        # one stream per (entry, stage, order); stage one's head is the row predecessor
        jp = hp + 1 if stage == 1 else hp

        def seeder(m):
            return np.random.default_rng([seed, replica, jp, kp, stage, m])
        return connected_sum(table, hp, kp, corr, solver, literal=literal, seeder=seeder)

    _sweep_python(table, H, connected, exponential)
    return table


def solve(run) -> PropagatorTable:
    """Solve the table described by a run configuration (first replica)."""
    return solve_table(run.system, run.bath, run.solver, run.t_final, run.seed,
                       run.bath_literal, run.table_step)


def observable_curve(run, t_final: float | None = None):
    """``(tau, mean, std_error, tables)`` of ``<O(tau)>`` on ``[0, t_final]``.

    Error bars come from the spread of independent replicas; with a single
    replica they fall back to the largest per-entry diagnostic on the
    anti-diagonal (zero for deterministic solves).
    """
    t_final = run.t_final if t_final is None else t_final
    solver = run.solver
    corr = correlation_for(run.bath, t_final, solver, run.table_step)
    reps = solver.replicas if solver.mode == "monte-carlo" else 1
    curves, tables = [], []
    for r in range(reps):
        tab = solve_table(run.system, run.bath, solver, t_final, run.seed, run.bath_literal,
                          run.table_step, replica=r, corr=corr)
        obs = antidiagonal_observables(tab, run.system.rho_s)
        curves.append([v for _, v in obs])
        tables.append(tab)
    taus = np.array([tau for tau, _ in obs])
    curves = np.array(curves)
    mean = curves.mean(axis=0)
    if reps > 1:
        se = curves.std(axis=0, ddof=1) / math.sqrt(reps)
    else:
        tab = tables[0]
        N = tab.N
        se = np.array([tab.std_error[N + 1, N] if k == N else tab.std_error[2 * N - k + 1, k]
                       for k in range(N, -1, -1)])
    return taus, mean, se, tables
