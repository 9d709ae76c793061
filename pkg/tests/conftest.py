import numpy as np
import pytest

from spinboson.contour import PropagatorTable
from spinboson.system import SystemSpec, evolve, hamiltonian


def exact_bare_table(spec: SystemSpec, N: int, dt: float) -> PropagatorTable:
    """Table filled with the uncoupled propagator, honouring both limits at t."""
    table = PropagatorTable(N, dt, spec.observable)
    H = hamiltonian(spec)
    O = spec.observable
    t = N * dt

    def branch(p):
        # (time, side) where side is -1 below t and +1 at or above it
        if p < N:
            return p * dt, -1
        if p == N:
            return t, -1
        return (p - 1) * dt, 1

    for jp in range(table.P):
        for kp in range(jp + 1):
            (sf, bf), (si, bi) = branch(jp), branch(kp)
            if bf < 0:
                val = evolve(H, sf - si)
            elif bi > 0:
                val = evolve(H, si - sf)
            else:
                val = evolve(H, t - sf) @ O @ evolve(H, t - si)
            table.set_value(jp, kp, val)
    return table


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """``record(label, ok, detail)`` adds one PASS/FAIL line to the session summary."""
    def add(label: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
