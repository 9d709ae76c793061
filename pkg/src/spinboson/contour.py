"""The unfolded contour grid ``t_k = k dt``, ``k = 0 .. 2N``, with ``t = N dt``.

The propagator jumps across the measurement time, so grid index ``N`` carries
two values: ``N-`` (left limit) and ``N+`` (right limit). Storage is a dense
array over ``2N + 2`` positions:

    position:  0 .. N-1 | N  | N+1 | N+2 .. 2N+1
    index:     0 .. N-1 | N- | N+  | N+1 .. 2N

so ascending position is also the sweep order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .system import IDENTITY, SIGMA_Z, expectation

__all__ = [
    "GridIndex",
    "PropagatorTable",
    "SweepOrderError",
    "antidiagonal_observables",
    "interpolate",
    "sign_parity",
]

TAGS = ("plain", "minus", "plus")
_SNAP = 1e-9


class SweepOrderError(RuntimeError):
    """A grid value was read before it was computed."""


@dataclass(frozen=True)
class GridIndex:
    k: int
    tag: str = "plain"

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")
        if self.k < 0:
            raise ValueError("grid index must be nonnegative")

    def label(self, N: int) -> str:
        if self.tag == "minus":
            return "N-"
        if self.tag == "plus":
            return "N+"
        return str(self.k)


def sign_parity(times, t: float) -> int:
    """``(-1)`` to the number of ``times`` strictly below ``t``."""
    return -1 if int(np.sum(np.asarray(times) < t)) % 2 else 1


class PropagatorTable:
    """Triangular table of 2x2 propagator values ``G[j, k]`` with ``k <= j``.

    ``filled`` marks computed entries, ``order`` records the step at which
    each entry was finalized (``-1`` if never), and ``std_error`` holds
    per-entry Monte Carlo diagnostics (zero for deterministic solves).
    """

    def __init__(self, N: int, dt: float, observable=None):
        if N < 1:
            raise ValueError("N must be at least 1")
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.N = int(N)
        self.dt = float(dt)
        self.observable = np.array(SIGMA_Z if observable is None else observable, dtype=complex)
        P = self.P
        self.G = np.zeros((P, P, 2, 2), dtype=complex)
        self.filled = np.zeros((P, P), dtype=bool)
        self.order = np.full((P, P), -1, dtype=np.int64)
        self.std_error = np.zeros((P, P))

    @property
    def P(self) -> int:
        return 2 * self.N + 2

    @property
    def t(self) -> float:
        return self.N * self.dt

    # -- index bookkeeping

    def pos(self, idx: GridIndex | int) -> int:
        N = self.N
        if isinstance(idx, (int, np.integer)):
            idx = GridIndex(int(idx))
        if idx.k > 2 * N:
            raise IndexError(f"grid index {idx.k} beyond 2N = {2 * N}")
        if idx.tag != "plain" and idx.k != N:
            raise ValueError("only index N carries a branch tag")
        if idx.k < N:
            return idx.k
        if idx.k > N:
            return idx.k + 1
        if idx.tag == "plain":
            raise ValueError("index N is ambiguous; use tag 'minus' or 'plus'")
        return N if idx.tag == "minus" else N + 1

    def index(self, p: int) -> GridIndex:
        N = self.N
        if p < N:
            return GridIndex(p)
        if p == N:
            return GridIndex(N, "minus")
        if p == N + 1:
            return GridIndex(N, "plus")
        return GridIndex(p - 1)

    def node(self, p: int) -> int:
        return p if p <= self.N else p - 1

    def time(self, p: int) -> float:
        return self.node(p) * self.dt

    def rows_in_order(self):
        """Row positions in sweep order."""
        return list(range(self.P))

    # -- access

    def value(self, j, k) -> np.ndarray:
        jp, kp = self.pos(j), self.pos(k)
        if not self.filled[jp, kp]:
            raise SweepOrderError(f"entry ({j}, {k}) has not been computed")
        return self.G[jp, kp].copy()

    def set_value(self, jp: int, kp: int, val, counter: int | None = None) -> None:
        if kp > jp:
            raise ValueError("only k <= j is stored")
        self.G[jp, kp] = val
        self.filled[jp, kp] = True
        if counter is not None:
            self.order[jp, kp] = counter

    def is_complete(self) -> bool:
        return bool(np.all(self.filled[np.tril_indices(self.P)]))

    def check_invariants(self, atol: float = 0.0) -> None:
        """Raise ``AssertionError`` unless the diagonal and jump identities hold."""
        N, G, O = self.N, self.G, self.observable
        for p in range(self.P):
            if not np.allclose(G[p, p], IDENTITY, rtol=0, atol=atol):
                raise AssertionError(f"diagonal entry {p} is not the identity")
        if not np.allclose(G[N + 1, N], O, rtol=0, atol=atol):
            raise AssertionError("G(N+, N-) differs from the observable")
        for k in range(N):
            if not np.allclose(G[N + 1, k], O @ G[N, k], rtol=0, atol=atol):
                raise AssertionError(f"row jump identity fails at column {k}")
        for j in range(N + 2, self.P):
            if not np.allclose(G[j, N], G[j, N + 1] @ O, rtol=0, atol=atol):
                raise AssertionError(f"column jump identity fails at row {j}")

    def max_norm(self) -> float:
        """Largest operator 2-norm over the computed entries."""
        vals = self.G[self.filled]
        return float(np.linalg.norm(vals, ord=2, axis=(1, 2)).max()) if len(vals) else 0.0

    def to_csv(self, path, header: list[str] | None = None) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            for line in header or ():
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["j", "j_tag", "k", "k_tag", "re00", "im00", "re01", "im01", "re10", "im10", "re11", "im11"])
            for jp in range(self.P):
                for kp in range(jp + 1):
                    if not self.filled[jp, kp]:
                        continue
                    j, k = self.index(jp), self.index(kp)
                    flat = self.G[jp, kp].ravel()
                    row = [j.k, j.tag, k.k, k.tag]
                    for z in flat:
                        row += [repr(float(z.real)), repr(float(z.imag))]
                    w.writerow(row)


def _coordinate(table: PropagatorTable, s: float, branch: str | None):
    """(cell, fraction) of contour time ``s``; node ``N`` needs a branch."""
    N = table.N
    q = s / table.dt
    g = round(q)
    if abs(q - g) < _SNAP:
        if g == N:
            if branch == "minus":
                return N - 1, 1.0
            if branch == "plus":
                return N, 0.0
            raise ValueError("a time exactly at t needs branch='minus' or 'plus'")
        if g >= 2 * N:
            return 2 * N - 1, 1.0
        return g, 0.0
    a = min(max(math.floor(q), 0), 2 * N - 1)
    return a, q - a


def _lo(c, N):
    return c if c < N else c + 1


def _hi(c, N):
    return c + 1 if c + 1 <= N else c + 2


def interpolate(table: PropagatorTable, Sf: float, Si: float, sf_branch: str | None = None,
                si_branch: str | None = None) -> np.ndarray:
    """Piecewise-linear value of the table at contour times ``(Sf, Si)``.

    Each grid cell is split along the diagonal from ``(Si, Sf) = (t_k, t_j)``
    to ``(t_{k+1}, t_{j+1})`` and the three vertex values are blended
    barycentrically. Vertices on index ``N`` take the ``N-`` value from below
    ``t`` and ``N+`` from above; a time sitting exactly on ``t`` takes its
    side from the matching ``*_branch`` argument.
    """
    N = table.N
    T = 2 * table.t
    tol = _SNAP * table.dt
    if not (-tol <= Si <= Sf + tol and Sf <= T + tol):
        raise ValueError(f"need 0 <= Si <= Sf <= 2t, got Sf={Sf}, Si={Si}")
    a, y = _coordinate(table, Sf, sf_branch)
    b, x = _coordinate(table, Si, si_branch)
    rlo, rhi, clo, chi = _lo(a, N), _hi(a, N), _lo(b, N), _hi(b, N)
    if y >= x:
        verts = ((1 - y, rlo, clo), (y - x, rhi, clo), (x, rhi, chi))
    else:
        verts = ((1 - x, rlo, clo), (x - y, rlo, chi), (y, rhi, chi))
    out = np.zeros((2, 2), dtype=complex)
    for w, r, c in verts:
        if w == 0:
            continue
        if c > r or not table.filled[r, c]:
            raise SweepOrderError(f"vertex ({table.index(r)}, {table.index(c)}) is not available")
        out += w * table.G[r, c]
    return out


def antidiagonal_observables(table: PropagatorTable, rho_s) -> list[tuple[float, complex]]:
    """``(tau, tr(rho_s G(2t - t_k, t_k)))`` for ``k = N, ..., 0``, i.e.
    ``<O(tau)>`` with ``tau = t - t_k`` ascending from 0 to ``t``."""
    N = table.N
    out = []
    for k in range(N, -1, -1):
        if k == N:
            jp, kp = N + 1, N
        else:
            jp, kp = 2 * N - k + 1, k
        if not table.filled[jp, kp]:
            raise SweepOrderError("the anti-diagonal has not been computed")
        out.append(((N - k) * table.dt, expectation(rho_s, table.G[jp, kp])))
    return out
