"""Discretized Ohmic bath and its two-point correlation function.

The bath enters the solvers only through

    f(s) = sum_l c_l^2 / (2 w_l) * [coth(beta w_l / 2) cos(w_l s) - 1j sin(w_l s)],

evaluated at the difference of physical times of two contour points.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "BathModes",
    "BathSpec",
    "CorrelationTable",
    "DEFAULT_TABLE_STEP",
    "bound_Cb",
    "build_modes",
    "contour_B",
    "correlation_f",
    "curvature_bound",
    "fold",
    "tabulate",
    "write_table_csv",
]

DEFAULT_TABLE_STEP = 5e-4


@dataclass(frozen=True)
class BathSpec:
    L: int = 200
    beta: float = 5.0
    omega_c: float = 2.5
    omega_max: float = 10.0
    xi: float = 0.2

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L}")
        for name in ("beta", "omega_c", "omega_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")
        if self.omega_max < self.omega_c:
            raise ValueError("omega_max must be at least omega_c")


@dataclass(frozen=True, eq=False)
class BathModes:
    omegas: np.ndarray
    couplings: np.ndarray


def build_modes(spec: BathSpec) -> BathModes:
    """Ohmic modes with exponential cutoff, one mode per equal slice of
    ``int J(w)/w dw`` so that the highest mode sits exactly at ``omega_max``.
    """
    L, wc = spec.L, spec.omega_c
    shape = -math.expm1(-spec.omega_max / wc)  # 1 - exp(-w_max / w_c)
    l = np.arange(1, L + 1)
    omegas = -wc * np.log1p(-(l / L) * shape)
    omegas[-1] = spec.omega_max
    couplings = omegas * math.sqrt(spec.xi * wc / L * shape)
    omegas.setflags(write=False)
    couplings.setflags(write=False)
    return BathModes(omegas, couplings)


def _coth(x):
    # tanh saturates to 1 for large arguments, so this never overflows
    return 1.0 / np.tanh(x)


def _weights(modes: BathModes, beta: float):
    w = modes.omegas
    amp = modes.couplings**2 / (2 * w)
    return w, amp, amp * _coth(0.5 * beta * w)


def correlation_f(modes: BathModes, beta: float, s):
    """Bath correlation ``f(s)``; ``s`` may be a scalar or an array."""
    w, amp, amp_coth = _weights(modes, beta)
    s_arr = np.asarray(s, dtype=float)
    phase = np.multiply.outer(s_arr, w)
    out = np.cos(phase) @ amp_coth - 1j * (np.sin(phase) @ amp)
    return complex(out) if out.ndim == 0 else out


def bound_Cb(modes: BathModes, beta: float) -> float:
    """``C_b = sum_l c_l^2 / (2 w_l) coth(beta w_l / 2)``, the sup of ``|f|``."""
    amp_coth = _weights(modes, beta)[2]
    # same reduction as correlation_f at s = 0, so the two agree bit for bit
    return float(np.ones_like(amp_coth) @ amp_coth)


def curvature_bound(modes: BathModes, beta: float) -> float:
    """Upper bound on ``|f''(s)|``, used to size the tabulation step."""
    w, _, amp_coth = _weights(modes, beta)
    return float(np.sum(amp_coth * w**2))


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    """``f`` sampled at ``s = n * step`` for ``|n| <= n_max``, with linear
    interpolation between nodes."""

    step: float
    n_max: int
    values: np.ndarray
    c_b: float

    @property
    def t_max(self) -> float:
        return self.n_max * self.step

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1) * self.step

    def lookup(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(np.abs(s_arr) > self.t_max * (1 + 1e-12)):
            raise ValueError(f"lookup outside the tabulated range [-{self.t_max}, {self.t_max}]")
        x = np.clip(s_arr / self.step + self.n_max, 0.0, 2 * self.n_max)
        i = np.minimum(np.floor(x).astype(np.int64), 2 * self.n_max - 1)
        frac = x - i
        out = (1 - frac) * self.values[i] + frac * self.values[i + 1]
        return complex(out) if out.ndim == 0 else out

    __call__ = lookup


def tabulate(modes: BathModes, beta: float, t_max: float, step: float = DEFAULT_TABLE_STEP) -> CorrelationTable:
    """Tabulate ``f`` on ``[-t_max, t_max]`` (rounded outward to a node)."""
    if step <= 0 or t_max < 0:
        raise ValueError("need step > 0 and t_max >= 0")
    n_max = max(1, math.ceil(t_max / step - 1e-9))
    positive = np.empty(n_max + 1, dtype=complex)
    chunk = 4096
    for lo in range(0, n_max + 1, chunk):
        hi = min(lo + chunk, n_max + 1)
        positive[lo:hi] = correlation_f(modes, beta, np.arange(lo, hi) * step)
    c_b = bound_Cb(modes, beta)
    positive[0] = c_b
    values = np.concatenate([positive[:0:-1].conj(), positive])
    values.setflags(write=False)
    return CorrelationTable(step=step, n_max=n_max, values=values, c_b=c_b)


def fold(tau, t):
    """Physical time of a contour point: ``tau`` on the forward branch,
    ``2t - tau`` on the backward one."""
    tau = np.asarray(tau, dtype=float)
    out = np.where(tau < t, tau, 2 * t - tau)
    return float(out) if out.ndim == 0 else out


def contour_B(table: CorrelationTable, tau1: float, tau2: float, t: float, literal: bool = False) -> complex:
    """Pair contraction for contour points ``tau1 <= tau2`` in ``[0, 2t]``.

    By default the arguments are folded to physical time first, which is what
    a direct trace over the bath propagators produces; ``literal=True`` uses
    the raw contour difference ``tau2 - tau1``.
    """
    if not 0.0 <= tau1 <= tau2 <= 2 * t:
        raise ValueError(f"need 0 <= tau1 <= tau2 <= 2t, got {tau1}, {tau2}, t={t}")
    if literal:
        return table.lookup(tau2 - tau1)
    return table.lookup(fold(tau2, t) - fold(tau1, t))


def write_table_csv(table: CorrelationTable, path, header: list[str] | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["s", "re_f", "im_f"])
        for s, v in zip(table.nodes, table.values):
            writer.writerow([repr(float(s)), repr(float(v.real)), repr(float(v.imag))])
