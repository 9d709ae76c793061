"""Bare Dyson-series Monte Carlo for ``<O(tau)>``.

Order ``m`` of the series is an ``m``-fold integral over the ordered simplex
``2 tau > s_m > ... > s_1 > 0`` of

    i^m (-1)^{#{s < tau}} tr(rho_s U0(2 tau, s, 0)) * sum over pairings of prod B,

with ``U0`` the bare propagator interleaved with the coupling ``W``. Each
order is sampled separately with uniform sorted times and one uniformly drawn
pairing weighted by the family size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .bath import CorrelationTable
from .combinatorics import UnsupportedOrderError, double_factorial, pairing_index_table
from .system import SIGMA_Z, SystemSpec, bare_propagator, expectation, hamiltonian, pauli_decompose

__all__ = [
    "MAX_BARE_ORDER",
    "MCEstimate",
    "bare_observable",
    "bare_order_samples",
    "variance_profile",
]

MAX_BARE_ORDER = 8


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo estimate with per-order breakdown ``{m: (mean, std_error)}``."""

    mean: complex
    std_error: float
    samples: int
    per_order: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.std_error < 0 or self.samples < 1:
            raise ValueError("need std_error >= 0 and samples >= 1")


def _check_M(M: int) -> None:
    if M < 0 or M % 2:
        raise ValueError(f"bare truncation M must be even and nonnegative, got {M}")
    if M > MAX_BARE_ORDER:
        raise UnsupportedOrderError(f"bare truncation M = {M} exceeds {MAX_BARE_ORDER}")


def _system_args(system: SystemSpec):
    a0, b = pauli_decompose(hamiltonian(system))
    bnorm = float(np.linalg.norm(b))
    if bnorm > 0:
        n = b / bnorm
        nsig = (complex(n[2]), complex(n[0] - 1j * n[1]), complex(n[0] + 1j * n[1]), complex(-n[2]))
    else:
        nsig = (0j, 0j, 0j, 0j)
    tup = lambda a: tuple(complex(z) for z in np.asarray(a, dtype=complex).ravel())  # noqa: E731
    return float(a0), bnorm, nsig, tup(system.observable), tup(SIGMA_Z), tup(system.rho_s)


def _zeroth(system: SystemSpec, tau: float) -> complex:
    return expectation(system.rho_s, bare_propagator(system, 2 * tau, 0.0, tau))


def bare_order_samples(system: SystemSpec, corr: CorrelationTable, tau: float, m: int, n: int,
                       rng: np.random.Generator, literal: bool = False) -> np.ndarray:
    """``n`` weighted samples of the order-``m`` term (``m`` even, ``m >= 2``).

    Each sample already carries the simplex volume ``(2 tau)^m / m!`` and the
    pairing multiplicity ``(m - 1)!!``, so the order-``m`` term is their mean.
    """
    if m < 2 or m % 2:
        raise ValueError("order must be even and at least 2")
    if corr.t_max < 2 * tau * (1 - 1e-12):
        raise ValueError("correlation table does not cover [-2 tau, 2 tau]")
    pairs = pairing_index_table(m)
    U = rng.random((n, m))
    choice = rng.integers(len(pairs), size=n)
    out = np.empty(n, dtype=complex)
    a0, bnorm, nsig, O, W, rho = _system_args(system)
    K.bare_samples(tau, m, U, choice, pairs, a0, bnorm, nsig, O, W, rho,
                   corr.values, corr.n_max, corr.step, literal, out)
    return out * (double_factorial(m - 1) * (2 * tau) ** m / math.factorial(m))


def bare_observable(system: SystemSpec, corr: CorrelationTable, tau: float, M: int, samples_per_order: int,
                    rng: np.random.Generator, literal: bool = False) -> MCEstimate:
    """Truncated bare series for ``<O(tau)>`` summed over even orders ``<= M``.

    The zeroth order is exact; higher orders are stratified with
    ``samples_per_order`` draws each.
    """
    _check_M(M)
    if not tau > 0:
        raise ValueError("tau must be positive")
    mean = _zeroth(system, tau)
    per_order = {0: (mean, 0.0)}
    var = 0.0
    for m in range(2, M + 1, 2):
        vals = bare_order_samples(system, corr, tau, m, samples_per_order, rng, literal)
        mu = complex(vals.mean())
        se = float(np.sqrt(np.var(vals, ddof=1) / len(vals))) if len(vals) > 1 else 0.0
        per_order[m] = (mu, se)
        mean += mu
        var += se**2
    return MCEstimate(mean, math.sqrt(var), max(samples_per_order if M else 1, 1), per_order)


def variance_profile(system: SystemSpec, corr: CorrelationTable, lengths, M: int, samples: int,
                     rng: np.random.Generator, literal: bool = False):
    """Per-sample variance of the bare estimator against contour length.

    For contour length ``L`` the estimator of ``<O(L / 2)>`` is sampled once
    per order; its variance is the sum of the per-order sample variances.
    Returns rows ``(L, variance, variance_std_error, envelope)`` with the
    envelope ``exp(C_b^2 L^2 / 2) - 1``.
    """
    _check_M(M)
    rows = []
    for length in lengths:
        length = float(length)
        envelope = math.expm1(corr.c_b**2 * length**2 / 2)
        if length <= 0 or M == 0:
            rows.append((length, 0.0, 0.0, envelope))
            continue
        var = 0.0
        var_se2 = 0.0
        for m in range(2, M + 1, 2):
            vals = bare_order_samples(system, corr, length / 2, m, samples, rng, literal)
            dev2 = np.abs(vals - vals.mean()) ** 2
            v = float(dev2.mean()) * samples / (samples - 1)
            var += v
            var_se2 += max(float(np.mean(dev2**2)) - v**2, 0.0) / samples
        rows.append((length, var, math.sqrt(var_se2), envelope))
    return rows
