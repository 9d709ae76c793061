import math

import numpy as np
import pytest

from spinboson.bath import BathSpec, build_modes, correlation_f, fold, tabulate
from spinboson.combinatorics import UnsupportedOrderError
from spinboson.contour import antidiagonal_observables
from spinboson.dyson import MCEstimate, bare_observable, bare_order_samples, variance_profile
from spinboson.inchworm import SolveSpec, solve_table
from spinboson.system import SIGMA_Z, SystemSpec, bare_propagator

SYSTEM = SystemSpec(epsilon=1.0)
BETA = 5.0


def corr_for(xi, t_max):
    return tabulate(build_modes(BathSpec(xi=xi)), BETA, t_max)


def second_order_oracle(system, xi, tau, n=24):
    """Nested Gauss-Legendre over ``0 < s1 < s2 < 2 tau``, split at ``tau``
    so the integrand is smooth on each piece; exact bath correlation."""
    modes = build_modes(BathSpec(xi=xi))
    x, w = np.polynomial.legendre.leggauss(n)

    def nodes(a, b):
        return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w

    def integrand(s1, s2):
        sgn = (-1) ** (int(s1 < tau) + int(s2 < tau))
        P = (bare_propagator(system, 2 * tau, s2, tau) @ SIGMA_Z
             @ bare_propagator(system, s2, s1, tau) @ SIGMA_Z
             @ bare_propagator(system, s1, 0.0, tau))
        tr = np.trace(system.rho_s @ P)
        B = correlation_f(modes, BETA, fold(s2, tau) - fold(s1, tau))
        return -sgn * tr * B

    total = 0j
    for a2, b2 in ((0.0, tau), (tau, 2 * tau)):
        s2s, w2s = nodes(a2, b2)
        for s2, w2 in zip(s2s, w2s):
            for a1, b1 in ((0.0, min(s2, tau)), (tau, s2)):
                if b1 <= a1:
                    continue
                s1s, w1s = nodes(a1, b1)
                total += w2 * sum(w1 * integrand(s1, s2) for s1, w1 in zip(s1s, w1s))
    return total


class TestBareSeries:
    def test_zeroth_order_exact(self):
        system = SystemSpec()
        for tau in (0.3, 1.0, 2.2):
            est = bare_observable(system, corr_for(0.2, 2 * tau), tau, 0, 10, np.random.default_rng(0))
            assert est.mean == pytest.approx(np.cos(2 * tau), abs=1e-14)
            assert est.std_error == 0.0

    def test_decoupled_orders_vanish(self):
        est = bare_observable(SYSTEM, corr_for(0.0, 2.0), 1.0, 4, 1000, np.random.default_rng(0))
        assert est.per_order[2] == (0, 0.0)
        assert est.per_order[4] == (0, 0.0)
        assert est.std_error == 0.0

    @pytest.mark.parametrize("M", [-2, 3])
    def test_invalid_truncation(self, M):
        with pytest.raises(ValueError):
            bare_observable(SYSTEM, corr_for(0.1, 2.0), 1.0, M, 10, np.random.default_rng(0))

    def test_order_limit(self):
        with pytest.raises(UnsupportedOrderError):
            bare_observable(SYSTEM, corr_for(0.1, 2.0), 1.0, 10, 10, np.random.default_rng(0))

    def test_table_coverage(self):
        with pytest.raises(ValueError):
            bare_order_samples(SYSTEM, corr_for(0.1, 1.0), 1.0, 2, 10, np.random.default_rng(0))

    def test_oracle_self_converged(self):
        a = second_order_oracle(SYSTEM, 0.2, 0.8, n=16)
        b = second_order_oracle(SYSTEM, 0.2, 0.8, n=24)
        assert abs(a - b) < 1e-10

    @pytest.mark.parametrize("tau", [0.4, 1.0])
    def test_second_order_matches_quadrature(self, tau):
        exact = second_order_oracle(SYSTEM, 0.2, tau)
        vals = bare_order_samples(SYSTEM, corr_for(0.2, 2 * tau), tau, 2, 100_000, np.random.default_rng(11))
        mean = vals.mean()
        se_re = vals.real.std(ddof=1) / math.sqrt(len(vals))
        se_im = vals.imag.std(ddof=1) / math.sqrt(len(vals))
        assert abs(mean.real - exact.real) <= 4 * se_re + 1e-12
        assert abs(mean.imag - exact.imag) <= 4 * se_im + 1e-12

    def test_observable_is_real(self):
        # the imaginary parts cancel between mirrored configurations on average
        est = bare_observable(SYSTEM, corr_for(0.2, 2.0), 1.0, 2, 50_000, np.random.default_rng(2))
        assert abs(est.mean.imag) <= 4 * est.std_error

    def test_standard_error_scaling(self):
        corr = corr_for(0.2, 2.0)
        se = [bare_observable(SYSTEM, corr, 1.0, 4, n, np.random.default_rng(7)).std_error
              for n in (20_000, 80_000)]
        assert se[0] / se[1] == pytest.approx(2.0, rel=0.2)

    def test_determinism(self):
        corr = corr_for(0.2, 2.0)
        a = bare_observable(SYSTEM, corr, 1.0, 4, 1000, np.random.default_rng(5))
        b = bare_observable(SYSTEM, corr, 1.0, 4, 1000, np.random.default_rng(5))
        assert a == b

    def test_first_inchworm_order_reproduces_second_bare_order(self):
        # at weak coupling the bold first order contains the whole bare m = 2 term
        xi, tau = 0.01, 1.0
        bare2 = second_order_oracle(SYSTEM, xi, tau)
        tab = solve_table(SYSTEM, BathSpec(xi=xi), SolveSpec(dt=0.05), tau)
        tab0 = solve_table(SYSTEM, BathSpec(xi=0.0), SolveSpec(dt=0.05), tau)
        inch = antidiagonal_observables(tab, SYSTEM.rho_s)[-1][1]
        free = antidiagonal_observables(tab0, SYSTEM.rho_s)[-1][1]
        assert abs((inch - free) - bare2) <= 0.05 * abs(bare2)


class TestEstimate:
    def test_validation(self):
        with pytest.raises(ValueError):
            MCEstimate(0.0, -1.0, 10)
        with pytest.raises(ValueError):
            MCEstimate(0.0, 0.0, 0)


class TestVarianceProfile:
    def test_rows(self):
        corr = corr_for(0.2, 2.0)
        rows = variance_profile(SYSTEM, corr, [0.0, 1.0, 2.0], 2, 5000, np.random.default_rng(0))
        assert rows[0] == (0.0, 0.0, 0.0, 0.0)
        for length, var, var_se, env in rows:
            assert env == math.expm1(corr.c_b**2 * length**2 / 2)
            assert var >= 0 and var_se >= 0

    def test_decoupled_has_no_variance(self):
        rows = variance_profile(SYSTEM, corr_for(0.0, 2.0), [1.0, 2.0], 4, 1000, np.random.default_rng(0))
        assert all(var == 0.0 for _, var, _, _ in rows)
