"""Orbit clouds, Birkhoff averages, correlation decay, CLT diagnostics."""

import math

import numpy as np
import pytest

import ghmlab as g
from ghmlab import stats
from ghmlab.errors import DegenerateObservableError
from ghmlab.transfer import GridDensity, spectral_gap, stationary_density, ulam_matrix


class TestPushCloud:
    def test_no_dynamics_is_uniform_sample(self, baker):
        res = stats.push_cloud(baker, 50_000, 0, seed=1, m=16)
        assert res.density.l1_distance(GridDensity.uniform(16)) <= 3.0 / math.sqrt(50_000 / 256)

    def test_baker_stays_uniform(self, baker):
        n, m = 100_000, 32
        res = stats.push_cloud(baker, n, 20, seed=5, m=m)
        # Monte Carlo aggregation scale for the per-cell histogram error
        assert res.density.l1_distance(GridDensity.uniform(m)) <= 3.0 / math.sqrt(n / m**2)

    def test_bit_reproducible(self, slanted3):
        a = stats.push_cloud(slanted3, 10_000, 10, seed=9, m=16)
        b = stats.push_cloud(slanted3, 10_000, 10, seed=9, m=16)
        assert np.array_equal(a.density.values, b.density.values)

    def test_snapshots_consistent_with_full_run(self, slanted3):
        full = stats.push_cloud(slanted3, 5_000, 15, seed=3, m=16)
        snapped = stats.push_cloud(slanted3, 5_000, 15, seed=3, m=16, snapshot_steps=(1, 7))
        assert np.array_equal(full.density.values, snapped.density.values)
        assert sorted(snapped.snapshots) == [1, 7]

    def test_seed_variation_within_mc_band(self, baker):
        n, m = 100_000, 32
        a = stats.push_cloud(baker, n, 10, seed=0, m=m).density
        b = stats.push_cloud(baker, n, 10, seed=1, m=m).density
        # two independent histograms differ by about sqrt(2) x the single-cloud error
        expected = math.sqrt(2.0) * math.sqrt(2.0 / math.pi) / math.sqrt(n / m**2)
        assert a.l1_distance(b) <= 2.0 * expected

    def test_validation(self, baker):
        with pytest.raises(ValueError):
            stats.push_cloud(baker, 10, 5, seed=0, m=8)


class TestBirkhoff:
    def test_constant_observable(self, slanted3):
        one = stats.indicator(0.0, 2.0, 0.0, 2.0)
        assert stats.birkhoff_average(slanted3, one, (0.3, 0.4), 1000) == 1.0

    def test_baker_coord_x(self, baker):
        avg = stats.birkhoff_average(baker, stats.coord_x, (0.3121, 0.711), 1_000_000)
        assert abs(avg - 0.5) <= 0.01

    def test_same_physical_measure_from_two_starts(self, slanted3):
        a = stats.birkhoff_average(slanted3, stats.coord_y, (0.123, 0.456), 1_000_000)
        b = stats.birkhoff_average(slanted3, stats.coord_y, (0.777, 0.888), 1_000_000)
        assert abs(a - b) <= 0.01

    def test_rms_convergence_rate(self, baker):
        # ensemble root-mean-square error of time averages scales like n^-1/2
        rng = np.random.default_rng(9)
        samples = 256
        x = rng.random(samples)
        y = rng.random(samples)
        ns = [1000, 4000, 16000, 64000]
        sums = np.zeros(samples)
        done = 0
        rms = []
        for n in ns:
            for t in range(done, n):
                sums += x
                stats._advance(baker, x, y, 1, 9, t_offset=t)
            done = n
            rms.append(float(np.sqrt(np.mean((sums / n - 0.5) ** 2))))
        slope = np.polyfit(np.log(ns), np.log(rms), 1)[0]
        assert abs(slope + 0.5) <= 0.15


class TestCorrelation:
    def test_constant_observable_degenerate(self, baker):
        one = stats.indicator(0.0, 2.0, 0.0, 2.0)
        with pytest.raises(DegenerateObservableError):
            stats.correlation_series(baker, one, one, 4, 10_000, seed=0)

    def test_baker_doubling_autocovariance(self, baker):
        cs = stats.correlation_series(
            baker, stats.coord_x, stats.coord_x, 6, 1_000_000, burn_in=1000, seed=11
        )
        # quadrature oracle: C(n) = 2^-n / 12 for the doubling-map marginal
        for n in range(7):
            assert abs(cs.values[n] - 2.0**-n / 12.0) <= 2e-3
        assert cs.fitted_rate == pytest.approx(math.log(2.0), rel=0.15)
        assert cs.variance == cs.values[0]
        assert abs(cs.variance - 1.0 / 12.0) <= 1e-3

    def test_high_lag_noise_floor(self, baker):
        cs = stats.correlation_series(
            baker, stats.coord_x, stats.coord_x, 30, 1_000_000, seed=11
        )
        assert abs(cs.values[25]) <= cs.noise_floor

    def test_slanted3_rate_consistent_with_ulam_gap(self, slanted3):
        # cross-module check: the Ulam second modulus bounds the decay of
        # smooth observables; coord_y has a genuine multi-step rate
        cs = stats.correlation_series(
            slanted3, stats.coord_y, stats.coord_y, 8, 10_000_000, seed=5
        )
        P = ulam_matrix(slanted3, 128, 256, seed=0)
        ulam_rate = -math.log(spectral_gap(P).second_modulus)
        assert cs.fitted_rate is not None and cs.fitted_rate > 0
        assert abs(cs.fitted_rate - ulam_rate) <= 0.3 * ulam_rate

    def test_fourier_mode_dominated_by_gap(self, slanted3):
        # cos(2 pi x) is orthogonal to its own pushforwards under the
        # x-tripling marginal, so its decay beats the Ulam-gap envelope
        cs = stats.correlation_series(
            slanted3, stats.cos2pix, stats.cos2pix, 6, 1_000_000, seed=5
        )
        P = ulam_matrix(slanted3, 64, 256, seed=0)
        mod = spectral_gap(P).second_modulus
        for n in range(7):
            assert abs(cs.values[n]) <= cs.values[0] * mod**n + cs.noise_floor


class TestClt:
    def test_degenerate_variance(self, baker):
        one = stats.indicator(0.0, 2.0, 0.0, 2.0)
        with pytest.raises(DegenerateObservableError):
            stats.clt_diagnostic(baker, one, 200, 2000, seed=0)

    def test_baker_normal_limit(self, baker):
        rep = stats.clt_diagnostic(baker, stats.coord_x, 1000, 10_000, seed=3)
        assert rep.ks_statistic < 0.02
        assert abs(rep.mean) < 1e-9  # centered by construction
        assert rep.variance > 0

    def test_slanted3_normal_limit(self, slanted3):
        rep = stats.clt_diagnostic(slanted3, stats.coord_x, 1000, 10_000, seed=3)
        assert rep.ks_statistic < 0.05

    def test_validation(self, baker):
        with pytest.raises(ValueError):
            stats.clt_diagnostic(baker, stats.coord_x, 10, 2000, seed=0)
        with pytest.raises(ValueError):
            stats.clt_diagnostic(baker, stats.coord_x, 200, 10, seed=0)


class TestObservables:
    def test_builtin_lookup(self):
        assert stats.builtin_observable("coord_x") is stats.coord_x
        with pytest.raises(KeyError):
            stats.builtin_observable("nope")

    def test_grid_sampled(self):
        from ghmlab.transfer import half_square_indicator

        obs = stats.grid_sampled(half_square_indicator(8))
        assert obs(0.1, 0.5) == 2.0
        assert obs(0.9, 0.5) == 0.0

    def test_raw_callable_accepted(self, baker):
        avg = stats.birkhoff_average(baker, lambda x, y: x * 0 + 2.0, (0.3, 0.4), 100)
        assert avg == 2.0
