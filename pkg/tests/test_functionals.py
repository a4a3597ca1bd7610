import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

import driftlab as dl
from driftlab.functionals import FunctionalError
from conftest import constant_path, ramp_path

DT_BIN = 2.0**-10  # binary-fraction step: partial sums of k*dt are exact floats


def mean_local_time_bm(t, y=0.0):
    """Independent oracle: E L_t^y for driftless unit-noise motion started at 0
    is the time integral of the transition density at y."""
    val, _ = quad(lambda s: math.exp(-y * y / (2 * s)) / math.sqrt(2 * math.pi * s), 0.0, t, limit=300)
    return val


class TestAdditiveFunctional:
    def test_unit_integrand_exact(self, bm):
        path = constant_path(bm, 0.0, 8.0, DT_BIN, (7.0, 8.0))
        series = dl.additive_functional(path, lambda x: np.ones_like(x))
        assert series.values[0] == 7.0
        assert series.values[1] == 8.0

    def test_indicator_misses_constant_path(self, bm):
        path = constant_path(bm, 5.0, 4.0, DT_BIN, (4.0,))
        ind = lambda x: ((x >= 0.0) & (x <= 1.0)).astype(float)
        assert dl.additive_functional(path, ind).values[0] == 0.0

    def test_nonfinite_integrand_reports_location(self, bm):
        path = constant_path(bm, 5.0, 1.0, DT_BIN, (1.0,))
        with pytest.raises(FunctionalError) as err:
            dl.additive_functional(path, lambda x: np.where(x > 1, np.inf, 1.0))
        assert err.value.x == 5.0

    def test_bm_occupation_matches_transition_oracle(self, bm):
        # oracle: E int_0^t 1_[0,1](B_s) ds = int_0^t (Phi(1/sqrt(s)) - 1/2) ds
        t = 100.0
        oracle, _ = quad(lambda s: norm.cdf(1.0 / math.sqrt(s)) - 0.5, 0.0, t, limit=300)
        cfg = dl.PathConfig(0.0, t, 1e-3, (t,), seed=31)
        ind = lambda x: ((x >= 0.0) & (x <= 1.0)).astype(float)
        vals = [dl.additive_functional(dl.simulate_path(bm, cfg.with_replicate(i)), ind).values[0] for i in range(200)]
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert np.mean(vals) == pytest.approx(oracle, abs=4.0 * se + 0.05)

    def test_series_nondecreasing_for_nonnegative_integrand(self, ou):
        cfg = dl.PathConfig(0.0, 10.0, 1e-3, tuple(np.arange(1.0, 11.0)), seed=13)
        path = dl.simulate_path(ou, cfg)
        ind = lambda x: ((x >= -0.5) & (x <= 0.5)).astype(float)
        assert np.all(np.diff(dl.additive_functional(path, ind).values) >= 0.0)


class TestKernelAf:
    def test_constant_path_at_center(self, bm):
        path = constant_path(bm, 0.0, 4.0, 2.0**-8, (4.0,))
        for h in (0.1, 0.5, 1.0):
            assert dl.kernel_af(path, 0.0, h, dl.QUARTIC).values[0] == 3.75  # phi(0) * 4

    def test_path_outside_support(self, bm):
        path = constant_path(bm, 3.0, 4.0, DT_BIN, (4.0,))
        assert dl.kernel_af(path, 0.0, 1.0, dl.QUARTIC).values[0] == 0.0

    def test_matches_dense_formula(self, bm):
        cfg = dl.PathConfig(0.0, 5.0, 1e-3, (2.0, 5.0), seed=17)
        path = dl.simulate_path(bm, cfg)
        for h in (0.3, 1.3):
            got = dl.kernel_af(path, 0.1, h, dl.QUARTIC).values
            w = np.asarray(dl.QUARTIC.phi((path.x[:-1] - 0.1) / h))
            want = np.cumsum(w * path.dt)[path.checkpoint_indices() - 1]
            assert np.array_equal(got, want)

    def test_h_scaling_against_occupation_on_constant_path(self, bm):
        # at matched window scales the kernel mass and the occupation window
        # count the same steps, so the ratio is exactly phi(0)
        path = constant_path(bm, 0.0, 4.0, 2.0**-8, (4.0,))
        for h in (0.5, 0.25, 0.125, 0.0625):
            a_over_h = dl.kernel_af(path, 0.0, h, dl.QUARTIC).values[0] / h
            occ = dl.occupation_local_time(path, 0.0, epsilon=h / 2.0).values[0]
            assert a_over_h / occ == 0.9375

    def test_small_h_approaches_occupation_on_noisy_path(self, bm):
        cfg = dl.PathConfig(0.0, 200.0, 1e-4, (200.0,), seed=23)
        path = dl.simulate_path(bm, cfg)
        eps = dl.default_epsilon(path.dt)
        target = dl.occupation_local_time(path, 0.0, eps).values[0]
        ratios = [
            dl.kernel_af(path, 0.0, h, dl.QUARTIC).values[0] / h / target for h in (0.4, 0.2, 0.1, 0.05)
        ]
        assert abs(ratios[-1] - 1.0) < 0.2
        assert abs(ratios[-1] - 1.0) <= abs(ratios[0] - 1.0) + 0.05


class TestKernelMartingale:
    def test_zero_outside_support(self, bm):
        path = constant_path(bm, 3.0, 4.0, DT_BIN, (2.0, 4.0))
        assert np.all(dl.kernel_martingale(path, 0.0, 1.0, dl.QUARTIC).values == 0.0)

    def test_missing_noise_rejected(self, bm):
        path = constant_path(bm, 0.0, 1.0, DT_BIN, (1.0,))
        path.dw = None
        with pytest.raises(ValueError, match="noise"):
            dl.kernel_martingale(path, 0.0, 1.0, dl.QUARTIC)

    def test_scaling_linearity_exact(self, ou):
        cfg = dl.PathConfig(0.0, 5.0, 1e-3, (5.0,), seed=29)
        path = dl.simulate_path(ou, cfg)
        doubled = dl.KernelSpec("2x", lambda x: 2.0 * dl.QUARTIC.phi(x), lambda x: 2.0 * dl.QUARTIC.phi_prime(x))
        base = dl.kernel_martingale(path, 0.0, 0.4, dl.QUARTIC).values
        twice = dl.kernel_martingale(path, 0.0, 0.4, doubled).values
        assert np.array_equal(twice, 2.0 * base)

    def test_null_expectation_and_isometry(self, ou):
        cfg = dl.PathConfig(0.0, 20.0, 1e-3, (20.0,), seed=37)
        m_vals, qv_vals = [], []
        for i in range(400):
            path = dl.simulate_path(ou, cfg.with_replicate(i))
            m_vals.append(dl.kernel_martingale(path, 0.0, 0.4, dl.QUARTIC).values[0])
            w = np.asarray(dl.QUARTIC.phi(path.x[:-1] / 0.4))
            qv_vals.append(float(np.sum(w * w * np.asarray(path.model.sigma2(path.x[:-1]))) * path.dt))
        m_vals = np.array(m_vals)
        se = m_vals.std(ddof=1) / math.sqrt(m_vals.size)
        assert abs(m_vals.mean()) <= 4.0 * se
        # Itô isometry: replicate variance matches the mean quadratic variation
        assert m_vals.var(ddof=1) == pytest.approx(np.mean(qv_vals), rel=0.25)


class TestTanakaLocalTime:
    def test_monotone_ramp_has_no_local_time(self, bm):
        path = ramp_path(bm, 1.0, 2.0, 2.0**-9, (2.0,))
        # level chosen just below a grid point: the discrete overshoot gap vanishes
        y = 1.0 - 2.0**-40
        assert abs(dl.tanaka_local_time(path, y).values[0]) < 1e-9
        # at a generic level the error is bounded by the single-step overshoot
        assert abs(dl.tanaka_local_time(path, 1.0).values[0]) <= 2.0 * path.dt + 1e-12

    def test_constant_path_away_from_level(self, bm):
        path = constant_path(bm, 2.0, 4.0, DT_BIN, (4.0,))
        assert dl.tanaka_local_time(path, 0.5).values[0] == 0.0

    def test_bm_matches_closed_form_mean(self, bm):
        oracle = mean_local_time_bm(100.0)  # = sqrt(2*100/pi)
        assert oracle == pytest.approx(math.sqrt(200.0 / math.pi), rel=1e-9)
        cfg = dl.PathConfig(0.0, 100.0, 1e-3, (100.0,), seed=41)
        vals = np.array(
            [dl.tanaka_local_time(dl.simulate_path(bm, cfg.with_replicate(i)), 0.0).values[0] for i in range(200)]
        )
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert vals.mean() == pytest.approx(oracle, abs=4.0 * se + 0.1)

    def test_left_point_estimator_never_negative(self, bm, ou):
        # the left-point discretization decomposes into nonnegative excursion
        # blocks, so the -10 sqrt(dt) warning floor is a pure safety net
        # (float cancellation can leave a few ulps below zero)
        cfg = dl.PathConfig(0.3, 5.0, 1e-2, (1.0, 5.0), seed=43)
        for model in (bm, ou):
            for i in range(20):
                path = dl.simulate_path(model, cfg.with_replicate(i))
                for y in (-0.7, 0.0, 0.4):
                    assert np.all(dl.tanaka_local_time(path, y).values >= -1e-12)


class TestOccupationLocalTime:
    def test_constant_path_formula(self, bm):
        path = constant_path(bm, 1.0, 3.0, 2.0**-8, (3.0,))
        for eps in (0.25, 0.5):
            assert dl.occupation_local_time(path, 1.0, eps).values[0] == 3.0 / (2.0 * eps)

    def test_distant_level_zero(self, bm):
        path = constant_path(bm, 0.0, 3.0, DT_BIN, (3.0,))
        assert dl.occupation_local_time(path, 1.0, 0.5).values[0] == 0.0

    def test_nondecreasing_in_time(self, bm):
        cfg = dl.PathConfig(0.0, 10.0, 1e-3, tuple(np.arange(1.0, 11.0)), seed=47)
        path = dl.simulate_path(bm, cfg)
        vals = dl.occupation_local_time(path, 0.0).values
        assert np.all(np.diff(vals) >= 0.0)

    def test_bm_mean_against_oracle(self, bm):
        oracle = mean_local_time_bm(100.0)
        cfg = dl.PathConfig(0.0, 100.0, 1e-3, (100.0,), seed=53)
        vals = np.array(
            [
                dl.occupation_local_time(dl.simulate_path(bm, cfg.with_replicate(i)), 0.0).values[0]
                for i in range(200)
            ]
        )
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert vals.mean() == pytest.approx(oracle, abs=4.0 * se + 0.2)

    def test_sigma_scaling(self):
        scaled = dl.zero_drift(s=2.0)
        path = constant_path(scaled, 0.0, 3.0, 2.0**-8, (3.0,))
        # sigma^2 = 4 multiplies the estimate
        assert dl.occupation_local_time(path, 0.0, 0.5).values[0] == 4.0 * 3.0


class TestLocalTimeField:
    def test_single_point_grid_identical_to_pointwise(self, bm):
        cfg = dl.PathConfig(0.0, 20.0, 1e-3, (10.0, 20.0), seed=59)
        path = dl.simulate_path(bm, cfg)
        field = dl.local_time_field(path, np.array([0.3]), 0.05)
        point = dl.occupation_local_time(path, 0.3, 0.05)
        assert np.array_equal(field.values[0], point.values)

    def test_matches_pointwise_on_full_grid(self, bm):
        cfg = dl.PathConfig(0.0, 20.0, 1e-3, (10.0, 20.0), seed=61)
        path = dl.simulate_path(bm, cfg)
        grid = np.linspace(-1.0, 1.0, 21)
        field = dl.local_time_field(path, grid, 0.05)
        for gi, y in enumerate(grid):
            assert np.array_equal(field.values[gi], dl.occupation_local_time(path, float(y), 0.05).values)

    def test_constant_path_straddle(self, bm):
        path = constant_path(bm, 0.05, 2.0, DT_BIN, (2.0,))
        field = dl.local_time_field(path, np.linspace(-1.0, 1.0, 21), epsilon=0.1)
        hit = np.abs(field.grid - 0.05) <= 0.1
        assert np.all(field.values[hit, 0] > 0.0)
        assert np.all(field.values[~hit, 0] == 0.0)

    def test_grid_validation(self, bm):
        path = constant_path(bm, 0.0, 1.0, DT_BIN, (1.0,))
        with pytest.raises(ValueError):
            dl.local_time_field(path, np.array([]), 0.1)
        with pytest.raises(ValueError):
            dl.local_time_field(path, np.array([1.0, 0.5]), 0.1)

    def test_bulk_field_mean_against_pointwise_oracle(self, bm):
        # mean local time off the origin decays like the integrated transition
        # density; each grid point is checked against its own oracle value
        t, n_rep = 100.0, 120
        grid = np.linspace(-1.0, 1.0, 5)
        cfg = dl.PathConfig(0.0, t, 1e-3, (t,), seed=67)
        acc = np.zeros(grid.size)
        for i in range(n_rep):
            acc += dl.local_time_field(dl.simulate_path(bm, cfg.with_replicate(i)), grid, 0.05).values[:, 0]
        means = acc / n_rep
        for gi, y in enumerate(grid):
            assert means[gi] == pytest.approx(mean_local_time_bm(t, float(y)), rel=0.15)
        # and the bulk stays within 10% of the origin value
        assert means[2] == pytest.approx(math.sqrt(2 * t / math.pi), rel=0.10)


class TestOccupationFormulaConsistency:
    def test_af_equals_field_quadrature(self, ou):
        # int f(X) ds == grid integral of f(x) L^x / sigma^2(x) over the support
        cfg = dl.PathConfig(0.0, 50.0, 1e-3, (50.0,), seed=71)
        path = dl.simulate_path(ou, cfg)
        eps = dl.default_epsilon(path.dt)
        lo, hi, n = -0.75, 0.75, 151
        grid = np.linspace(lo, hi, n)
        f = lambda x: ((x >= lo) & (x <= hi)).astype(float) * np.cos(x)
        af = dl.additive_functional(path, f).values[0]
        field = dl.local_time_field(path, grid, eps)
        integrand = np.cos(grid) * field.values[:, 0] / np.asarray(ou.sigma2(grid))
        quadrature = np.trapezoid(integrand, grid)
        tol = 3.0 * (eps + math.sqrt(path.dt)) * af
        assert abs(quadrature - af) <= tol
