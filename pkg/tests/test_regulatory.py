import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from emtpop.regulatory import (
    SCHEDULES,
    EmtCoreParams,
    EpigeneticParams,
    HillParams,
    SnailDynamics,
    TranslationTables,
    emt_core_rhs,
    epigenetic_rhs,
    hysteresis_step_advection,
    shifted_hill,
    snail_exact,
    snail_rhs,
    snail_schedule,
    translation_functions,
    with_alpha_epi,
)


def test_default_tables_match_published_values():
    p = EmtCoreParams()
    assert (p.g_mu200, p.g_z, p.g_mz) == (2100.0, 100.0, 11.0)
    assert (p.k_mu200, p.k_z, p.k_mz) == (0.05, 0.1, 0.5)
    assert (p.h_z_mu200.lam, p.h_z_mu200.x0, p.h_z_mu200.n) == (0.1, 220_000.0, 3)
    assert (p.h_s_mu200.lam, p.h_s_mu200.x0, p.h_s_mu200.n) == (0.1, 180_000.0, 2)
    assert (p.h_z_mz.lam, p.h_z_mz.x0, p.h_z_mz.n) == (7.5, 25_000.0, 2)
    assert (p.h_s_mz.lam, p.h_s_mz.x0, p.h_s_mz.n) == (10.0, 180_000.0, 2)
    t = p.tables
    assert t.l == (1.0, 0.6, 0.3, 0.1, 0.05, 0.05, 0.05)
    assert t.gamma_m == (0.04, 0.2, 1.0, 1.0, 1.0, 1.0)
    assert t.gamma_mu == (0.005, 0.05, 0.5, 0.5, 0.5, 0.5)
    assert (t.mu0, t.n) == (10_000.0, 6)
    e = EpigeneticParams()
    assert (e.alpha_epi, e.beta_up, e.beta_down, e.z0_baseline) == (0.15, 240.0, 720.0, 220_000.0)


def test_parameter_records_reject_invalid_values():
    with pytest.raises(ValueError):
        HillParams(lam=0.1, x0=0.0, n=2)
    with pytest.raises(ValueError):
        HillParams(lam=0.1, x0=1.0, n=0)
    with pytest.raises(ValueError):
        HillParams(lam=-1.0, x0=1.0, n=2)
    with pytest.raises(ValueError):
        EpigeneticParams(alpha_epi=1.0)
    with pytest.raises(ValueError):
        EpigeneticParams(beta_up=0.0)
    with pytest.raises(ValueError):
        SnailDynamics(s0=300_000.0)


class TestShiftedHill:
    def test_zero_input(self):
        assert shifted_hill(0.0, HillParams(0.3, 5.0, 4)) == 1.0

    def test_at_threshold(self):
        assert shifted_hill(10.0, HillParams(0.1, 10.0, 3)) == pytest.approx(0.55)

    def test_large_input_tends_to_lambda(self):
        p = HillParams(7.5, 25_000.0, 2)
        assert abs(shifted_hill(100 * p.x0, p) - p.lam) < 1e-3 * p.lam
        p = HillParams(0.1, 220_000.0, 3)
        assert abs(shifted_hill(100 * p.x0, p) - p.lam) < 1e-6

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            shifted_hill(-1.0, HillParams(0.1, 1.0, 2))

    @given(x=st.floats(1e-3, 1e7), lam=st.floats(0.0, 20.0), n=st.integers(1, 6),
           x0=st.floats(1.0, 1e6))
    def test_bounded_by_one_and_lambda(self, x, lam, n, x0):
        h = float(shifted_hill(x, HillParams(lam, x0, n)))
        assert min(1.0, lam) - 1e-12 <= h <= max(1.0, lam) + 1e-12


class TestTranslation:
    def test_values_at_zero(self):
        L, y_mu, y_m = translation_functions(0.0, TranslationTables())
        assert L == pytest.approx(1.0)
        assert y_mu == 0.0 and y_m == 0.0

    def test_l_at_mu0_by_direct_summation(self):
        t = TranslationTables()
        expected = sum(l * math.comb(6, i) for i, l in enumerate(t.l)) / 2**6
        L, _, _ = translation_functions(t.mu0, t)
        assert L == pytest.approx(expected, rel=1e-14)

    def test_y_functions_by_direct_summation(self):
        t = TranslationTables()
        mu = 23_456.0
        q = mu / t.mu0
        m = [math.comb(6, i) * q**i / (1 + q) ** 6 for i in range(7)]
        y_mu = sum(i * t.gamma_mu[i - 1] * m[i] for i in range(1, 7))
        y_m = sum(t.gamma_m[i - 1] * m[i] for i in range(1, 7))
        L, ymu, ym, P, Q = translation_functions(mu, t, k_mz=0.5)
        assert ymu == pytest.approx(y_mu, rel=1e-13)
        assert ym == pytest.approx(y_m, rel=1e-13)
        assert P == pytest.approx(L / (y_m + 0.5), rel=1e-13)
        assert Q == pytest.approx(y_mu / (y_m + 0.5), rel=1e-13)


class TestCoreField:
    def test_origin_has_only_production(self):
        p = EmtCoreParams()
        s = 180_000.0
        dmu, dz = emt_core_rhs(0.0, 0.0, s, p)
        # H(0) = 1 and P(0) = l0 / k_mz
        expected = p.g_z * p.g_mz * shifted_hill(s, p.h_s_mz) * 1.0 / p.k_mz
        assert dz == pytest.approx(expected)
        assert dz > 0

    def test_negative_state_rejected(self):
        with pytest.raises(ValueError):
            emt_core_rhs(-1.0, 0.0, 100.0)

    def test_long_integration_settles_on_a_root(self):
        # independent oracle: scipy's LSODA driven to steady state at S = 160K
        sol = solve_ivp(lambda t, y: emt_core_rhs(*np.maximum(y, 0), 160_000.0), (0, 5000),
                        [20_000.0, 5000.0], method="LSODA", rtol=1e-10, atol=1e-6)
        mu, z = sol.y[:, -1]
        dmu, dz = emt_core_rhs(mu, z, 160_000.0)
        assert abs(dmu) < 1e-3 and abs(dz) < 1e-3
        assert mu > 15_000  # epithelial


class TestEpigenetic:
    def test_threshold_at_rest(self):
        _, _, dz0 = epigenetic_rhs(1000.0, 0.0, 220_000.0, 150_000.0)
        assert dz0 == 0.0

    def test_threshold_rate_example(self):
        _, _, dz0 = epigenetic_rhs(1000.0, 100_000.0, 220_000.0, 150_000.0, snail_increasing=True)
        assert dz0 == pytest.approx(-62.5)
        _, _, dz0 = epigenetic_rhs(1000.0, 100_000.0, 220_000.0, 150_000.0, snail_increasing=False)
        assert dz0 == pytest.approx(-62.5 * 240 / 720)

    def test_reduces_to_core_model_at_baseline_threshold(self):
        mu, z, s = 12_000.0, 150_000.0, 190_000.0
        dmu, dz, _ = epigenetic_rhs(mu, z, 220_000.0, s)
        cmu, cz = emt_core_rhs(mu, z, s)
        assert dmu == pytest.approx(cmu, rel=1e-14)
        assert dz == pytest.approx(cz, rel=1e-14)

    def test_uncoupled_threshold_relaxes_to_baseline(self):
        p = with_alpha_epi(EpigeneticParams(), 0.0)
        sol = solve_ivp(lambda t, y: epigenetic_rhs(*np.maximum(y, 0), 160_000.0, p), (0, 20_000),
                        [20_000.0, 5000.0, 100_000.0], method="LSODA", rtol=1e-9, atol=1e-6)
        assert sol.y[2, -1] == pytest.approx(220_000.0, rel=1e-6)


class TestSnail:
    def test_fixed_point_and_rate(self):
        d = SnailDynamics(200_000.0, 120.0)
        assert snail_rhs(200_000.0, d) == 0.0
        assert d.delta == pytest.approx(200_000 * math.log(2) / 120)
        assert d.delta == pytest.approx(1155.245, abs=1e-3)

    def test_halving_time(self):
        d = SnailDynamics(200_000.0, 120.0)
        assert snail_exact(120.0, 100_000.0, d) == pytest.approx(150_000.0)
        assert snail_exact(240.0, 100_000.0, d) == pytest.approx(175_000.0)

    @given(s_init=st.floats(0.0, 400_000.0), t=st.floats(0.0, 1000.0))
    @settings(max_examples=30, deadline=None)
    def test_closed_form_matches_scipy(self, s_init, t):
        d = SnailDynamics(180_000.0, 90.0)
        if t == 0:
            return
        sol = solve_ivp(lambda _, s: snail_rhs(np.maximum(s, 0), d), (0, t), [s_init],
                        rtol=1e-11, atol=1e-6)
        assert sol.y[0, -1] == pytest.approx(snail_exact(t, s_init, d), rel=1e-8, abs=1e-3)


class TestSchedules:
    def test_breakpoint_values(self):
        assert snail_schedule("hysteresis", 5000.0) == 240_000.0
        assert snail_schedule("hysteresis", 2500.0) == 200_000.0
        assert snail_schedule("long_induction", 2400.0) == 240_000.0
        assert snail_schedule("long_induction", 3000.0) == pytest.approx(170_000.0)
        assert snail_schedule("short_induction", 600.0) == pytest.approx(170_000.0)

    def test_slopes_and_direction(self):
        h = SCHEDULES["hysteresis"]
        assert h.slope(100.0) == pytest.approx(16.0)
        assert h.slope(5000.0) == pytest.approx(-16.0)
        long = SCHEDULES["long_induction"]
        assert bool(long.increasing(1800.0))  # plateau counts as non-decreasing
        assert not bool(long.increasing(3000.0))

    def test_outside_domain_rejected(self):
        with pytest.raises(ValueError):
            snail_schedule("hysteresis", 10_001.0)
        with pytest.raises(ValueError):
            snail_schedule("bogus", 1.0)

    def test_step_advection(self):
        assert hysteresis_step_advection(4999.0) == 40.0
        assert hysteresis_step_advection(5000.0) == -40.0


@given(mu=st.floats(0, 1e5), z=st.floats(0, 1e6), s=st.floats(0, 3e5))
def test_field_points_inward_on_the_boundary(mu, z, s):
    """Positivity: at mu = 0 or Z = 0 the corresponding rate is non-negative."""
    dmu, _ = emt_core_rhs(0.0, z, s)
    _, dz = emt_core_rhs(mu, 0.0, s)
    assert dmu >= 0 and dz >= 0


@pytest.mark.parametrize("s", [150_000.0, 200_000.0, 250_000.0])
def test_trajectories_stay_non_negative(s):
    sol = solve_ivp(lambda t, y: emt_core_rhs(*np.maximum(y, 0), s), (0, 2000), [1.0, 1.0],
                    rtol=1e-8, atol=1e-6, dense_output=True)
    assert np.all(sol.y >= -1e-6)
