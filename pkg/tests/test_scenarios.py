import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from emtpop.particles import DensityField, Rescaling, grid_centers
from emtpop.reduction import build_reduced
from emtpop.scenarios import (
    GrowthScenario,
    InitialCondition,
    PhenotypeClassifier,
    count_modes,
    field_entropy,
    initial_population,
    phenotype_fractions,
    run_population_scenario,
)

RA = build_reduced()
CLS = PhenotypeClassifier(RA)


def _field(values):
    n = values.shape[0]
    c = grid_centers(n)
    return DensityField((c, c), values, 0.01)


class TestGrowthScenario:
    def test_rates(self):
        assert GrowthScenario("r1").rates() == {"E": 0.0182, "H": 0.0182, "M": 0.0182}
        assert GrowthScenario("r2").rates()["M"] == 0.0091
        assert GrowthScenario("r3").rates() == {"E": 0.0182, "H": 0.0091, "M": 0.0091}

    def test_errors(self):
        with pytest.raises(ValueError):
            GrowthScenario("r4")
        with pytest.raises(ValueError):
            GrowthScenario("r1", r_epi=0.0)


class TestClassifier:
    def test_stable_roots_land_in_their_classes(self):
        s = 200_000.0
        m, h, e = RA.stable_roots(np.array(s))
        assert list(CLS.classify([m, h, e], [s] * 3)) == [2, 1, 0]

    def test_separators_are_held_outside_their_range(self):
        lo, hi = RA.intervals.branch_domain("u1")
        assert CLS.separators(150_000.0)[0] == CLS.separators(lo)[0]
        assert CLS.separators(250_000.0)[0] == CLS.separators(hi)[0]

    def test_monostable_extremes(self):
        assert CLS.classify(float(RA.polys["ep"](160_000.0)), 160_000.0) == 0
        assert CLS.classify(float(RA.polys["mes"](240_000.0)), 240_000.0) == 2


class TestFractions:
    def test_single_cell(self):
        v = np.zeros((20, 20))
        v[19, 10] = 5.0  # x near 24K
        assert phenotype_fractions(_field(v), CLS) == (1.0, 0.0, 0.0)

    def test_uniform_field_against_fine_sampling(self):
        n = 20
        got = phenotype_fractions(_field(np.ones((n, n))), CLS)
        r = Rescaling()
        x = np.linspace(0, 25_000, 20_001)[:-1] + 25_000 / 40_000
        s = r.from_unit(0.0, grid_centers(n))[1]
        X, S = np.meshgrid(x, s, indexing="ij")
        k = CLS.classify(X, S)
        ref = [np.mean(k == i) for i in range(3)]
        assert np.allclose(got, ref, atol=1e-4)

    def test_empty_and_one_dimensional_rejected(self):
        with pytest.raises(ValueError):
            phenotype_fractions(_field(np.zeros((4, 4))), CLS)
        d1 = DensityField((grid_centers(4),), np.ones(4), 0.01)
        with pytest.raises(ValueError):
            phenotype_fractions(d1, CLS)

    @given(v=arrays(float, (10, 10), elements=st.floats(0, 1e3)))
    @settings(max_examples=50)
    def test_fractions_partition_the_population(self, v):
        if v.sum() <= 0:
            return
        f = phenotype_fractions(_field(v), CLS)
        assert all(-1e-12 <= x <= 1 + 1e-12 for x in f)
        assert sum(f) == pytest.approx(1.0)


class TestEntropyAndModes:
    def test_uniform_field_entropy(self):
        d = _field(np.full((20, 20), 3.0))
        assert field_entropy(d) == pytest.approx(math.log(25_000))
        assert field_entropy(d, joint=True) == pytest.approx(math.log(25_000 * 100_000))

    def test_count_modes(self):
        x = np.linspace(0, 1, 50)
        bump = lambda c, a=1.0: a * np.exp(-0.5 * ((x - c) / 0.05) ** 2)
        assert count_modes(bump(0.5)) == 1
        assert count_modes(bump(0.2) + bump(0.8)) == 2
        assert count_modes(bump(0.1) + bump(0.5) + bump(0.9, 0.05)) == 3
        assert count_modes(bump(0.5) + bump(0.9, 0.005)) == 1
        assert count_modes(np.zeros(10)) == 0
        assert count_modes(np.linspace(0, 1, 10)) == 1  # a maximum in the last cell counts


class TestInitialPopulation:
    @pytest.mark.parametrize("kind", InitialCondition.KINDS)
    def test_total_is_one_hundred(self, kind):
        e = initial_population(InitialCondition(kind), 200_000.0, RA)
        assert e.rho == pytest.approx(100.0)
        assert np.all(e.masses >= 0)

    def test_pure_starts_are_pure(self):
        for kind, idx in (("epi", 0), ("hyb", 1), ("mes", 2)):
            e = initial_population(InitialCondition(kind), 200_000.0, RA)
            d = _field(e.masses.reshape(20, 20) * 400)
            assert phenotype_fractions(d, CLS)[idx] > 0.97

    def test_snail_band(self):
        e = initial_population(InitialCondition("hyb"), 200_000.0, RA)
        s = Rescaling().from_unit(0.0, e.positions[:, 1])[1]
        held = e.masses > 0
        assert s[held].min() >= 195_000.0 - 2500 and s[held].max() <= 205_000.0 + 2500

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            InitialCondition("both")


class TestPopulationRun:
    def test_growth_over_two_days(self):
        run = run_population_scenario(InitialCondition("epi"), GrowthScenario("r1"), horizon=48.0)
        assert list(run.times) == [0.0, 24.0, 48.0]
        expected = 100.0 * math.exp(0.0182 * 48)
        # the only losses are kernel tails at each smoothing
        assert expected * 0.95 < run.rho[-1] <= expected * 1.0001
        assert run.fractions[-1][0] > 0.95
        s = run.summary()
        assert set(s) == {"final_rho", "final_fE", "final_fH", "final_fM", "final_entropy",
                          "final_modes"}

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            run_population_scenario(InitialCondition(), GrowthScenario(), s0=100_000.0)
        with pytest.raises(ValueError):
            run_population_scenario(InitialCondition(), GrowthScenario(), horizon=0.0)
