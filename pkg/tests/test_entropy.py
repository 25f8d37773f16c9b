import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from emtpop.entropy import (
    INITIAL_KINDS,
    EntropyGrowthModel,
    entropy,
    entropy_in_molecules,
    growth_response,
    initial_ensemble,
    initial_support,
    run_entropy_model,
)
from emtpop.particles import ParticleEnsemble, grid_centers
from emtpop.reduction import X_MAX, build_reduced


def _ensemble(masses):
    n = len(masses)
    return ParticleEnsemble(grid_centers(n)[:, None], np.full(n, 1.0 / n), np.asarray(masses, float))


class TestEntropy:
    def test_uniform_is_zero_on_the_unit_interval(self):
        e = _ensemble(np.full(50, 2.0))
        assert entropy(e) == pytest.approx(0.0, abs=1e-14)
        assert entropy_in_molecules(e) == pytest.approx(math.log(X_MAX))

    def test_single_occupied_cell(self):
        m = np.zeros(50)
        m[17] = 3.0
        assert entropy(_ensemble(m)) == pytest.approx(-math.log(50))

    def test_two_equal_cells(self):
        m = np.zeros(40)
        m[[3, 30]] = 1.0
        assert entropy(_ensemble(m)) == pytest.approx(math.log(2) - math.log(40))

    def test_empty_population_rejected(self):
        with pytest.raises(ValueError):
            entropy(_ensemble(np.zeros(5)))

    @given(m=arrays(float, 30, elements=st.floats(0, 100)), c=st.floats(1e-3, 1e3))
    def test_scale_invariant_and_bounded(self, m, c):
        if m.sum() <= 0:
            return
        a = entropy(_ensemble(m))
        assert entropy(_ensemble(c * m)) == pytest.approx(a, rel=1e-9, abs=1e-9)
        assert -math.log(30) - 1e-9 <= a <= 1e-9


class TestResponse:
    def test_hill_examples(self):
        assert growth_response(0.0) == pytest.approx(0.0182)
        assert growth_response(9.0) == pytest.approx(1.5 * 0.0182)
        assert growth_response(1e3) == pytest.approx(2 * 0.0182, rel=1e-9)

    def test_linear_examples(self):
        assert growth_response(8.0, "linear") == pytest.approx(0.0182)
        assert growth_response(9.0, "linear") == pytest.approx(0.0282)

    def test_errors(self):
        with pytest.raises(ValueError):
            growth_response(-1.0)
        with pytest.raises(ValueError):
            growth_response(1.0, "cubic")
        with pytest.raises(ValueError):
            EntropyGrowthModel(response="cubic")
        with pytest.raises(ValueError):
            EntropyGrowthModel(eta_x=0.0)

    @given(a=st.floats(0, 30), b=st.floats(0, 30))
    def test_hill_is_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert growth_response(lo) <= growth_response(hi) + 1e-15


class TestInitial:
    @pytest.mark.parametrize("kind", INITIAL_KINDS)
    def test_total_mass(self, kind):
        e = initial_ensemble(kind)
        assert e.rho == pytest.approx(100.0)
        assert e.positions.shape == (50, 1)

    def test_supports_centre_on_stable_roots(self):
        roots = build_reduced().stable_roots(np.array(200_000.0))
        (a, b), = initial_support("hyb")
        assert 0.5 * (a + b) == pytest.approx(roots[1])
        assert b - a == pytest.approx(4000.0)
        assert len(initial_support("ep_mes")) == 2
        assert initial_support("unif") == [(0.0, X_MAX)]

    def test_uniform_initial_mass(self):
        assert np.allclose(initial_ensemble("unif").masses, 2.0)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            initial_support("zz")
        with pytest.raises(ValueError):
            initial_support("ep", snail=160_000.0)


class TestRun:
    def test_short_run(self):
        run = run_entropy_model("ep_mes", checkpoints=[24.0, 48.0])
        assert list(run.times) == [0.0, 24.0, 48.0]
        assert np.all(np.isfinite(run.entropy))
        assert run.rho[-1] > run.rho[0]
        assert len(run.fields) == 2

    def test_saturates_at_capacity(self):
        m = EntropyGrowthModel(death_ratio=500.0)
        run = run_entropy_model("unif", m, checkpoints=np.arange(48.0, 1201.0, 48.0),
                                n=20)
        # kernel tails leave the box at every smoothing, so the plateau sits slightly low
        assert run.rho[-1] == pytest.approx(500.0, rel=0.05)
        assert np.all(np.diff(run.rho[-5:]) < 0.01 * 500.0)

    def test_higher_initial_entropy_grows_faster_under_linear_response(self):
        m = EntropyGrowthModel(response="linear")
        narrow = run_entropy_model("hyb", m, checkpoints=[24.0, 48.0])
        wide = run_entropy_model("unif", m, checkpoints=[24.0, 48.0])
        assert narrow.rho[0] == pytest.approx(wide.rho[0])
        assert wide.entropy[0] > narrow.entropy[0]
        assert np.all(wide.rho[1:] > narrow.rho[1:])

    def test_bad_checkpoints(self):
        with pytest.raises(ValueError):
            run_entropy_model("ep", checkpoints=[24.0, 24.0])

    def test_csv(self, tmp_path):
        run = run_entropy_model("hyb", checkpoints=[24.0])
        run.to_csv(tmp_path / "e.csv")
        lines = (tmp_path / "e.csv").read_text().splitlines()
        assert lines[0] == "t_hours,entropy,rho,response_kind,theta"
        assert lines[1].endswith(",hill,9.0")
        assert len(lines) == 3
