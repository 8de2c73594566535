import numpy as np
import pytest

from c2st import (
    Rng,
    TrialGrid,
    run_experiment,
    run_gauss_student,
    run_named_test,
    run_sinusoid_independence,
    run_type1,
    sample_sinusoid,
)
from c2st.experiments import DEFAULT_N_GRID, MULTID_TESTS, TEST_NAMES, permuted_copy


FAST_TESTS = ("c2st-knn", "ks", "wmw")


class TestGridValidation:
    def test_defaults_mirror_reference_setup(self):
        grid = TrialGrid("type1")
        assert grid.n_values == (25, 50, 100, 500, 1000, 5000, 10000)
        assert grid.trials == 100
        assert grid.alpha == 0.05
        assert grid.nu_values == (3.0,)
        assert grid.delta_values == (1.0,)
        assert grid.gamma_values == (0.25,)

    def test_unknown_experiment(self):
        with pytest.raises(ValueError):
            TrialGrid("frequencies")

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            TrialGrid("type1", trials=0)
        with pytest.raises(ValueError):
            TrialGrid("gauss-student", nu_values=(0.0,))
        with pytest.raises(ValueError):
            TrialGrid("sinusoid", gamma_values=(-1.0,))
        with pytest.raises(ValueError):
            TrialGrid("type1", n_values=())

    def test_one_dimensional_test_rejected_for_sinusoid(self):
        with pytest.raises(ValueError, match="not applicable"):
            TrialGrid("sinusoid", tests=("ks",))


class TestType1:
    def test_rates_bounded_and_counts_consistent(self):
        grid = TrialGrid("type1", n_values=(100,), trials=20, base_seed=7,
                         tests=FAST_TESTS)
        table = run_type1(grid)
        assert len(table.cells) == len(FAST_TESTS)
        for c in table.cells:
            assert 0 <= c.rejections <= c.trials == 20
            assert 0.0 <= c.error_rate <= 1.0
            assert c.error_kind == "type1"

    def test_alpha_zero_never_rejects(self):
        grid = TrialGrid("type1", n_values=(50,), trials=10, base_seed=3,
                         tests=FAST_TESTS, alpha=0.0)
        table = run_type1(grid)
        assert all(c.rejections == 0 for c in table.cells)

    def test_single_trial_rates_are_binary(self):
        grid = TrialGrid("type1", n_values=(50,), trials=1, base_seed=5,
                         tests=FAST_TESTS)
        table = run_type1(grid)
        assert all(c.error_rate in (0.0, 1.0) for c in table.cells)

    def test_rerun_is_byte_identical(self):
        grid = TrialGrid("type1", n_values=(60, 80), trials=5, base_seed=11,
                         tests=FAST_TESTS)
        assert run_type1(grid).to_text() == run_type1(grid).to_text()

    def test_cells_depend_only_on_seed_and_coordinates(self):
        # The same (n) cell recomputed from a grid with different companions
        # is bit-identical: cell streams are keyed by parameter values.
        full = run_type1(TrialGrid("type1", n_values=(60, 80), trials=5,
                                   base_seed=11, tests=FAST_TESTS))
        only = run_type1(TrialGrid("type1", n_values=(80,), trials=5,
                                   base_seed=11, tests=FAST_TESTS))
        assert full.rates("ks")[(80,)] == only.rates("ks")[(80,)]
        assert full.rates("c2st-knn")[(80,)] == only.rates("c2st-knn")[(80,)]

    def test_trial_data_differ_across_trials(self):
        # Distinct per-trial child seeds: no two trials share a sample.
        grid = TrialGrid("type1", n_values=(40,), trials=6, base_seed=2,
                         tests=("ks",))
        root = Rng(grid.base_seed)
        from c2st.experiments import _cell_key
        key = _cell_key({"n": 40})
        draws = [root.child(*key, t, 0).gen.standard_normal(5).tobytes()
                 for t in range(6)]
        assert len(set(draws)) == 6


class TestGaussStudent:
    def test_reports_type2_and_detects_at_moderate_size(self):
        grid = TrialGrid("gauss-student", n_values=(500,), nu_values=(3.0,),
                         trials=10, base_seed=13, tests=("c2st-knn", "wmw"))
        table = run_gauss_student(grid)
        rates = table.rates("wmw")
        # rank means coincide: the rank test stays near-blind
        assert rates[(500, 3.0)] >= 0.8
        for c in table.cells:
            assert c.error_kind == "type2"

    def test_huge_nu_blinds_every_test(self):
        grid = TrialGrid("gauss-student", n_values=(200,), nu_values=(1e6,),
                         trials=10, base_seed=17, tests=FAST_TESTS)
        table = run_gauss_student(grid)
        assert all(c.error_rate >= 0.9 for c in table.cells)


class TestSinusoid:
    def test_permuted_copy_shape_and_marginals(self):
        pairs = sample_sinusoid(Rng(3), 100, 1.0, 0.25)
        copy = permuted_copy(Rng(4), pairs)
        assert copy.shape == (100, 2)
        assert np.array_equal(copy[:, 0], pairs[:, 0])
        assert np.array_equal(np.sort(copy[:, 1]), np.sort(pairs[:, 1]))

    def test_only_multid_tests_run(self):
        grid = TrialGrid("sinusoid", n_values=(200,), trials=3, base_seed=19,
                         tests=MULTID_TESTS)
        table = run_sinusoid_independence(grid)
        assert sorted({c.test for c in table.cells}) == sorted(MULTID_TESTS)

    def test_strong_noise_drowns_dependence(self):
        grid = TrialGrid("sinusoid", n_values=(500,), gamma_values=(10.0,),
                         trials=20, base_seed=23, tests=("c2st-knn", "mmd"))
        table = run_sinusoid_independence(grid)
        assert all(c.error_rate >= 0.8 for c in table.cells)

    def test_identity_permutation_reduces_to_null(self):
        # Forcing sigma = identity makes the two samples equal, so acceptance
        # should sit near 1 - alpha.
        pairs = sample_sinusoid(Rng(29), 500, 1.0, 0.25)
        accept = sum(
            not run_named_test("c2st-knn", Rng(31).child(t), pairs, pairs, 0.05).reject
            for t in range(30))
        assert accept >= 25


class TestTableSerialization:
    def test_text_and_records_consistent(self):
        grid = TrialGrid("type1", n_values=(50,), trials=4, base_seed=37,
                         tests=("ks", "wmw"))
        table = run_type1(grid)
        text = table.to_text()
        assert text.endswith("\n")
        header = text.splitlines()[1].split("\t")
        assert header == ["test", "n", "trials", "rejections", "error_kind",
                          "error_rate"]
        records = table.to_records()
        assert records["experiment"] == "type1"
        assert len(records["cells"]) == 2
        for cell in records["cells"]:
            assert set(cell) == {"test", "params", "trials", "rejections",
                                 "error_kind", "error_rate"}

    def test_run_experiment_dispatch(self):
        grid = TrialGrid("sinusoid", n_values=(120,), trials=2, base_seed=41,
                         tests=("c2st-knn",))
        table = run_experiment(grid)
        assert table.experiment == "sinusoid"
        assert table.param_names == ("delta", "gamma", "n")


class TestDispatcher:
    def test_all_names_runnable_1d(self):
        r = Rng(43)
        x = r.gen.normal(0, 1, (60, 1))
        y = r.gen.normal(0, 1, (60, 1))
        for name in TEST_NAMES:
            out = run_named_test(name, Rng(44), x, y, 0.05)
            assert out.test == name
            assert 0.0 <= out.pvalue <= 1.0

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown test"):
            run_named_test("t-test", Rng(0), np.zeros((10, 1)), np.zeros((10, 1)), 0.05)

    def test_default_grid_constant(self):
        assert DEFAULT_N_GRID == (25, 50, 100, 500, 1000, 5000, 10000)
