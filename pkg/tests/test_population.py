"""Population container, CSV ingestion, synthetic generator."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from plpmlg.exceptions import IngestionError, InvalidParameterError
from plpmlg.population import (
    CSVSchema,
    Population,
    generate_synthetic_population,
    ingest_population_csv,
    write_population_csv,
)


class TestPopulation:
    def test_area_labels_and_codes(self, tiny_population):
        pop = tiny_population
        assert pop.n_units == 8
        assert pop.n_areas == 3
        assert np.array_equal(pop.area_labels, [0, 1, 2])
        assert np.array_equal(pop.area_id, pop.area_labels[pop.area_codes])

    def test_duplicate_unit_ids_rejected(self):
        with pytest.raises(InvalidParameterError):
            Population(unit_id=np.array([1, 1]), area_id=np.array([0, 1]),
                       z=np.array([0, 1]), size_measure=np.ones(2))

    def test_negative_counts_rejected(self):
        with pytest.raises(InvalidParameterError):
            Population(unit_id=np.array([1, 2]), area_id=np.array([0, 1]),
                       z=np.array([0, -1]), size_measure=np.ones(2))

    def test_nonpositive_size_rejected(self):
        with pytest.raises(InvalidParameterError):
            Population(unit_id=np.array([1, 2]), area_id=np.array([0, 1]),
                       z=np.array([0, 1]), size_measure=np.array([1.0, 0.0]))

    def test_float_counts_must_be_integral(self):
        with pytest.raises(InvalidParameterError):
            Population(unit_id=np.array([1, 2]), area_id=np.array([0, 1]),
                       z=np.array([0.0, 1.5]), size_measure=np.ones(2))

    def test_covariate_length_checked(self):
        with pytest.raises(InvalidParameterError):
            Population(unit_id=np.array([1, 2]), area_id=np.array([0, 1]),
                       z=np.array([0, 1]), size_measure=np.ones(2),
                       covariates={"x": np.zeros(3)})

    def test_unit_record(self, tiny_population):
        u = tiny_population.unit(1)
        assert u.unit_id == 1 and u.z == 3 and u.area_id == 0
        assert u.covariates["x"] == pytest.approx(-0.2)


class TestDesignMatrix:
    def test_numeric_covariate(self, tiny_population):
        X = tiny_population.design_matrix()
        assert X.shape == (8, 2)
        assert np.array_equal(X[:, 0], np.ones(8))
        assert np.array_equal(X[:, 1], tiny_population.covariates["x"])
        assert tiny_population.design_columns() == ["intercept", "x"]

    def test_categorical_levels_from_full_population(self):
        pop = Population(
            unit_id=np.arange(6),
            area_id=np.zeros(6, dtype=np.int64),
            z=np.arange(6),
            size_measure=np.ones(6),
            covariates={"g": np.array(["a", "b", "c", "a", "b", "c"])},
            categorical=("g",),
        )
        # the subset holds only level "c", yet both dummy columns survive
        X = pop.design_matrix(np.array([2, 5]))
        assert X.shape == (2, 3)
        assert np.array_equal(X[:, 1], [0.0, 0.0])  # g=b
        assert np.array_equal(X[:, 2], [1.0, 1.0])  # g=c
        assert pop.design_columns() == ["intercept", "g=b", "g=c"]

    @given(n=st.integers(2, 30), levels=st.integers(2, 4),
           seed=st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_columns_match_names(self, n, levels, seed):
        rng = np.random.default_rng(seed)
        pop = Population(
            unit_id=np.arange(n),
            area_id=rng.integers(0, 3, n),
            z=rng.poisson(2.0, n),
            size_measure=rng.uniform(0.5, 2.0, n),
            covariates={"g": rng.integers(0, levels, n),
                        "x": rng.normal(size=n)},
            categorical=("g",),
        )
        assert pop.design_matrix().shape == (n, len(pop.design_columns()))


class TestCSVRoundTrip:
    def test_round_trip(self, tiny_population, tmp_path):
        path = tmp_path / "pop.csv"
        schema = CSVSchema(covariates=("x",))
        write_population_csv(tiny_population, path, schema)
        back = ingest_population_csv(path, schema)
        assert np.array_equal(back.unit_id, tiny_population.unit_id)
        assert np.array_equal(back.area_id, tiny_population.area_id)
        assert np.array_equal(back.z, tiny_population.z)
        assert np.array_equal(back.size_measure, tiny_population.size_measure)
        assert np.allclose(back.covariates["x"],
                           tiny_population.covariates["x"])

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("unit_id,area_id\n1,0\n")
        with pytest.raises(IngestionError, match="missing columns"):
            ingest_population_csv(path)

    def test_bad_integer_reports_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("unit_id,area_id,z\n1,0,2\n2,0,x\n")
        with pytest.raises(IngestionError, match="row 3"):
            ingest_population_csv(path)

    def test_negative_count_reports_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("unit_id,area_id,z\n1,0,-4\n")
        with pytest.raises(IngestionError, match="row 2"):
            ingest_population_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(IngestionError, match="header"):
            ingest_population_csv(path)

    def test_missing_size_column_defaults_to_ones(self, tmp_path):
        path = tmp_path / "nosize.csv"
        path.write_text("unit_id,area_id,z\n1,0,2\n2,1,0\n")
        pop = ingest_population_csv(path)
        assert np.array_equal(pop.size_measure, [1.0, 1.0])


class TestSyntheticGenerator:
    def test_shapes_and_reproducibility(self):
        pop = generate_synthetic_population(
            300, 6, [1.0, 0.2], 0.3, 0.1, 2.0, np.random.default_rng(10))
        again = generate_synthetic_population(
            300, 6, [1.0, 0.2], 0.3, 0.1, 2.0, np.random.default_rng(10))
        assert pop.n_units == 300 and pop.n_areas == 6
        assert np.array_equal(pop.z, again.z)
        assert np.array_equal(pop.size_measure, again.size_measure)

    def test_beta_length_sets_category_count(self):
        pop = generate_synthetic_population(
            500, 5, [1.0, 0.1, -0.1, 0.2], 0.2, 0.1, 1.0,
            np.random.default_rng(1))
        assert np.unique(pop.covariates["group"]).size == 4
        assert pop.design_matrix().shape[1] == 4

    def test_intercept_only_has_no_covariates(self):
        pop = generate_synthetic_population(
            100, 4, [1.2], 0.2, 0.1, 1.0, np.random.default_rng(2))
        assert pop.covariates == {}
        assert pop.design_matrix().shape == (100, 1)

    def test_informativeness_zero_breaks_size_response_link(self):
        pop = generate_synthetic_population(
            4000, 10, [1.5], 0.3, 0.2, 0.0, np.random.default_rng(3))
        rho = stats.spearmanr(pop.size_measure, pop.z).statistic
        assert abs(rho) < 0.05

    def test_informativeness_one_gives_rank_correlation(self):
        # the generator contract: informativeness 1 already ties size to
        # the response at rank correlation above 0.2
        pop = generate_synthetic_population(
            4000, 10, [1.5], 0.3, 0.2, 1.0, np.random.default_rng(4))
        rho = stats.spearmanr(pop.size_measure, pop.z).statistic
        assert rho > 0.2

    def test_validation(self):
        rng = np.random.default_rng(0)
        with pytest.raises(InvalidParameterError):
            generate_synthetic_population(3, 5, [1.0], 0.1, 0.1, 1.0, rng)
        with pytest.raises(InvalidParameterError):
            generate_synthetic_population(10, 2, [1.0], -0.1, 0.1, 1.0, rng)
