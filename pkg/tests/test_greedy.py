"""Tests for greedy module."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_rom.errors import InvalidInputError
from adaptive_rom.greedy import (
    ACCEPTED,
    DIRECT,
    FLOOR,
    MAX_ITER,
    STAGNATION,
    TOL,
    ZOA,
    GreedyConfig,
    GreedyState,
    IterationRecord,
    adapt_basis_update,
    adaptive_pod_deim_twoway,
    adaptive_pod_greedy_deim,
    error_landscape,
    pod_greedy_deim_standard,
    pod_greedy_standard,
    twoway_bases,
    validate_rom,
    validation_points,
)
from adaptive_rom.interpolation import DEIM, EIM
from adaptive_rom.models import (
    ChromatographyTimeStep,
    TrainingSet,
    assemble_burgers,
    assemble_chromatography,
    assemble_synthetic_rd,
)
from adaptive_rom.reduction import ReducedBasis

TERMINATIONS = (ZOA, TOL, FLOOR, MAX_ITER, STAGNATION)


@pytest.fixture
def adaptive_cfg():
    """Adaptive settings for the toy model."""
    return GreedyConfig(tol=1e-4, max_iter=6, method=DEIM, infsup=DIRECT, seed=2, fine_margin=2)


@pytest.fixture
def adaptive_run(toy_fom, toy_training, adaptive_cfg):
    """Adaptive run on the toy model."""
    return adaptive_pod_greedy_deim(toy_fom, toy_training, adaptive_cfg)


def _fom_selected(state: GreedyState) -> set:
    return {
        mu.coords
        for mu, record in zip(state.selected, state.records, strict=False)
        if record.rb_increment >= 0
    }


class TestAdaptBasisUpdate:
    """Test the basis size adaptation rule."""

    def test_growth(self):
        """Test Δ̄ two and three decades above tolerance."""
        update = adapt_basis_update(4, 1e-2, 1e-1, 1e-4, 1e-4, rank_v=1)
        assert (update.p, update.d) == (2, 3)
        assert (update.p0, update.d0) == (0, 0)
        assert update.rb_next == 2
        assert update.ei_next == 7

    def test_trivial_increase(self):
        """Test a ratio of 5 still adds one mode."""
        update = adapt_basis_update(10, 5e-3, 1e-6, 1e-3, 1e-5, rank_v=2)
        assert update.p == 0
        assert update.p0 == 1
        assert update.rb_next == 1

    def test_one_decade_below_removes_one(self):
        """Test a ratio of 0.5 removes one column."""
        update = adapt_basis_update(10, 5e-4, 1e-6, 1e-3, 1e-5, rank_v=2)
        assert update.p == -1
        assert update.p0 == 0
        assert update.rb_next == -1

    def test_two_decades_below(self):
        """Test a ratio of 0.05 removes two columns."""
        assert adapt_basis_update(10, 5e-5, 1e-6, 1e-3, 1e-5, rank_v=2).rb_next == -2

    def test_shrink_capped(self):
        """Test deep shrinks stop at the cap."""
        assert adapt_basis_update(10, 1e-9, 1e-6, 1e-3, 1e-5, rank_v=2).rb_next == -3
        assert adapt_basis_update(10, 1e-9, 1e-6, 1e-3, 1e-5, rank_v=2, shrink_cap=1).rb_next == -1

    def test_ratio_exactly_one(self):
        """Test Δ̄ = tol leaves the RB size alone."""
        assert adapt_basis_update(10, 1e-3, 1e-5, 1e-3, 1e-5, rank_v=2).rb_next == 0

    def test_zero_estimate(self):
        """Test a vanishing estimate shrinks by the cap."""
        update = adapt_basis_update(10, 0.0, 0.0, 1e-3, 1e-5, rank_v=2)
        assert update.rb_next == -3
        assert update.ei_next == 7

    def test_non_finite_estimate(self):
        """Test an infinite estimate grows by three decades."""
        update = adapt_basis_update(10, math.inf, 1e-5, 1e-3, 1e-5, rank_v=2)
        assert update.p == 3
        assert update.rb_next == 3

    def test_stability_raise(self):
        """Test ℓ_EI is raised above rank(V) + ℓ_RB_next."""
        update = adapt_basis_update(3, 1e-1, 1e-6, 1e-3, 1e-5, rank_v=5)
        assert update.rb_next == 2
        assert update.ei_next == 8
        assert update.ei_next > 5 + max(update.rb_next, 0)

    @given(
        n_ei=st.integers(min_value=1, max_value=200),
        rank_v=st.integers(min_value=1, max_value=100),
        log_rb=st.floats(min_value=-20, max_value=20),
        log_ei=st.floats(min_value=-20, max_value=20),
    )
    def test_bounds_hold_for_any_ratio(self, n_ei, rank_v, log_rb, log_ei):
        """Test the shrink cap and the stability raise for arbitrary estimates."""
        update = adapt_basis_update(n_ei, 1e-3 * 10**log_rb, 1e-5 * 10**log_ei, 1e-3, 1e-5, rank_v)
        assert update.rb_next >= -3
        assert update.ei_next >= n_ei - 3
        assert update.ei_next > rank_v + max(update.rb_next, 0)

    def test_tolerances_positive(self):
        """Test non-positive tolerances are rejected."""
        with pytest.raises(InvalidInputError):
            adapt_basis_update(3, 1.0, 1.0, 0.0, 1e-5, rank_v=1)


class TestGreedyConfig:
    """Test GreedyConfig class."""

    def test_defaults(self):
        """Test derived tolerances."""
        cfg = GreedyConfig(tol=1e-3)
        assert cfg.ei_tolerance == pytest.approx(1e-5)
        assert cfg.eps_star == pytest.approx(1e-4)
        assert cfg.validate() == []

    def test_explicit_tolerances(self):
        """Test tol_ei and zoa_lower override the defaults."""
        cfg = GreedyConfig(tol=1e-3, tol_ei=1e-4, zoa_lower=5e-4)
        assert cfg.ei_tolerance == 1e-4
        assert cfg.eps_star == 5e-4

    def test_validate_names_fields(self):
        """Test every diagnostic names its field."""
        cfg = GreedyConfig(tol=1e-3, max_iter=0, method="QDEIM", initial_rb=2, initial_ei=2)
        errors = cfg.validate()
        assert any(e.startswith("greedy.max_iter") for e in errors)
        assert any(e.startswith("greedy.method") for e in errors)
        assert any(e.startswith("greedy.initial_ei") for e in errors)

    def test_zoa_lower_above_tol(self):
        """Test the acceptance band must be non-empty."""
        errors = GreedyConfig(tol=1e-3, zoa_lower=1e-2).validate()
        assert errors == ["greedy.zoa_lower: must lie in (0, tol), got 0.01"]

    def test_from_dict_unknown_key(self):
        """Test unknown settings are rejected."""
        with pytest.raises(InvalidInputError, match="tolerance"):
            GreedyConfig.from_dict({"tolerance": 1e-3})

    def test_dict_roundtrip(self):
        """Test to_dict and from_dict agree."""
        cfg = GreedyConfig(tol=1e-2, method=DEIM, seed=4)
        assert GreedyConfig.from_dict(cfg.to_dict()) == cfg


class TestIterationRecord:
    """Test IterationRecord class."""

    def test_to_row_formats_mu(self):
        """Test the parameter is written as a space separated string."""
        record = IterationRecord(
            iteration=1,
            mu=(0.5, 2.0),
            n_rb=1,
            n_ei=2,
            rb_increment=1,
            est_rb=1.0,
            est_ei=0.5,
            est_total=1.5,
            est_max=2.0,
            true_error=None,
            rho_bar=1.0,
            eff_original=None,
            eff_modified=None,
            wall_time=0.1,
        )
        row = record.to_row()
        assert row["mu"] == "0.5 2"
        assert row["n_ei"] == 2

    def test_to_row_non_parametric(self):
        """Test a missing parameter becomes an empty string."""
        record = IterationRecord(1, None, 1, 2, 0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, None, None, 0.0)
        assert record.to_row()["mu"] == ""


class TestStandardGreedy:
    """Test pod_greedy_standard and pod_greedy_deim_standard."""

    def test_one_mode_per_iteration(self, toy_fom, toy_training):
        """Test each iteration appends exactly one mode."""
        cfg = GreedyConfig(tol=1e-6, max_iter=5, infsup=DIRECT, seed=1)
        state = pod_greedy_standard(toy_fom, toy_training, cfg)
        assert state.termination in TERMINATIONS
        assert state.n_rb == state.iterations
        assert state.n_ei == 0
        assert state.fom_solves == len({mu.coords for mu in state.selected})

    def test_singleton_loose_tolerance(self, toy_fom):
        """Test one iteration suffices on a single parameter with a loose tolerance."""
        training = TrainingSet.explicit(toy_fom.domain, [[1.0]])
        state = pod_greedy_standard(toy_fom, training, GreedyConfig(tol=1e6, infsup=DIRECT))
        assert state.iterations == 1
        assert state.termination == TOL
        assert state.accepted

    def test_deterministic_selection(self, toy_fom, toy_training):
        """Test two runs with the same seed select the same parameters."""
        cfg = GreedyConfig(tol=1e-8, max_iter=4, infsup=DIRECT, seed=7)
        first = pod_greedy_standard(toy_fom, toy_training, cfg)
        second = pod_greedy_standard(toy_fom, toy_training, cfg)
        assert [mu.coords for mu in first.selected] == [mu.coords for mu in second.selected]

    def test_deim_standard_runs_fom_everywhere(self, toy_fom, toy_training):
        """Test the interpolation basis is built from FOM runs at all of Ξ."""
        cfg = GreedyConfig(tol=1e-6, max_iter=3, method=EIM, infsup=DIRECT)
        state = pod_greedy_deim_standard(toy_fom, toy_training, cfg)
        assert state.fom_solves == len(toy_training)
        assert len(state.pool) == len(toy_training)
        assert state.n_ei > 0
        assert state.pipeline == "standard-deim"

    def test_invalid_config(self, toy_fom, toy_training):
        """Test invalid settings are reported before any solve."""
        with pytest.raises(InvalidInputError, match="greedy.tol"):
            pod_greedy_standard(toy_fom, toy_training, GreedyConfig(tol=-1.0))


class TestAdaptiveGreedy:
    """Test adaptive_pod_greedy_deim function."""

    def test_fom_called_once_per_selected_parameter(self, adaptive_run):
        """Test FOM solves equal the distinct μ* that needed snapshots."""
        assert adaptive_run.fom_solves == len(_fom_selected(adaptive_run))
        assert adaptive_run.fom_solves <= adaptive_run.iterations

    def test_basis_ledger(self, adaptive_run):
        """Test the final sizes match the last logged row."""
        last = adaptive_run.records[-1]
        assert (adaptive_run.n_rb, adaptive_run.n_ei) == (last.n_rb, last.n_ei)
        assert adaptive_run.basis.V.shape == (8, last.n_rb)
        assert adaptive_run.interp.U.shape == (8, last.n_ei)

    def test_stability_rule(self, adaptive_run):
        """Test every update keeps ℓ_EI above rank(V) + ℓ_RB."""
        for record, update in zip(adaptive_run.records, adaptive_run.updates, strict=False):
            assert update.ei_next > record.n_rb + max(update.rb_next, 0)

    def test_termination(self, adaptive_run, adaptive_cfg):
        """Test the recorded cause agrees with the final estimate."""
        assert adaptive_run.termination in TERMINATIONS
        assert adaptive_run.max_estimate == adaptive_run.records[-1].est_max
        if adaptive_run.termination == ZOA:
            assert adaptive_cfg.eps_star <= adaptive_run.max_estimate <= adaptive_cfg.tol
        if adaptive_run.termination == MAX_ITER:
            assert adaptive_run.iterations == adaptive_cfg.max_iter

    def test_timings_recorded(self, adaptive_run):
        """Test phase timings cover the FOM and the sweep."""
        assert {"fom", "sweep"} <= set(adaptive_run.timings)

    def test_deterministic_selection(self, toy_fom, toy_training, adaptive_cfg, adaptive_run):
        """Test a second run with the same seed repeats the μ* sequence."""
        again = adaptive_pod_greedy_deim(toy_fom, toy_training, adaptive_cfg)
        assert [mu.coords for mu in again.selected] == [mu.coords for mu in adaptive_run.selected]
        assert [r.n_rb for r in again.records] == [r.n_rb for r in adaptive_run.records]

    def test_singleton_loose_tolerance(self, toy_fom):
        """Test a loose tolerance on one parameter needs a single FOM run."""
        training = TrainingSet.explicit(toy_fom.domain, [[1.0]])
        cfg = GreedyConfig(tol=1e6, method=DEIM, infsup=DIRECT)
        state = adaptive_pod_greedy_deim(toy_fom, training, cfg)
        assert state.fom_solves == 1
        assert state.iterations == 1
        assert state.termination == FLOOR
        assert state.accepted

    def test_krylov_dual_on_parametric_model(self, toy_fom, toy_training):
        """Test the Krylov dual is refused when Ẽ depends on μ."""
        cfg = GreedyConfig(dual_strategy="krylov", infsup=DIRECT)
        with pytest.raises(InvalidInputError, match="Krylov"):
            adaptive_pod_greedy_deim(toy_fom, toy_training, cfg)

    def test_surrogate_attached(self, toy_fom, toy_training):
        """Test the surrogate inf-sup source is stored on the state."""
        cfg = GreedyConfig(tol=1e-4, max_iter=2, method=EIM, seed=0)
        state = adaptive_pod_greedy_deim(toy_fom, toy_training, cfg)
        assert state.surrogate is not None
        assert state.dual_basis is not None

    def test_interp_weighting_reaches_estimator(self, toy_fom, toy_training):
        """Test dt_weighted_interp is handed to the estimator, unscaled by default."""
        default = adaptive_pod_greedy_deim(toy_fom, toy_training, GreedyConfig(max_iter=1, infsup=DIRECT))
        weighted = adaptive_pod_greedy_deim(
            toy_fom, toy_training, GreedyConfig(max_iter=1, infsup=DIRECT, dt_weighted_interp=True)
        )
        assert not default.estimator.dt_weighted_interp
        assert weighted.estimator.dt_weighted_interp


class TestTwoWay:
    """Test adaptive_pod_deim_twoway on the reaction-diffusion model."""

    @pytest.fixture
    def bases(self, small_rd):
        """Reference trajectory and conservative bases."""
        return twoway_bases(small_rd, GreedyConfig(method=DEIM))

    def test_bases_are_conservative(self, bases):
        """Test the precomputed bases have several columns."""
        _, V_full, interp_full = bases
        assert V_full.rank > 1
        assert interp_full.size > 1

    def test_loose_tolerance_stops_at_once(self, small_rd, bases):
        """Test an enormous tolerance accepts the first evaluation."""
        reference, V_full, interp_full = bases
        cfg = GreedyConfig(tol=1e12, zoa_lower=1e-300, method=DEIM, initial_rb=2, initial_ei=3)
        state = adaptive_pod_deim_twoway(small_rd, reference, V_full, interp_full, cfg)
        assert state.iterations == 1
        assert state.termination == ZOA
        assert state.fom_solves == 0

    def test_decrease_from_oversized(self, small_rd, bases):
        """Test oversized starting counts shrink."""
        reference, V_full, interp_full = bases
        cfg = GreedyConfig(
            tol=100.0,
            method=DEIM,
            initial_rb=V_full.rank,
            initial_ei=max(interp_full.size, V_full.rank + 1),
            max_iter=20,
        )
        state = adaptive_pod_deim_twoway(small_rd, reference, V_full, interp_full, cfg)
        assert state.iterations >= 2
        assert state.records[-1].n_rb < state.records[0].n_rb

    def test_increase_from_small_counts(self, small_rd, bases):
        """Test counts grow from (3, 8) when the first estimate is far above tol."""
        reference, V_full, interp_full = bases
        start = error_landscape(small_rd, reference, V_full, interp_full, [3], [8], GreedyConfig(method=DEIM))[0]
        assert start.stable
        tol = start.estimate / 100
        cfg = GreedyConfig(tol=tol, method=DEIM, initial_rb=3, initial_ei=8, max_iter=15)
        state = adaptive_pod_deim_twoway(small_rd, reference, V_full, interp_full, cfg)
        first, update = state.records[0], state.updates[0]
        assert first.est_total == pytest.approx(start.estimate)
        assert update.rb_next > 0 or update.ei_next > first.n_ei
        if state.termination == ZOA:
            assert cfg.eps_star <= state.records[-1].est_total <= tol

    def test_pairs_never_repeat(self, small_rd, bases):
        """Test each evaluated pair of counts is distinct and within range."""
        reference, V_full, interp_full = bases
        cfg = GreedyConfig(tol=1e-4, method=DEIM, initial_rb=1, initial_ei=2, max_iter=10)
        state = adaptive_pod_deim_twoway(small_rd, reference, V_full, interp_full, cfg)
        pairs = [(r.n_rb, r.n_ei) for r in state.records]
        assert len(pairs) == len(set(pairs))
        assert all(1 <= n_rb <= V_full.rank and 1 <= n_ei <= interp_full.size for n_rb, n_ei in pairs)
        assert state.termination in TERMINATIONS

    def test_rejects_parametric_model(self, toy_fom, toy_training):
        """Test two-way adaptation needs a non-parametric model."""
        reference, V_full, interp_full = twoway_bases(toy_fom, GreedyConfig(), toy_training[0])
        with pytest.raises(InvalidInputError, match="non-parametric"):
            adaptive_pod_deim_twoway(toy_fom, reference, V_full, interp_full, GreedyConfig())

    def test_error_landscape(self, small_rd, bases):
        """Test one record per grid point."""
        reference, V_full, interp_full = bases
        records = error_landscape(small_rd, reference, V_full, interp_full, [1, 2], [2, 3], GreedyConfig())
        assert [(r.n_rb, r.n_ei) for r in records] == [(1, 2), (1, 3), (2, 2), (2, 3)]
        assert all(r.true_error >= 0 for r in records)


class TestValidation:
    """Test validation_points and validate_rom."""

    def test_points_exclude_selected(self, toy_training):
        """Test selected parameters are left out and the rest spread evenly."""
        state = GreedyState("adaptive-greedy", ReducedBasis.empty(8), selected=[toy_training[1]])
        points = validation_points(toy_training, state, 2, seed=None)
        assert [mu.coords for mu in points] == [toy_training[0].coords, toy_training[4].coords]

    def test_points_seeded(self, toy_training):
        """Test seeded draws are distinct and disjoint from μ*."""
        state = GreedyState("adaptive-greedy", ReducedBasis.empty(8), selected=[toy_training[0]])
        points = validation_points(toy_training, state, 3, seed=5)
        coords = [mu.coords for mu in points]
        assert len(set(coords)) == 3
        assert toy_training[0].coords not in coords

    def test_points_fewer_candidates(self, toy_training):
        """Test all candidates are returned when there are too few."""
        state = GreedyState("adaptive-greedy", ReducedBasis.empty(8), selected=list(toy_training)[:3])
        assert len(validation_points(toy_training, state, 10, seed=None)) == 2

    def test_validate_rom(self, toy_fom, toy_training, adaptive_run):
        """Test both indicators are reported against the truth."""
        points = validation_points(toy_training, adaptive_run, 2, seed=None)
        records = validate_rom(toy_fom, adaptive_run, points)
        assert len(records) == len(points)
        for record in records:
            assert record.est_original >= 0
            assert record.est_modified >= 0
            assert record.true_original >= 0

    def test_validate_needs_estimator(self, toy_fom, toy_training):
        """Test a state without an estimator is rejected."""
        state = GreedyState("adaptive-greedy", ReducedBasis(np.eye(8)[:, :1]))
        with pytest.raises(InvalidInputError):
            validate_rom(toy_fom, state, [toy_training[0]])


@pytest.fixture(scope="module")
def burgers_runs():
    """Adaptive and standard runs on the reference Burgers' configuration."""
    fom = assemble_burgers(500, 4e-4, horizon=(0.0, 2.0), mu_domain=(5e-4, 1.0), snapshot_stride=10)
    training = TrainingSet.log_uniform(fom.domain, [100])
    cfg = GreedyConfig(tol=1e-3, tol_ei=1e-5, method=EIM, seed=0, max_iter=40)
    adaptive = adaptive_pod_greedy_deim(fom, training, cfg)
    standard = pod_greedy_deim_standard(fom, training, cfg, surrogate=adaptive.surrogate)
    return fom, training, adaptive, standard


@pytest.mark.slow
class TestBurgersBenchmark:
    """Test the full-size Burgers' runs."""

    def test_adaptive_converges_faster(self, burgers_runs):
        """Test the adaptive run ends in the acceptance band in fewer iterations."""
        _, _, adaptive, standard = burgers_runs
        assert adaptive.termination == ZOA
        assert adaptive.iterations <= 13
        assert adaptive.iterations < standard.iterations

    def test_adaptive_is_compact(self, burgers_runs):
        """Test the adaptive ROM sizes and the interpolation saving."""
        _, _, adaptive, standard = burgers_runs
        assert 10 <= adaptive.n_rb <= 20
        assert 28 <= adaptive.n_ei <= 60
        assert adaptive.n_ei <= 0.5 * standard.n_ei

    def test_rho_tends_to_one(self, burgers_runs):
        """Test ρ̄ ends closer to 1 than it started."""
        _, _, adaptive, _ = burgers_runs
        assert abs(adaptive.rho_bar - 1.0) < abs(adaptive.records[0].rho_bar - 1.0)

    def test_effectivity(self, burgers_runs):
        """Test the modified indicator is sharper than the original on unseen parameters."""
        fom, training, adaptive, _ = burgers_runs
        records = validate_rom(fom, adaptive, validation_points(training, adaptive, 20, seed=0))
        eff_modified = np.mean([r.eff_modified for r in records if r.eff_modified is not None])
        eff_original = np.mean([r.eff_original for r in records if r.eff_original is not None])
        assert 1.0 <= eff_modified <= 100.0
        assert eff_modified <= eff_original

    def test_indicator_above_true_error(self, burgers_runs):
        """Test the original indicator bounds the true error at unseen parameters."""
        fom, training, adaptive, _ = burgers_runs
        records = validate_rom(fom, adaptive, validation_points(training, adaptive, 20, seed=0))
        assert all(r.est_original >= r.true_original for r in records)

    def test_wall_time(self, burgers_runs):
        """Test the adaptive pipeline is cheaper than the standard one."""
        _, _, adaptive, standard = burgers_runs
        assert sum(adaptive.timings.values()) < sum(standard.timings.values())


@pytest.mark.slow
def test_chromatography_adaptive_is_cheaper():
    """Test adaptive POD-Greedy-DEIM beats the standard pipeline in wall time on the column."""
    fom = assemble_chromatography(1000, ChromatographyTimeStep(dt_max=0.005))
    training = TrainingSet.uniform(fom.domain, [10, 6])
    cfg = GreedyConfig(
        tol=1e-4,
        tol_ei=1e-6,
        max_iter=60,
        method=DEIM,
        seed=3,
        dual_strategy="krylov",
        adss_tol=1e-5,
    )
    adaptive = adaptive_pod_greedy_deim(fom, training, cfg)
    standard = pod_greedy_deim_standard(fom, training, cfg, surrogate=adaptive.surrogate)
    assert adaptive.accepted
    assert sum(adaptive.timings.values()) < sum(standard.timings.values())


@pytest.fixture(scope="module")
def rd_bases():
    """Full reaction-diffusion model, reference trajectory and conservative bases."""
    fom = assemble_synthetic_rd(200, dt=1e-3, horizon=(0.0, 1.0), source=10.0, snapshot_stride=10)
    cfg = GreedyConfig(tol=1e-4, tol_ei=1e-6, method=DEIM, eps_ei=1e-12)
    return (fom, *twoway_bases(fom, cfg))


@pytest.mark.slow
class TestTwoWayBenchmark:
    """Test two-way adaptation on the full reaction-diffusion model."""

    @pytest.mark.parametrize("direction", ["increase", "decrease"])
    def test_ends_in_acceptance_band(self, rd_bases, direction):
        """Test both directions stop with Δ̄ in [0.1·tol, tol]."""
        fom, reference, V_full, interp_full = rd_bases
        if direction == "increase":
            start = (3, 8)
        else:
            start = (V_full.rank, max(interp_full.size, V_full.rank + 1))
        cfg = GreedyConfig(
            tol=1e-4, tol_ei=1e-6, method=DEIM, initial_rb=start[0], initial_ei=start[1], max_iter=30
        )
        state = adaptive_pod_deim_twoway(fom, reference, V_full, interp_full, cfg)
        assert state.termination == ZOA
        assert cfg.eps_star <= state.records[-1].est_total <= cfg.tol
        if direction == "decrease":
            first, last = state.records[0], state.records[-1]
            assert last.n_rb < first.n_rb
            assert last.n_ei < first.n_ei


def test_accepted_causes():
    """Test which causes count as acceptance."""
    assert set(ACCEPTED) == {ZOA, TOL, FLOOR}
