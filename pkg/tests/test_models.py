"""Tests for models module."""

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spsla

from adaptive_rom.config import ModelConfig
from adaptive_rom.errors import InvalidInputError
from adaptive_rom.models import (
    ChromatographyCoefficients,
    ChromatographyTimeStep,
    ParameterDomain,
    TrainingSet,
    assemble_burgers,
    assemble_chromatography,
    build_model,
    burgers_operators,
    simulate_fom,
)


class TestParameterDomain:
    """Test ParameterDomain and ParameterPoint."""

    def test_point_inside(self):
        """Test a point on the boundary is admissible."""
        domain = ParameterDomain((0.0, 1.0), (1.0, 3.0))
        assert domain.point(1.0, 3.0).coords == (1.0, 3.0)
        assert domain.names == ("mu0", "mu1")

    def test_point_outside_raises(self):
        """Test points outside the box are rejected."""
        domain = ParameterDomain((0.0,), (1.0,))
        with pytest.raises(InvalidInputError, match="outside"):
            domain.point(1.5)

    def test_invalid_interval(self):
        """Test an inverted interval is rejected."""
        with pytest.raises(InvalidInputError):
            ParameterDomain((2.0,), (1.0,))

    def test_corners_and_center(self):
        """Test corner enumeration and center."""
        domain = ParameterDomain((0.0, 0.0), (2.0, 4.0))
        assert len(domain.corners()) == 4
        assert domain.center() == (1.0, 2.0)


class TestTrainingSet:
    """Test training set construction."""

    def test_uniform_grid_first_axis_slowest(self):
        """Test tensor ordering of a uniform grid."""
        domain = ParameterDomain((0.0, 0.0), (1.0, 1.0))
        training = TrainingSet.uniform(domain, [2, 3])
        assert len(training) == 6
        assert training[0].coords == (0.0, 0.0)
        assert training[1].coords == (0.0, 0.5)
        assert training[3].coords == (1.0, 0.0)

    def test_log_uniform_endpoints(self):
        """Test log-uniform sampling hits both bounds and is geometric."""
        domain = ParameterDomain((1e-3,), (1.0,))
        values = TrainingSet.log_uniform(domain, [4]).as_array().ravel()
        assert values[0] == pytest.approx(1e-3)
        assert values[-1] == pytest.approx(1.0)
        assert values[1] / values[0] == pytest.approx(10.0)

    def test_log_uniform_needs_positive_bounds(self):
        """Test log spacing of a domain touching zero is refused."""
        with pytest.raises(InvalidInputError):
            TrainingSet.log_uniform(ParameterDomain((0.0,), (1.0,)), [3])

    def test_count_mismatch(self):
        """Test one count per axis is required."""
        with pytest.raises(InvalidInputError):
            TrainingSet.uniform(ParameterDomain((0.0,), (1.0,)), [2, 2])

    def test_non_parametric_single_point(self):
        """Test an empty domain yields the single empty parameter."""
        training = TrainingSet.uniform(ParameterDomain.empty(), [])
        assert len(training) == 1
        assert training[0].coords == ()

    def test_explicit_and_subset(self):
        """Test explicit points keep order and subsets pick by index."""
        domain = ParameterDomain((0.0,), (1.0,))
        training = TrainingSet.explicit(domain, [[0.2], [0.8], [0.5]])
        assert training.subset([2, 0]).as_array().ravel().tolist() == [0.5, 0.2]
        assert training.index_of(domain.point(0.8)) == 1


class TestNonlinearities:
    """Test full and restricted nonlinear evaluation."""

    def test_burgers_operators(self):
        """Test the difference operators on a linear profile."""
        N = 10
        L, D = burgers_operators(N)
        sigma = np.arange(1, N + 1) / N
        assert np.allclose((D @ sigma)[:-1], 1.0)
        assert (D @ sigma)[-1] == 0.0
        assert np.allclose((L @ sigma)[1:-1], 0.0)

    def test_burgers_restriction_matches_full(self, small_burgers, rng):
        """Test the convection evaluator on a stencil closure."""
        x = rng.standard_normal(small_burgers.size)
        idx = [0, 7, 39, 20]
        full = small_burgers.f(x, None)
        assert np.allclose(small_burgers.f_restricted(x, None, idx), full[idx])
        closure = small_burgers.restrict(idx).closure
        assert closure.size <= 3 * len(idx)

    def test_pointwise_restriction_matches_full(self, toy_fom, rng):
        """Test the pointwise evaluator with repeated indices."""
        x = rng.standard_normal(toy_fom.size)
        idx = [3, 3, 0]
        assert np.allclose(toy_fom.f_restricted(x, None, idx), toy_fom.f(x, None)[idx])

    def test_chromatography_restriction_matches_full(self, rng):
        """Test the mass transfer evaluator needs only the selected cells."""
        fom = assemble_chromatography(40, time_step=1e-3)
        mu = fom.domain.point(0.1, 1.0)
        x = np.abs(rng.standard_normal(fom.size))
        idx = [0, 13, 25, 39]
        assert np.allclose(fom.f_restricted(x, mu, idx), fom.f(x, mu)[idx])
        assert fom.restrict(idx).closure.size == 4 * len({i % 10 for i in idx})

    def test_restrict_out_of_range(self, toy_fom):
        """Test indices past the state size are rejected."""
        with pytest.raises(InvalidInputError):
            toy_fom.restrict([toy_fom.size])


class TestSimulateFom:
    """Test full-order time stepping."""

    def test_snapshot_steps(self, toy_fom, toy_training):
        """Test snapshot instants are every stride-th step, 1-based."""
        trajectory = simulate_fom(toy_fom, toy_training[0])
        assert trajectory.steps.tolist() == list(range(5, 51, 5))
        assert trajectory.outputs.shape == (2, 50)
        assert trajectory.states.shape == (8, 10)
        assert trajectory.nonlinear_snapshots.shape == (8, 10)
        assert np.allclose(trajectory.snapshot_outputs, toy_fom.C @ trajectory.states)

    def test_first_step_linear(self, linear_toy_fom):
        """Test one step from rest solves Ẽ x = Δt B u."""
        fom = linear_toy_fom
        mu = fom.domain.point(1.0)
        trajectory = simulate_fom(fom, mu)
        x1 = spsla.spsolve(sp.csc_matrix(fom.E(mu)), fom.dt * (fom.B @ np.ones(1)))
        assert np.allclose(trajectory.outputs[:, 0], fom.C @ x1)

    def test_deterministic(self, toy_fom, toy_training):
        """Test repeated solves are bitwise identical."""
        a = simulate_fom(toy_fom, toy_training[2])
        b = simulate_fom(toy_fom, toy_training[2])
        assert np.array_equal(a.states, b.states)

    def test_parameter_required(self, toy_fom):
        """Test parametric models refuse a missing parameter."""
        with pytest.raises(InvalidInputError):
            simulate_fom(toy_fom, None)

    def test_burgers_output_grows_from_rest(self, small_burgers):
        """Test the source drives the right boundary value up."""
        trajectory = simulate_fom(small_burgers, small_burgers.domain.point(0.1))
        assert np.all(np.isfinite(trajectory.outputs))
        assert trajectory.outputs[0, -1] > trajectory.outputs[0, 0] > 0

    def test_non_parametric(self, small_rd):
        """Test the reaction-diffusion model runs without a parameter."""
        trajectory = simulate_fom(small_rd, None)
        assert trajectory.n_snapshots == 40
        assert trajectory.outputs[0, -1] > 0

    def test_check_nonsingular(self, toy_fom, toy_training):
        """Test Ẽ is nonsingular on the training set."""
        toy_fom.check_nonsingular(list(toy_training))


class TestChromatography:
    """Test the chromatography column."""

    def test_structure(self):
        """Test block sizes, outputs and parameter domain."""
        fom = assemble_chromatography(40, time_step=1e-3)
        assert fom.domain.dim == 2
        assert fom.C.shape == (2, 40)
        assert not fom.is_E_parametric
        mu = fom.domain.point(0.1, 1.0)
        assert fom.n_steps(mu) == round(15.0 / 1e-3)

    def test_feed_switches_off(self):
        """Test the inlet feed drops to zero after the injection period."""
        fom = assemble_chromatography(40, time_step=1e-2)
        mu = fom.domain.point(0.1, 1.0)
        assert fom.input(0, mu)[0] == 1.0
        assert fom.input(200, mu)[0] == 0.0

    def test_equilibrium_zero_at_zero(self):
        """Test the isotherm vanishes at zero concentration."""
        fom = assemble_chromatography(12, time_step=1e-3)
        q_a, q_b = fom.nonlinearity.equilibrium(np.zeros(3), np.zeros(3))
        assert np.all(q_a == 0) and np.all(q_b == 0)

    def test_time_step_policy(self):
        """Test the resolved step is capped and positive."""
        dt = ChromatographyTimeStep(dt_max=0.005).resolve(ChromatographyCoefficients(), 0.0667)
        assert 0 < dt <= 0.005

    @pytest.mark.parametrize("time_step", [1, np.float32(0.5), np.int64(2)])
    def test_integer_and_numpy_time_step(self, time_step):
        """Test any real Δt is taken as a fixed step."""
        fom = assemble_chromatography(40, time_step=time_step)
        assert isinstance(fom.dt, float)
        assert fom.dt == pytest.approx(float(time_step))

    def test_bad_size(self):
        """Test sizes that are not multiples of four are rejected."""
        with pytest.raises(InvalidInputError):
            assemble_chromatography(30)

    def test_coefficients_partial(self):
        """Test partial coefficient maps need complete=False."""
        with pytest.raises(InvalidInputError, match="incomplete"):
            ChromatographyCoefficients.from_dict({"porosity": 0.3})
        coefficients = ChromatographyCoefficients.from_dict({"porosity": 0.3}, complete=False)
        assert coefficients.porosity == 0.3
        assert coefficients.peclet == 2000.0

    def test_unknown_coefficient(self):
        """Test unknown coefficient names are rejected."""
        with pytest.raises(InvalidInputError, match="unknown"):
            ChromatographyCoefficients.from_dict({"viscosity": 1.0}, complete=False)

    def test_short_run_stays_finite(self):
        """Test a coarse column run stays finite and non-negative at the outlet."""
        fom = assemble_chromatography(40, time_step=2e-3, snapshot_stride=50)
        trajectory = simulate_fom(fom, fom.domain.point(0.1667, 0.5))
        assert np.all(np.isfinite(trajectory.outputs))
        assert trajectory.outputs.min() > -1e-6


class TestBuildModel:
    """Test build_model function."""

    def test_burgers(self):
        """Test a Burgers' section builds the matching model."""
        fom = build_model(ModelConfig(id="burgers", size=20, dt=1e-3, domain=[[0.01, 1.0]]))
        assert fom.name == "burgers"
        assert fom.domain.lower == (0.01,)

    def test_chromatography_partial_coefficients(self):
        """Test a partial coefficient map overrides defaults."""
        cfg = ModelConfig(
            id="chromatography",
            size=40,
            dt=1e-3,
            domain=[[0.0667, 0.1667], [0.5, 2.0]],
            coefficients={"porosity": 0.35},
        )
        fom = build_model(cfg)
        assert fom.nonlinearity.coefficients.porosity == 0.35

    def test_unknown(self):
        """Test unknown model ids are rejected."""
        with pytest.raises(InvalidInputError):
            build_model(ModelConfig(id="heat", size=10, dt=1e-3))

    def test_burgers_rejects_negative_dt(self):
        """Test a negative step is rejected."""
        with pytest.raises(InvalidInputError):
            assemble_burgers(10, -1.0)
