"""Tests for reduction module."""

import numpy as np
import pytest

from adaptive_rom.errors import InvalidInputError, RomInstabilityError
from adaptive_rom.interpolation import deim_build
from adaptive_rom.models import simulate_fom
from adaptive_rom.reduction import (
    ReducedBasis,
    adss_filter,
    pod,
    project_rom,
    simulate_rom,
)


def _full_basis(size: int) -> ReducedBasis:
    return ReducedBasis(np.eye(size))


class TestReducedBasis:
    """Test ReducedBasis class."""

    def test_default_provenance(self):
        """Test columns without provenance get (None, j)."""
        basis = ReducedBasis(np.eye(4)[:, :2])
        assert basis.provenance == ((None, 0), (None, 1))

    def test_extend_records_provenance(self, rng):
        """Test new modes carry their parameter and mode index."""
        basis = ReducedBasis.empty(10).extend(rng.standard_normal((10, 2)), mu=(0.5,))
        assert basis.rank == 2
        assert basis.provenance == (((0.5,), 0), ((0.5,), 1))
        assert np.allclose(basis.V.T @ basis.V, np.eye(2))

    def test_extend_skips_spanned_mode(self, rng):
        """Test a mode inside span(V) is not appended."""
        basis = ReducedBasis.empty(10).extend(rng.standard_normal((10, 2)), mu=(0.5,))
        grown = basis.extend(np.column_stack([basis.V[:, 0], rng.standard_normal(10)]), mu=(1.0,))
        assert grown.rank == 3
        assert grown.provenance[-1] == ((1.0,), 1)

    def test_drop_last_keeps_prefix(self, rng):
        """Test dropping columns keeps the oldest ones."""
        basis = ReducedBasis.empty(10).extend(rng.standard_normal((10, 4)))
        smaller = basis.drop_last(3)
        assert smaller.rank == 1
        assert np.array_equal(smaller.V[:, 0], basis.V[:, 0])

    def test_project_removes_span(self, rng):
        """Test the orthogonal complement projection."""
        basis = ReducedBasis.empty(6).extend(rng.standard_normal((6, 2)))
        X = rng.standard_normal((6, 3))
        assert np.allclose(basis.V.T @ basis.project(X), 0.0)

    def test_provenance_length_checked(self):
        """Test provenance must match the column count."""
        with pytest.raises(InvalidInputError):
            ReducedBasis(np.eye(3), ((None, 0),))


class TestPod:
    """Test pod function."""

    def test_count(self, rng):
        """Test a fixed count of modes."""
        basis = pod(rng.standard_normal((12, 6)), count=3, mu=(1.0,))
        assert basis.rank == 3
        assert basis.provenance[2] == ((1.0,), 2)

    def test_energy(self):
        """Test the tail-energy rule."""
        X = np.diag([100.0, 1.0, 1e-8])
        assert pod(X, energy=1e-4).rank == 2


class TestProjectRom:
    """Test Galerkin projection."""

    def test_dimensions(self, toy_fom, rng):
        """Test reduced operator shapes."""
        basis = ReducedBasis.empty(8).extend(rng.standard_normal((8, 3)))
        rom = project_rom(toy_fom, basis)
        mu = toy_fom.domain.point(1.0)
        assert rom.dims == (8, 3, 0)
        assert rom.E_r.assemble(mu).shape == (3, 3)
        assert rom.B_r.shape == (3, 1)
        assert rom.C_r.shape == (2, 3)

    def test_projected_operator_matches_full(self, toy_fom, rng):
        """Test Vᵀ Ẽ(μ) V is reassembled from the affine terms."""
        basis = ReducedBasis.empty(8).extend(rng.standard_normal((8, 3)))
        rom = project_rom(toy_fom, basis)
        mu = toy_fom.domain.point(1.7)
        assert np.allclose(rom.E_r.assemble(mu), basis.V.T @ (toy_fom.E(mu) @ basis.V))

    def test_rejects_empty_basis(self, toy_fom):
        """Test an empty basis cannot be projected onto."""
        with pytest.raises(InvalidInputError):
            project_rom(toy_fom, ReducedBasis.empty(8))

    def test_rejects_wrong_rows(self, toy_fom):
        """Test the basis must live in the state space."""
        with pytest.raises(InvalidInputError):
            project_rom(toy_fom, ReducedBasis(np.eye(5)[:, :2]))


class TestSimulateRom:
    """Test the reduced time stepper."""

    def test_full_basis_reproduces_fom(self, toy_fom):
        """Test V = I with exact nonlinearity matches the FOM."""
        mu = toy_fom.domain.point(0.8)
        reference = simulate_fom(toy_fom, mu)
        trajectory = simulate_rom(project_rom(toy_fom, _full_basis(8)), mu)
        assert trajectory.stable
        assert np.allclose(trajectory.outputs, reference.outputs, atol=1e-10)
        assert np.allclose(trajectory.lift(np.eye(8)), reference.states, atol=1e-10)

    def test_full_interpolation_reproduces_fom(self, toy_fom, rng):
        """Test V = I with a full-rank DEIM basis matches the FOM."""
        mu = toy_fom.domain.point(1.3)
        reference = simulate_fom(toy_fom, mu)
        interp = deim_build(rng.standard_normal((8, 8)), count=8)
        rom = project_rom(toy_fom, _full_basis(8), interp)
        trajectory = simulate_rom(rom, mu)
        assert rom.n_ei == 8
        assert trajectory.samples.shape == (8, 50)
        assert np.allclose(trajectory.outputs, reference.outputs, atol=1e-10)

    def test_snapshot_outputs(self, toy_fom):
        """Test outputs at snapshot steps are picked 1-based."""
        mu = toy_fom.domain.point(1.0)
        trajectory = simulate_rom(project_rom(toy_fom, _full_basis(8)), mu)
        assert np.array_equal(trajectory.snapshot_outputs, trajectory.outputs[:, 4::5])

    def test_divergence_reported(self, toy_fom):
        """Test a diverging run is truncated at the failing step."""
        rom = project_rom(toy_fom, _full_basis(8))
        trajectory = simulate_rom(rom, toy_fom.domain.point(1.0), divergence_limit=1e-12)
        assert not trajectory.stable
        assert trajectory.unstable_at == 1
        assert trajectory.outputs.shape == (2, 0)
        with pytest.raises(RomInstabilityError):
            trajectory.require_stable()

    def test_divergence_raises_on_request(self, toy_fom):
        """Test raise_on_instability turns divergence into an error."""
        rom = project_rom(toy_fom, _full_basis(8))
        with pytest.raises(RomInstabilityError, match="step 1"):
            simulate_rom(rom, toy_fom.domain.point(1.0), raise_on_instability=True, divergence_limit=1e-12)


class TestAdss:
    """Test adaptive snapshot selection."""

    def test_keeps_new_directions_only(self):
        """Test parallel and nearly parallel columns are dropped."""
        e1, e2 = np.eye(3)[:, 0], np.eye(3)[:, 1]
        X = np.column_stack([e1, 2 * e1, e2, np.zeros(3), e2 + 1e-8 * e1, e1])
        idx, kept = adss_filter(X, angle_tol=1e-5)
        assert idx.tolist() == [0, 2, 5]
        assert kept.shape == (3, 3)

    def test_compares_with_last_kept(self):
        """Test the angle is measured against the last kept column only."""
        e1, e2 = np.eye(2)[:, 0], np.eye(2)[:, 1]
        idx, _ = adss_filter(np.column_stack([e1, e2, e1]), angle_tol=0.5)
        assert idx.tolist() == [0, 1, 2]

    def test_invalid_tolerance(self):
        """Test tolerances outside (0, 1) are rejected."""
        with pytest.raises(InvalidInputError):
            adss_filter(np.eye(2), angle_tol=1.0)

    def test_empty(self):
        """Test an empty matrix is rejected."""
        with pytest.raises(InvalidInputError):
            adss_filter(np.empty((3, 0)))
