import numpy as np
import pytest

from src.models.fields import SymmetricMatrixField, hs_inner, pack, unpack
from src.models.lattice import build_domain
from src.services.field_service import (
    constant_field,
    dirichlet_energy,
    eigen_decompose,
    eigen_kinetic_identity,
    forward_gradient,
    grassmannian_winding_field,
    kinetic_density,
    project_to_grassmannian,
    rough_laplacian,
    spatial_gradient,
)
from src.utils.exceptions import ProjectionError, ValidationError
from tests.conftest import smooth_nondegenerate_field


def test_pack_unpack_lower_triangle_order():
    matrix = np.array([[1.0, 2.0, 4.0], [2.0, 3.0, 5.0], [4.0, 5.0, 6.0]])
    assert pack(matrix).tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    np.testing.assert_array_equal(unpack(pack(matrix), 3), matrix)


def test_from_matrices_requires_symmetry(domain2):
    mats = np.zeros((domain2.site_count, 2, 2))
    mats[:, 0, 1] = 1.0
    with pytest.raises(ValidationError):
        SymmetricMatrixField.from_matrices(domain2, mats)


def test_field_rejects_non_finite(domain2):
    data = np.zeros((domain2.site_count, 3))
    data[4, 1] = np.nan
    with pytest.raises(ValidationError):
        SymmetricMatrixField(domain2, 2, data)


def test_winding_field_is_an_involution(domain2):
    field = grassmannian_winding_field(domain2, l=3, k=1, winding=[1, 2], seed=1, perturbation=0.2)
    eig = eigen_decompose(field)
    np.testing.assert_allclose(eig.eigenvalues, np.tile([-1.0, -1.0, 1.0], (domain2.site_count, 1)), atol=1e-12)


def test_winding_field_argument_checks(domain2):
    with pytest.raises(ValidationError) as info:
        grassmannian_winding_field(domain2, l=2, k=2)
    assert info.value.error_code == "VALIDATION_ERROR_K"
    with pytest.raises(ValidationError):
        grassmannian_winding_field(domain2, winding=[1, 0, 0])


def test_constant_field_has_no_gradient(reflection_field):
    assert np.all(spatial_gradient(reflection_field).data == 0)
    assert dirichlet_energy(reflection_field) == 0.0
    assert np.all(rough_laplacian(reflection_field).data == 0)


def test_winding_dirichlet_energy_closed_form():
    domain = build_domain(2, 32, 1.0)
    field = grassmannian_winding_field(domain, winding=[1, 0])
    h = domain.h
    delta = 2 * np.pi * h
    assert dirichlet_energy(field) == pytest.approx(2 * (1 - np.cos(delta)) / h ** 2, rel=1e-12)
    expected_density = (1 - np.cos(2 * delta)) / (2 * h ** 2)
    np.testing.assert_allclose(kinetic_density(field).values, expected_density, rtol=1e-12)


def test_rough_laplacian_summation_by_parts(winding_field):
    other = grassmannian_winding_field(winding_field.domain, winding=[0, 1], seed=3, perturbation=0.5)
    volume = winding_field.domain.cell_volume()
    lhs = np.sum(hs_inner(rough_laplacian(winding_field).data, other.data, 2)) * volume
    rhs = np.sum(hs_inner(forward_gradient(winding_field).data, forward_gradient(other).data, 2)) * volume
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_rough_laplacian_is_positive(winding_field):
    volume = winding_field.domain.cell_volume()
    quadratic = np.sum(hs_inner(rough_laplacian(winding_field).data, winding_field.data, 2)) * volume
    assert quadratic == pytest.approx(2 * dirichlet_energy(winding_field), rel=1e-10)
    assert quadratic > 0


def test_eigen_kinetic_identity_converges():
    mismatches = []
    for n in (32, 64):
        field = smooth_nondegenerate_field(n)
        identity = eigen_kinetic_identity(field)
        assert len(identity.excluded) == 0
        mismatches.append(identity.mismatch.integral())
    assert mismatches[0] / mismatches[1] >= 3.5


def test_eigen_kinetic_identity_excludes_degenerate_sites(domain2):
    field = constant_field(domain2, np.eye(2))
    identity = eigen_kinetic_identity(field)
    assert len(identity.excluded) == domain2.site_count
    assert np.all(identity.mismatch.values == 0)


def test_projection_to_signs(domain2):
    field = constant_field(domain2, np.diag([2.0, -3.0]))
    projected = project_to_grassmannian(field)
    np.testing.assert_allclose(projected.field.matrices()[0], np.diag([1.0, -1.0]), atol=1e-14)
    assert np.all(projected.signature.values == 1)
    assert len(projected.invalid) == 0


def test_projection_fails_everywhere_singular(domain2):
    with pytest.raises(ProjectionError):
        project_to_grassmannian(constant_field(domain2, np.zeros((2, 2))))


def test_eigen_decompose_reconstructs(winding_field):
    perturbed = winding_field.with_data(winding_field.data * 1.5 + 0.1)
    eig = eigen_decompose(perturbed)
    np.testing.assert_allclose(eig.reconstruct(), perturbed.matrices(), rtol=1e-10, atol=1e-12)
    assert len(eig.degenerate_sites()) == 0
    assert len(eigen_decompose(constant_field(winding_field.domain, np.eye(2))).degenerate_sites()) == 1024
