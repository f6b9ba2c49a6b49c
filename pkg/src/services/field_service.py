"""Lattice calculus for symmetric-matrix fields."""
from typing import NamedTuple, Optional, Sequence
import logging

import numpy as np

from src.models.fields import (
    EigenField,
    GradientField,
    ScalarField,
    SymmetricMatrixField,
    pack,
)
from src.models.lattice import LatticeDomain, SiteSet
from src.utils.constants import Tolerances
from src.utils.exceptions import ProjectionError, ValidationError

logger = logging.getLogger(__name__)


class KineticIdentity(NamedTuple):
    direct: ScalarField
    eigenbasis: ScalarField
    mismatch: ScalarField
    excluded: SiteSet


class GrassmannianProjection(NamedTuple):
    field: SymmetricMatrixField
    signature: ScalarField
    invalid: SiteSet


def constant_field(domain: LatticeDomain, matrix, t: float = 0.0) -> SymmetricMatrixField:
    """Field equal to one symmetric matrix at every site."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"Expected a square matrix, got shape {matrix.shape}", field="matrix")
    if not np.array_equal(matrix, matrix.T):
        raise ValidationError("Matrix must be symmetric", field="matrix")
    data = np.broadcast_to(pack(matrix), (domain.site_count, matrix.shape[0] * (matrix.shape[0] + 1) // 2))
    return SymmetricMatrixField(domain, matrix.shape[0], data.copy(), t)


def _smooth_perturbation(domain: LatticeDomain, seed: Optional[int], modes: int = 3) -> np.ndarray:
    """Seeded sum of low Fourier modes, max amplitude about one."""
    rng = np.random.default_rng(seed)
    coords = domain.coordinates
    values = np.zeros(domain.site_count)
    for _ in range(modes):
        wavevector = rng.integers(-2, 3, size=domain.m)
        if not np.any(wavevector):
            wavevector[0] = 1
        phase = rng.uniform(0, 2 * np.pi)
        amplitude = rng.normal()
        values += amplitude * np.sin(2 * np.pi * coords @ wavevector / domain.period + phase)
    scale = np.max(np.abs(values))
    return values / scale if scale > 0 else values


def grassmannian_winding_field(
    domain: LatticeDomain,
    l: int = 2,
    k: int = 1,
    winding: Sequence[int] = None,
    seed: Optional[int] = None,
    perturbation: float = 0.0,
) -> SymmetricMatrixField:
    """Involution field with k eigenvalues +1 and l - k eigenvalues -1 at every site.

    The leading 2 x 2 block is a reflection whose angle winds
    theta(x) = 2 pi (winding . x) / period plus a seeded smooth perturbation.
    Remaining diagonal entries are k - 1 copies of +1 then l - k - 1 copies of -1.
    """
    if not 1 <= k < l:
        raise ValidationError(f"k must satisfy 1 <= k < l, got k={k}, l={l}", field="k")
    winding = np.zeros(domain.m, dtype=int) if winding is None else np.asarray(winding)
    if winding.shape != (domain.m,) or not np.all(winding == np.round(winding)):
        raise ValidationError(f"winding must be {domain.m} integers, got {list(winding)}", field="winding")

    theta = 2 * np.pi * (domain.coordinates @ winding.astype(float)) / domain.period
    if perturbation:
        theta = theta + perturbation * _smooth_perturbation(domain, seed)

    mats = np.zeros((domain.site_count, l, l))
    mats[:, 0, 0] = np.cos(theta)
    mats[:, 1, 1] = -np.cos(theta)
    mats[:, 0, 1] = np.sin(theta)
    mats[:, 1, 0] = np.sin(theta)
    padding = [1.0] * (k - 1) + [-1.0] * (l - k - 1)
    for offset, value in enumerate(padding):
        mats[:, 2 + offset, 2 + offset] = value
    logger.debug(f"Winding field l={l} k={k} winding={winding.tolist()} perturbation={perturbation}")
    return SymmetricMatrixField.from_matrices(domain, mats)


def spatial_gradient(field: SymmetricMatrixField) -> GradientField:
    """Central differences (f(x + h e_j) - f(x - h e_j)) / 2h with periodic wrap."""
    grid = field.grid()
    h = field.domain.h
    comps = [
        ((np.roll(grid, -1, axis=j) - np.roll(grid, 1, axis=j)) / (2 * h)).reshape(field.data.shape)
        for j in range(field.domain.m)
    ]
    return GradientField(field.domain, field.l, np.stack(comps))


def forward_gradient(field: SymmetricMatrixField) -> GradientField:
    """Forward differences (f(x + h e_j) - f(x)) / h, the adjoint pair of rough_laplacian."""
    grid = field.grid()
    h = field.domain.h
    comps = [
        ((np.roll(grid, -1, axis=j) - grid) / h).reshape(field.data.shape)
        for j in range(field.domain.m)
    ]
    return GradientField(field.domain, field.l, np.stack(comps))


def kinetic_density(field: SymmetricMatrixField) -> ScalarField:
    """e_kin = 1/2 sum_j |d_j f|^2 per site."""
    return ScalarField(field.domain, 0.5 * spatial_gradient(field).norm_squared(), "kinetic")


def dirichlet_energy(field: SymmetricMatrixField) -> float:
    """Lattice Dirichlet energy 1/2 sum_x sum_j |D+_j f|^2 h^m."""
    return float(0.5 * forward_gradient(field).norm_squared().sum() * field.domain.cell_volume())


def rough_laplacian(field: SymmetricMatrixField) -> SymmetricMatrixField:
    """d*df = -sum_j (f(x + h e_j) - 2 f(x) + f(x - h e_j)) / h^2."""
    grid = field.grid()
    h2 = field.domain.h ** 2
    total = np.zeros_like(grid)
    for j in range(field.domain.m):
        total -= (np.roll(grid, -1, axis=j) - 2 * grid + np.roll(grid, 1, axis=j)) / h2
    return field.with_data(total.reshape(field.data.shape))


def eigen_decompose(field: SymmetricMatrixField, gap_tol: float = None) -> EigenField:
    """Sorted eigenvalues, orthonormal frames and the per-site spectral gap."""
    eigenvalues, frames = np.linalg.eigh(field.matrices())
    if field.l > 1:
        gap = np.min(np.diff(eigenvalues, axis=1), axis=1)
    else:
        gap = np.full(field.domain.site_count, np.inf)
    if gap_tol is None:
        gap_tol = Tolerances.EIGEN_GAP_REL * float(np.max(np.abs(eigenvalues)))
    eig = EigenField(field.domain, eigenvalues, frames, gap, gap_tol)
    degenerate = int(np.count_nonzero(eig.degenerate))
    if degenerate:
        logger.debug(f"{degenerate} of {field.domain.site_count} sites have a degenerate spectrum")
    return eig


def _align_frames(reference: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """Flip frame columns so each has non-negative overlap with the reference column."""
    overlap = np.einsum('sij,sij->sj', reference, frames)
    signs = np.where(overlap < 0, -1.0, 1.0)
    return frames * signs[:, None, :]


def eigen_kinetic_identity(field: SymmetricMatrixField, gap_tol: float = None) -> KineticIdentity:
    """Compare |df|^2 with sum |d lambda_i|^2 + sum (lambda_i - lambda_j)^2 <de_i, e_j>^2.

    Frames of neighboring sites are sign-aligned to the center frame before
    differencing. Sites whose spectrum, or any stencil neighbor's, is
    degenerate are excluded and reported.
    """
    domain = field.domain
    eig = eigen_decompose(field, gap_tol)
    lam_grid = eig.eigenvalues.reshape(domain.shape + (field.l,))
    frame_grid = eig.frames.reshape(domain.shape + (field.l, field.l))
    degenerate_grid = eig.degenerate.reshape(domain.shape)
    h = domain.h

    excluded = eig.degenerate.copy()
    eigen_sum = np.zeros(domain.site_count)
    gaps_sq = (eig.eigenvalues[:, :, None] - eig.eigenvalues[:, None, :]) ** 2
    for j in range(domain.m):
        lam_plus = np.roll(lam_grid, -1, axis=j).reshape(eig.eigenvalues.shape)
        lam_minus = np.roll(lam_grid, 1, axis=j).reshape(eig.eigenvalues.shape)
        frames_plus = _align_frames(eig.frames, np.roll(frame_grid, -1, axis=j).reshape(eig.frames.shape))
        frames_minus = _align_frames(eig.frames, np.roll(frame_grid, 1, axis=j).reshape(eig.frames.shape))
        excluded |= np.roll(degenerate_grid, -1, axis=j).reshape(-1)
        excluded |= np.roll(degenerate_grid, 1, axis=j).reshape(-1)

        d_lambda = (lam_plus - lam_minus) / (2 * h)
        d_frames = (frames_plus - frames_minus) / (2 * h)
        # <de_i, e_j> for columns i of the derivative and j of the center frame
        overlaps = np.einsum('sri,srj->sij', d_frames, eig.frames)
        eigen_sum += np.sum(d_lambda ** 2, axis=1) + np.sum(gaps_sq * overlaps ** 2, axis=(1, 2))

    direct = spatial_gradient(field).norm_squared()
    eigen_sum = np.where(excluded, 0.0, eigen_sum)
    direct_kept = np.where(excluded, 0.0, direct)
    mismatch = np.abs(direct_kept - eigen_sum)
    excluded_sites = SiteSet(np.nonzero(excluded)[0], domain)
    if len(excluded_sites):
        logger.info(f"Eigenbasis identity skipped {len(excluded_sites)} degenerate sites")
    return KineticIdentity(
        ScalarField(domain, direct, "|df|^2"),
        ScalarField(domain, eigen_sum, "eigenbasis |df|^2"),
        ScalarField(domain, mismatch, "mismatch"),
        excluded_sites,
    )


def project_to_grassmannian(field: SymmetricMatrixField, tol: float = Tolerances.PROJECTION_TOL) -> GrassmannianProjection:
    """Replace every eigenvalue by its sign; sites with |lambda_i| < tol are invalid."""
    eigenvalues, frames = np.linalg.eigh(field.matrices())
    invalid = np.any(np.abs(eigenvalues) < tol, axis=1)
    if np.all(invalid):
        raise ProjectionError(f"All {field.domain.site_count} sites have an eigenvalue below {tol}")
    signs = np.where(eigenvalues >= 0, 1.0, -1.0)
    mats = np.einsum('sik,sk,sjk->sij', frames, signs, frames)
    mats = 0.5 * (mats + np.swapaxes(mats, 1, 2))
    signature = np.count_nonzero(eigenvalues > 0, axis=1).astype(float)
    if np.any(invalid):
        logger.warning(f"Projection marked {int(invalid.sum())} sites invalid (|lambda| < {tol})")
    return GrassmannianProjection(
        field.with_data(pack(mats)),
        ScalarField(field.domain, signature, "signature"),
        SiteSet(np.nonzero(invalid)[0], field.domain),
    )
