"""Symmetric-matrix lattice fields and the derived per-site quantities."""
from dataclasses import dataclass, field as dataclass_field
from functools import lru_cache
from typing import Tuple

import numpy as np

from src.models.lattice import LatticeDomain, SiteSet
from src.utils.exceptions import ValidationError


def packed_size(l: int) -> int:
    return l * (l + 1) // 2


@lru_cache(maxsize=None)
def tril(l: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row-major lower-triangle index pairs."""
    rows, cols = np.tril_indices(l)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@lru_cache(maxsize=None)
def hs_weights(l: int) -> np.ndarray:
    """Weights turning packed squares into Hilbert-Schmidt squared norms."""
    rows, cols = tril(l)
    weights = np.where(rows == cols, 1.0, 2.0)
    weights.setflags(write=False)
    return weights


def pack(matrices: np.ndarray) -> np.ndarray:
    """(..., l, l) symmetric matrices to (..., l(l+1)/2) lower triangles."""
    rows, cols = tril(matrices.shape[-1])
    return matrices[..., rows, cols]


def unpack(data: np.ndarray, l: int) -> np.ndarray:
    """(..., l(l+1)/2) lower triangles to (..., l, l) symmetric matrices."""
    rows, cols = tril(l)
    matrices = np.zeros(data.shape[:-1] + (l, l), dtype=data.dtype)
    matrices[..., rows, cols] = data
    matrices[..., cols, rows] = data
    return matrices


def hs_norm_squared(data: np.ndarray, l: int) -> np.ndarray:
    """Hilbert-Schmidt squared norm of packed matrices along the last axis."""
    return np.sum(hs_weights(l) * data ** 2, axis=-1)


def hs_inner(a: np.ndarray, b: np.ndarray, l: int) -> np.ndarray:
    return np.sum(hs_weights(l) * a * b, axis=-1)


@dataclass(eq=False)
class SymmetricMatrixField:
    """One real symmetric l x l matrix per site, stored as packed lower triangles."""
    domain: LatticeDomain
    l: int
    data: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        expected = (self.domain.site_count, packed_size(self.l))
        if self.data.shape != expected:
            raise ValidationError(f"Field data has shape {self.data.shape}, expected {expected}", field="data")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("Field entries must be finite", field="data")

    @classmethod
    def from_matrices(cls, domain: LatticeDomain, matrices: np.ndarray, t: float = 0.0) -> "SymmetricMatrixField":
        """Build from full (site_count, l, l) matrices; they must be exactly symmetric."""
        matrices = np.asarray(matrices, dtype=float)
        if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
            raise ValidationError(f"Expected (sites, l, l) matrices, got {matrices.shape}", field="matrix")
        if not np.array_equal(matrices, np.swapaxes(matrices, 1, 2)):
            raise ValidationError("Matrices must be symmetric", field="matrix")
        return cls(domain, matrices.shape[1], pack(matrices), t)

    def matrices(self) -> np.ndarray:
        return unpack(self.data, self.l)

    def grid(self) -> np.ndarray:
        """Data reshaped to (n, ..., n, packed)."""
        return self.data.reshape(self.domain.shape + (self.data.shape[-1],))

    def with_data(self, data: np.ndarray, t: float = None) -> "SymmetricMatrixField":
        return SymmetricMatrixField(self.domain, self.l, data, self.t if t is None else t)

    def conjugated(self, Q: np.ndarray) -> "SymmetricMatrixField":
        """Q^T f Q at every site, for a constant orthogonal Q."""
        mats = np.einsum('ji,sjk,kl->sil', Q, self.matrices(), Q)
        mats = 0.5 * (mats + np.swapaxes(mats, 1, 2))
        return SymmetricMatrixField(self.domain, self.l, pack(mats), self.t)


@dataclass(eq=False)
class EigenField:
    """Per-site spectrum (ascending), orthonormal frames (columns) and spectral gap."""
    domain: LatticeDomain
    eigenvalues: np.ndarray
    frames: np.ndarray
    gap: np.ndarray
    gap_tol: float

    @property
    def degenerate(self) -> np.ndarray:
        return self.gap < self.gap_tol

    def degenerate_sites(self) -> SiteSet:
        return SiteSet(np.nonzero(self.degenerate)[0], self.domain)

    def reconstruct(self) -> np.ndarray:
        return np.einsum('sik,sk,sjk->sij', self.frames, self.eigenvalues, self.frames)


@dataclass(eq=False)
class GradientField:
    """Per-axis derivatives, packed: shape (m, site_count, l(l+1)/2)."""
    domain: LatticeDomain
    l: int
    data: np.ndarray

    def matrices(self) -> np.ndarray:
        return unpack(self.data, self.l)

    def norm_squared(self) -> np.ndarray:
        """Per-site sum over axes of |d_j f|^2."""
        return np.sum(hs_norm_squared(self.data, self.l), axis=0)


@dataclass(eq=False)
class ScalarField:
    """One real value per site."""
    domain: LatticeDomain
    values: np.ndarray
    label: str = dataclass_field(default="")

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size != self.domain.site_count:
            raise ValidationError(
                f"Scalar field has {self.values.size} values, domain has {self.domain.site_count} sites",
                field="values",
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError(f"Scalar field {self.label!r} has non-finite values", field="values")

    @property
    def sup(self) -> float:
        return float(self.values.max())

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.values))

    def integral(self) -> float:
        return float(self.values.sum() * self.domain.cell_volume())
