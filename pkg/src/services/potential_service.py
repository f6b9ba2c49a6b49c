"""Potential families W_b, their derivatives and the energy functional."""
from functools import lru_cache
from typing import Sequence, Tuple
import logging

import numpy as np

from src.models.fields import ScalarField, SymmetricMatrixField, pack
from src.models.lattice import LatticeDomain
from src.models.potentials import EnergyReport, PotentialSpec
from src.services.field_service import dirichlet_energy, kinetic_density, spatial_gradient
from src.utils.constants import PotentialFamily, Tolerances
from src.utils.exceptions import (
    AlignmentError,
    SingularPotentialError,
    UnsupportedFamilyError,
    ValidationError,
)

logger = logging.getLogger(__name__)


def _rescaled_g(s: np.ndarray, L: int) -> np.ndarray:
    """g(s) = s^(2L-1) / (s^(2L) + 1)^2, the b = 1 gradient profile."""
    return s ** (2 * L - 1) / (s ** (2 * L) + 1) ** 2


def _rescaled_g_prime(s: np.ndarray, L: int) -> np.ndarray:
    return s ** (2 * L - 2) * ((2 * L - 1) - (2 * L + 1) * s ** (2 * L)) / (s ** (2 * L) + 1) ** 3


@lru_cache(maxsize=None)
def _hessian_constants(L: int) -> Tuple[float, float]:
    """Sampled sup |g'| and L sup |Gamma(s, t)| min(s^2L + 1, t^2L + 1) over the rescaled plane."""
    s = np.linspace(-Tolerances.HESSIAN_GRID_HALFWIDTH, Tolerances.HESSIAN_GRID_HALFWIDTH,
                    Tolerances.HESSIAN_GRID_POINTS)
    g = _rescaled_g(s, L)
    g_prime = _rescaled_g_prime(s, L)
    c_uniform = float(np.max(np.abs(g_prime)))

    diff = s[:, None] - s[None, :]
    same = diff == 0
    gamma = np.where(same, g_prime[:, None], (g[:, None] - g[None, :]) / np.where(same, 1.0, diff))
    floor = np.minimum(s[:, None] ** (2 * L) + 1, s[None, :] ** (2 * L) + 1)
    c_quad = float(L * np.max(np.abs(gamma) * floor))
    logger.debug(f"Hessian constants for L={L}: uniform={c_uniform:.6g}, quadratic={c_quad:.6g}")
    return c_uniform, c_quad


class PotentialService:
    """Values, gradients and Hessian contractions of one potential family.

    Every matrix function goes through the per-site eigendecomposition.
    """

    def __init__(self, spec: PotentialSpec):
        self.spec = spec
        self.logger = logging.getLogger(__name__)

    # eigenvalue maps

    def _value_map(self, lam: np.ndarray) -> np.ndarray:
        if self.spec.disabled:
            return np.zeros_like(lam)
        if self.spec.family == PotentialFamily.SINGULAR:
            return 0.5 / lam ** 2
        L, b = self.spec.L, self.spec.b
        return 1.0 / (2 * L * (lam ** (2 * L) + b))

    def _gradient_map(self, lam: np.ndarray) -> np.ndarray:
        if self.spec.disabled:
            return np.zeros_like(lam)
        if self.spec.family == PotentialFamily.SINGULAR:
            return -1.0 / lam ** 3
        L, b = self.spec.L, self.spec.b
        return -lam ** (2 * L - 1) / (lam ** (2 * L) + b) ** 2

    def _gradient_map_prime(self, lam: np.ndarray) -> np.ndarray:
        if self.spec.disabled:
            return np.zeros_like(lam)
        if self.spec.family == PotentialFamily.SINGULAR:
            return 3.0 / lam ** 4
        L, b = self.spec.L, self.spec.b
        return -lam ** (2 * L - 2) * ((2 * L - 1) * b - (2 * L + 1) * lam ** (2 * L)) / (lam ** (2 * L) + b) ** 3

    def _loewner(self, lam: np.ndarray) -> np.ndarray:
        """Divided differences of the gradient map, (..., l) -> (..., l, l)."""
        li = lam[..., :, None]
        lj = lam[..., None, :]
        diff = li - lj
        near = np.abs(diff) < Tolerances.DIVIDED_DIFFERENCE_REL * (1 + np.abs(li))
        quotient = (self._gradient_map(li) - self._gradient_map(lj)) / np.where(near, 1.0, diff)
        return np.where(near, self._gradient_map_prime(0.5 * (li + lj)), quotient)

    def _eigh(self, matrices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Eigendecomposition with the singular-family zero-eigenvalue check."""
        lam, vecs = np.linalg.eigh(matrices)
        if self.spec.family == PotentialFamily.SINGULAR and not self.spec.disabled:
            magnitude = np.abs(lam).reshape(-1, lam.shape[-1])
            scale = max(1.0, float(np.max(magnitude)))
            smallest = np.min(magnitude, axis=1)
            if np.any(smallest <= Tolerances.SINGULAR_EIGEN * scale):
                site = int(np.argmin(smallest))
                raise SingularPotentialError(
                    f"Singular potential at a zero eigenvalue (min |lambda| = {smallest[site]:.3g})",
                    site=site if lam.ndim > 1 else None,
                )
        return lam, vecs

    def _as_matrix(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ValidationError(f"Expected a square matrix, got shape {f.shape}", field="matrix")
        if not np.array_equal(f, f.T):
            raise ValidationError("Matrix must be symmetric", field="matrix")
        return f

    # single matrices

    def potential_value(self, f) -> float:
        lam, _ = self._eigh(self._as_matrix(f))
        return float(np.sum(self._value_map(lam)))

    def potential_gradient(self, f) -> np.ndarray:
        lam, vecs = self._eigh(self._as_matrix(f))
        grad = (vecs * self._gradient_map(lam)) @ vecs.T
        return 0.5 * (grad + grad.T)

    def hessian_contraction(self, f, df: Sequence[np.ndarray]) -> float:
        """<d grad W(f), df> summed over directions, via the Loewner divided differences."""
        lam, vecs = self._eigh(self._as_matrix(f))
        gamma = self._loewner(lam)
        total = 0.0
        for direction in df:
            rotated = vecs.T @ np.asarray(direction, dtype=float) @ vecs
            total += float(np.sum(gamma * rotated ** 2))
        return total

    def singular_hessian_direct(self, f, df: Sequence[np.ndarray]) -> float:
        """|f^-1 X f^-1|^2 + 2 <f^-2 X, f^-1 X f^-1> summed over directions X."""
        if self.spec.family != PotentialFamily.SINGULAR:
            raise UnsupportedFamilyError("Direct Hessian form is only defined for Singular", family=self.spec.family.value)
        lam, vecs = self._eigh(self._as_matrix(f))
        inverse = (vecs / lam) @ vecs.T
        inverse_sq = inverse @ inverse
        total = 0.0
        for direction in df:
            X = np.asarray(direction, dtype=float)
            sandwich = inverse @ X @ inverse
            total += float(np.sum(sandwich * sandwich) + 2 * np.sum((inverse_sq @ X) * sandwich))
        return total

    # fields

    def pointwise_potential(self, field: SymmetricMatrixField) -> ScalarField:
        lam, _ = self._eigh(field.matrices())
        return ScalarField(field.domain, np.sum(self._value_map(lam), axis=1), "potential")

    def gradient_field(self, field: SymmetricMatrixField) -> SymmetricMatrixField:
        """grad W(f) at every site."""
        if self.spec.disabled:
            return field.with_data(np.zeros_like(field.data))
        lam, vecs = self._eigh(field.matrices())
        grad = np.einsum('sik,sk,sjk->sij', vecs, self._gradient_map(lam), vecs)
        return field.with_data(pack(0.5 * (grad + np.swapaxes(grad, 1, 2))))

    def hessian_contraction_field(self, field: SymmetricMatrixField) -> ScalarField:
        """Per-site <d grad W(f), df> with df from central differences."""
        lam, vecs = self._eigh(field.matrices())
        gamma = self._loewner(lam)
        total = np.zeros(field.domain.site_count)
        for component in spatial_gradient(field).matrices():
            rotated = np.einsum('sji,sjk,skl->sil', vecs, component, vecs)
            total += np.sum(gamma * rotated ** 2, axis=(1, 2))
        return ScalarField(field.domain, total, "hessian")

    def energy_density(self, field: SymmetricMatrixField) -> ScalarField:
        """e(f) = 1/2 |df|^2 + W(f) per site."""
        values = kinetic_density(field).values + self.pointwise_potential(field).values
        return ScalarField(field.domain, values, "e")

    def total_energy(self, field: SymmetricMatrixField) -> EnergyReport:
        kinetic = dirichlet_energy(field)
        potential = self.pointwise_potential(field).integral()
        density = self.energy_density(field)
        return EnergyReport(
            total=kinetic + potential,
            kinetic=kinetic,
            potential=potential,
            sup_e=density.sup,
            sup_site=density.argmax,
            t=field.t,
        )

    # bounds

    def hessian_bound(self) -> Tuple[float, float]:
        """(uniform, quadratic) coefficients with |Hess| <= uniform |df|^2 and <= 2 quadratic e |df|^2."""
        if self.spec.disabled:
            return 0.0, 0.0
        if self.spec.family == PotentialFamily.SINGULAR:
            raise UnsupportedFamilyError("Singular potential has no uniform Hessian bound", family=self.spec.family.value)
        L, b = self.spec.L, self.spec.b
        c_uniform, c_quad = _hessian_constants(L)
        margin = Tolerances.HESSIAN_MARGIN
        return margin * c_uniform * b ** (-1.0 - 1.0 / L), margin * c_quad * b ** (-1.0 / L)

    def interpolated_hessian_bound(self, q: float) -> float:
        """Coefficient c with |Hess| <= c e^(2-q), 0 <= q <= 1."""
        if not 0 <= q <= 1:
            raise ValidationError(f"Interpolation exponent must lie in [0, 1], got {q}", field="q")
        uniform, quad = self.hessian_bound()
        return float(2 * uniform ** q * (2 * quad) ** (1 - q))

    def scaling_check(self, field: SymmetricMatrixField, factor: int) -> Tuple[float, float]:
        """(E(f~), factor^-(m-1) E(f)) for f~(y) = f(factor y) / sqrt(factor) on the shrunken torus."""
        if self.spec.family != PotentialFamily.SINGULAR:
            raise UnsupportedFamilyError("Scaling identity holds for the Singular family only", family=self.spec.family.value)
        domain = field.domain
        if int(factor) != factor or factor < 1:
            raise ValidationError(f"Scaling factor must be a positive integer, got {factor}", field="factor")
        factor = int(factor)
        if domain.n_per_axis % factor != 0:
            raise AlignmentError(f"Factor {factor} does not divide n_per_axis={domain.n_per_axis}")
        if domain.n_per_axis // factor < 4:
            raise AlignmentError(f"Factor {factor} leaves fewer than 4 sites per axis of {domain.n_per_axis}")

        scaled_domain = LatticeDomain(domain.m, domain.n_per_axis // factor, domain.period / factor)
        grid = field.grid()[(slice(None, None, factor),) * domain.m]
        scaled = SymmetricMatrixField(scaled_domain, field.l, grid.reshape(-1, grid.shape[-1]) / np.sqrt(factor), field.t)

        lhs = self.total_energy(scaled).total
        rhs = factor ** (-(domain.m - 1)) * self.total_energy(field).total
        self.logger.debug(f"Scaling check factor={factor}: lhs={lhs:.6g} rhs={rhs:.6g}")
        return lhs, rhs
