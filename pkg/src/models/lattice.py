"""Periodic flat-torus lattice: site indexing, wrapped distances, balls, shells and cylinders."""
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Tuple, Union
import logging

import numpy as np
from scipy.special import gamma

from src.utils.constants import Tolerances
from src.utils.exceptions import ConfigError, DomainError, EmptyWindowError, ValidationError
from src.utils.time_utils import window_indices

logger = logging.getLogger(__name__)

Point = Union[int, np.integer, Sequence[float], np.ndarray]


def unit_ball_volume(m: int) -> float:
    """Volume of the unit ball in R^m."""
    return float(np.pi ** (m / 2) / gamma(m / 2 + 1))


@dataclass(frozen=True)
class LatticeDomain:
    """Uniform periodic grid on the torus [0, period)^m."""
    m: int
    n_per_axis: int
    period: float

    @property
    def h(self) -> float:
        return self.period / self.n_per_axis

    @property
    def R_M(self) -> float:
        # Radius of cutoff supports; stays below half the period
        return self.period / 4

    @property
    def site_count(self) -> int:
        return self.n_per_axis ** self.m

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n_per_axis,) * self.m

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Site coordinates, shape (site_count, m), row-major site order."""
        idx = np.indices(self.shape).reshape(self.m, -1).T
        coords = idx * self.h
        coords.setflags(write=False)
        return coords

    def cell_volume(self) -> float:
        return self.h ** self.m

    def point(self, site: Point) -> np.ndarray:
        """Coordinates of a site index, or a coordinate vector passed through."""
        if isinstance(site, (int, np.integer)):
            if not 0 <= int(site) < self.site_count:
                raise DomainError(f"Site index {site} out of range [0, {self.site_count})", quantity="site")
            return self.coordinates[int(site)]
        point = np.asarray(site, dtype=float)
        if point.shape[-1] != self.m:
            raise ValidationError(f"Point has {point.shape[-1]} coordinates, domain has m={self.m}", field="point")
        return point

    def displacement(self, origin: Point, points: np.ndarray = None) -> np.ndarray:
        """Wrapped displacement points - origin with each component in [-period/2, period/2]."""
        origin = self.point(origin)
        points = self.coordinates if points is None else np.asarray(points, dtype=float)
        delta = points - origin
        return delta - self.period * np.round(delta / self.period)

    def periodic_distance(self, x: Point, y: Point) -> float:
        """Euclidean distance with per-axis wrap."""
        delta = self.displacement(x, self.point(y))
        return float(np.sqrt(np.sum(delta ** 2, axis=-1)))

    def distances_from(self, center: Point) -> np.ndarray:
        """Periodic distance from center to every site."""
        delta = self.displacement(center)
        return np.sqrt(np.sum(delta ** 2, axis=-1))

    def _check_radius(self, R: float):
        if not 0 < R < self.period / 2:
            raise DomainError(f"Radius {R} must lie in (0, {self.period / 2})", quantity="radius")

    def ball_sites(self, center: Point, R: float) -> "SiteSet":
        """All sites within periodic distance R of center."""
        self._check_radius(R)
        dist = self.distances_from(center)
        tol = Tolerances.TIME_MATCH * self.period
        return SiteSet(np.nonzero(dist <= R + tol)[0], self)

    def ball_quadrature(self, center: Point, R: float) -> Tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and weights for integrals over B_R(center).

        Weights ramp linearly across one cell at the boundary and are
        rescaled so they sum to the exact ball volume.
        """
        self._check_radius(R)
        dist = self.distances_from(center)
        ramp = np.clip(0.5 + (R - dist) / self.h, 0.0, 1.0)
        indices = np.nonzero(ramp > 0)[0]
        raw = ramp[indices]
        weights = raw * (unit_ball_volume(self.m) * R ** self.m / raw.sum())
        return indices, weights

    def shell_sites(self, center: Point, R: float, width: float = None) -> "SiteSet":
        """Sites in the annulus R - width/2 <= d < R + width/2."""
        width = self.h if width is None else width
        if width < self.h * (1 - 1e-12):
            raise DomainError(f"Shell width {width} must be at least h={self.h}", quantity="width")
        if R - width / 2 < -1e-12 * self.period or R + width / 2 >= self.period / 2:
            raise DomainError(
                f"Shell [{R - width / 2}, {R + width / 2}) must lie inside [0, {self.period / 2})",
                quantity="radius",
            )
        dist = self.distances_from(center)
        inside = (dist >= R - width / 2) & (dist < R + width / 2)
        return SiteSet(np.nonzero(inside)[0], self)

    def shell_weight(self, width: float = None) -> float:
        """Surface weight of one shell site: h^m / width."""
        width = self.h if width is None else width
        return self.cell_volume() / width

    def cylinder_window(
        self,
        times: Sequence[float],
        x0: Point,
        t0: float,
        R: float,
        strip: bool = False,
    ) -> Tuple["SiteSet", range]:
        """Ball sites and snapshot indices of P_R(z0), or of the strip T_R when strip is set."""
        self._check_radius(R)
        times = np.asarray(times, dtype=float)
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValidationError("Snapshot times must be strictly increasing", field="times")
        if strip:
            window = window_indices(times, t0 - 4 * R ** 2, t0 - R ** 2)
        else:
            window = window_indices(times, t0 - R ** 2, t0 + R ** 2)
        if len(window) == 0:
            kind = "strip" if strip else "cylinder"
            raise EmptyWindowError(f"No snapshots in the {kind} of radius {R} at t0={t0}")
        return self.ball_sites(x0, R), window


class SiteSet:
    """Ordered set of distinct site indices of one domain."""

    def __init__(self, indices: Sequence[int], domain: LatticeDomain):
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        if indices.size and (indices.min() < 0 or indices.max() >= domain.site_count):
            raise ValidationError("Site index out of range", field="indices")
        if np.unique(indices).size != indices.size:
            raise ValidationError("Site indices must be unique", field="indices")
        indices.setflags(write=False)
        self.indices = indices
        self.domain = domain

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self):
        return iter(int(i) for i in self.indices)

    def __contains__(self, site) -> bool:
        return bool(np.any(self.indices == int(site)))

    def as_set(self) -> set:
        return set(int(i) for i in self.indices)

    def __repr__(self) -> str:
        return f"SiteSet({len(self)} sites)"


def build_domain(m: int, n_per_axis: int, period: float) -> LatticeDomain:
    """Validate the grid parameters and build a domain."""
    if int(m) != m or m < 2:
        raise ConfigError(f"Dimension m must be an integer >= 2, got {m}", config_key="domain.m")
    if int(n_per_axis) != n_per_axis or n_per_axis < 4:
        raise ConfigError(f"n_per_axis must be an integer >= 4, got {n_per_axis}", config_key="domain.n_per_axis")
    if not np.isfinite(period) or period <= 0:
        raise ConfigError(f"period must be positive, got {period}", config_key="domain.period")
    domain = LatticeDomain(int(m), int(n_per_axis), float(period))
    logger.debug(f"Built domain m={domain.m} n={domain.n_per_axis} period={domain.period} h={domain.h}")
    return domain
