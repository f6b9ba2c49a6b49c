import numpy as np
import pytest

from src.models.fields import ScalarField
from src.models.flow import FlowConfig, Trajectory
from src.models.lattice import SiteSet, build_domain
from src.models.potentials import PotentialSpec
from src.services.field_service import constant_field
from src.services.potential_service import PotentialService
from src.services.regularity_service import (
    RegularityService,
    bad_set,
    parabolic_delta,
    subsolution_constant,
    vitali_cover,
)
from src.storage.constants_store import CalibratedConstants
from src.utils.exceptions import DomainError, UnsupportedFamilyError, ValidationError
from src.utils.time_utils import parse_dt_policy

REFLECTION = np.diag([1.0, -1.0])


def cluster(domain, corner):
    """3x3 block of sites with the given lower corner."""
    return [
        int(np.ravel_multi_index((corner[0] + i, corner[1] + j), domain.shape))
        for i in range(3) for j in range(3)
    ]


def test_parabolic_delta():
    assert parabolic_delta(1.0) == 0.5
    assert parabolic_delta(0.5) == 0.5
    assert parabolic_delta(0.01) == pytest.approx(1 / np.sqrt(np.log(100)))


def test_bad_set_threshold(domain2):
    values = np.zeros(domain2.site_count)
    values[[3, 40]] = [2.0, 5.0]
    e = ScalarField(domain2, values, "e")
    assert bad_set(e, 0.5).as_set() == {3, 40}
    assert bad_set(e, 0.25).as_set() == {40}
    with pytest.raises(ValidationError):
        bad_set(e, 0.0)


def test_subsolution_constant(domain2):
    assert subsolution_constant(ScalarField(domain2, np.ones(domain2.site_count))) == 0.0
    assert subsolution_constant(ScalarField(domain2, np.zeros(domain2.site_count))) == 0.0
    x = domain2.coordinates[:, 0]
    e = ScalarField(domain2, 2 + np.cos(2 * np.pi * x))
    symbol = (2 / domain2.h ** 2) * (1 - np.cos(2 * np.pi * domain2.h))
    # the ratio symbol * cos / (2 + cos) peaks where cos = 1
    assert subsolution_constant(e) == pytest.approx(symbol / 3, rel=1e-10)


@pytest.mark.parametrize("reverse", [False, True])
def test_vitali_cover_two_clusters(reverse):
    domain = build_domain(2, 32, 1.0)
    sites = cluster(domain, (4, 4)) + cluster(domain, (20, 20))
    if reverse:
        sites = sites[::-1]
    cover = vitali_cover(domain, SiteSet(sites, domain), 0.05, dimension=1.0)
    assert cover.covered
    assert cover.count == 2
    assert cover.measure == pytest.approx(2 * 0.15)


def test_vitali_cover_on_random_site_sets(domain2, rng):
    coords = domain2.coordinates
    for _ in range(1000):
        size = int(rng.integers(1, 41))
        sites = rng.choice(domain2.site_count, size=size, replace=False)
        r = rng.uniform(0.02, 0.3)
        cover = vitali_cover(domain2, SiteSet(sites, domain2), r, dimension=1.0)
        assert cover.covered
        assert set(cover.centers) <= set(sites.tolist())

        centers = coords[cover.centers]
        gap = centers[:, None, :] - centers[None, :, :]
        gap -= np.round(gap)
        pairwise = np.sqrt(np.sum(gap ** 2, axis=-1))
        np.fill_diagonal(pairwise, np.inf)
        assert np.all(pairwise > 2 * r)

        reach = coords[sites][:, None, :] - centers[None, :, :]
        reach -= np.round(reach)
        nearest = np.min(np.sqrt(np.sum(reach ** 2, axis=-1)), axis=1)
        assert np.all(nearest <= 3 * r * (1 + 1e-9))


def test_vitali_cover_edge_cases(domain2):
    empty = vitali_cover(domain2, SiteSet([], domain2), 0.1)
    assert empty.count == 0
    assert empty.covered
    with pytest.raises(ValidationError):
        vitali_cover(domain2, SiteSet([0], domain2), 0.0)


def test_moser_elliptic_on_constant_density(domain2, smoothed_spec):
    service = RegularityService(smoothed_spec)
    e = ScalarField(domain2, np.ones(domain2.site_count))
    check = service.moser_elliptic_check(e, C0=0.0, x0=0, R=0.2)
    assert check.lhs == 1.0
    # C2 / (R/2)^2 times the ball area
    assert check.rhs == pytest.approx(16 / 0.1 ** 2 * np.pi * 0.2 ** 2)
    assert check.passed

    with pytest.raises(ValidationError):
        service.moser_elliptic_check(ScalarField(domain2, -np.ones(domain2.site_count)), 0.0, 0, 0.2)
    with pytest.raises(DomainError):
        service.moser_elliptic_check(e, 0.0, 0, 0.2, delta=1.0)
    with pytest.raises(DomainError):
        service.moser_elliptic_check(e, 0.0, 0, domain2.R_M)


def test_moser_c0_uses_uniform_bound(smoothed_spec, reflection_field):
    service = RegularityService(smoothed_spec)
    e = service.potential.energy_density(reflection_field)
    assert service.moser_c0(e) == service.potential.hessian_bound()[0]
    singular = RegularityService(PotentialSpec("Singular"))
    assert singular.moser_c0(e) == 0.0


def test_moser_parabolic_on_time_constant_field(smoothed_spec):
    domain = build_domain(2, 64, 1.0)
    field = constant_field(domain, REFLECTION)
    trajectory = Trajectory()
    for step in range(11):
        trajectory.add_snapshot(field.with_data(field.data, step * 1e-4), step)
    service = RegularityService(smoothed_spec)
    check = service.moser_parabolic_check(trajectory, C0=0.0, x0=0, t0=5e-4, R=0.01)
    c = PotentialService(smoothed_spec).potential_value(REFLECTION)
    assert check.lhs == pytest.approx(c)
    assert check.passed


def test_h_profile(domain2, smoothed_spec):
    service = RegularityService(smoothed_spec)
    e = ScalarField(domain2, np.ones(domain2.site_count))
    profile = service.h_profile(e, 0, R1=0.15, p0=1.0, sigmas=[0.0, 0.05, 0.1])
    np.testing.assert_allclose(profile.values, [0.15, 0.1, 0.05])
    assert profile.sigma_max == 0.0
    assert profile.site_max == 0
    with pytest.raises(DomainError):
        service.h_profile(e, 0, R1=0.2, p0=1.0, sigmas=[0.0])
    with pytest.raises(DomainError):
        service.h_profile(e, 0, R1=0.15, p0=1.0, sigmas=[0.15])


def test_elliptic_scan_triggers_everywhere_with_large_threshold(reflection_field, smoothed_spec):
    service = RegularityService(smoothed_spec)
    report = service.epsilon_scan_elliptic(reflection_field, 2.0, centers=[0, 5], radii=[0.1, 0.2], eps0=1e6)
    assert len(report.triggered) == 4
    assert report.trigger_keys() == {(0, None, 0.1), (0, None, 0.2), (5, None, 0.1), (5, None, 0.2)}
    c = PotentialService(smoothed_spec).potential_value(REFLECTION)
    # sup e over (delta R)^0 divided by b
    assert report.max_implied_constant == pytest.approx(c / 0.1)
    for probe in report.probes:
        assert probe.fixed_sigma_constant == pytest.approx(1 / (2 * np.pi))


def test_elliptic_scan_empty_with_tiny_threshold(reflection_field, smoothed_spec):
    service = RegularityService(smoothed_spec)
    report = service.epsilon_scan_elliptic(reflection_field, 2.0, centers=[0], radii=[0.1], eps0=1e-6)
    assert report.empty
    assert report.max_implied_constant == 0.0
    with pytest.raises(DomainError):
        service.epsilon_scan_elliptic(reflection_field, 2.0, centers=[0], radii=[0.1], delta=0.9)


def test_default_eps0_scales_with_b():
    constants = CalibratedConstants(eps_C=2.0)
    service = RegularityService(PotentialSpec("HigherPower", b=0.01, L=2), constants)
    assert service.default_eps0() == pytest.approx(0.1 / 4)


def test_cover_radius_and_dimension():
    smoothed = RegularityService(PotentialSpec("Smoothed", b=0.01))
    assert smoothed.cover_radius(0.01) == pytest.approx(0.04)
    assert smoothed.cover_dimension(2) == 1.0
    assert smoothed.cover_dimension(3) == 2.0
    higher = RegularityService(PotentialSpec("HigherPower", b=0.01, L=2))
    assert higher.cover_dimension(3) == pytest.approx(2 / 3 + 1)


def test_hausdorff_at_scale_without_bad_sites(domain2, smoothed_spec):
    service = RegularityService(smoothed_spec)
    e = ScalarField(domain2, np.zeros(domain2.site_count))
    row = service.hausdorff_at_scale(e, 0.1, E0=1.0)
    assert row.count == 0
    assert row.measure == 0.0
    assert row.ratio == 0.0
    assert np.isnan(service.hausdorff_at_scale(e, 0.1, E0=0.0).ratio)


def test_sup_e_bounds(domain2, smoothed_spec):
    service = RegularityService(smoothed_spec)
    e = ScalarField(domain2, np.ones(domain2.site_count))
    row = service.sup_e_bounds(e, E_b=1.0, b=0.1)
    assert row.bound1 == pytest.approx(10 * 0.1 ** -2)
    assert row.bound2 == pytest.approx(10 * 0.1 ** -3)
    assert np.isnan(row.bound_p0)
    assert row.passed
    with pytest.raises(UnsupportedFamilyError):
        RegularityService(PotentialSpec("Singular")).sup_e_bounds(e, 1.0, 0.1)


def test_sweeps_reject_bad_b_lists(reflection_field, smoothed_spec):
    service = RegularityService(smoothed_spec)
    config = FlowConfig(dt_policy=parse_dt_policy("fixed:0.001"), t_end=0.01)
    with pytest.raises(ValidationError):
        service.hausdorff_sweep(reflection_field, config, [0.1, 1.0])
    with pytest.raises(ValidationError):
        service.hausdorff_sweep(reflection_field, config, [])
    with pytest.raises(UnsupportedFamilyError):
        RegularityService(PotentialSpec("HigherPower", b=0.1, L=2)).sup_e_bound_sweep(
            reflection_field, config, [1.0]
        )


def test_small_sweeps(reflection_field, smoothed_spec):
    service = RegularityService(smoothed_spec)
    config = FlowConfig(dt_policy=parse_dt_policy("fixed:0.001"), t_end=0.01, snapshot_stride=5)
    summary = service.hausdorff_sweep(reflection_field, config, [1.0, 0.5])
    assert [row.b for row in summary.rows] == [1.0, 0.5]
    assert all(row.status == "ok" for row in summary.rows)
    # e stays below 1/b, so every bad set is empty
    assert all(row.count == 0 for row in summary.rows)
    assert summary.bounded_variation

    sup_summary = service.sup_e_bound_sweep(reflection_field, config, [1.0, 0.5])
    assert len(sup_summary.rows) == 2
    assert sup_summary.slope is not None
    assert all(row.sup_e > 0 for row in sup_summary.rows)
