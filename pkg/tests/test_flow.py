import numpy as np
import pytest

from src.models.fields import SymmetricMatrixField
from src.models.flow import FlowConfig, StepRecord, Trajectory
from src.models.lattice import build_domain
from src.models.potentials import PotentialSpec
from src.services.field_service import constant_field, grassmannian_winding_field
from src.services.flow_service import FlowService, laplacian_symbol
from src.utils.constants import Integrator, RunStatus
from src.utils.exceptions import UnsupportedFamilyError, ValidationError
from src.utils.time_utils import parse_dt_policy


def winding_scenario(n=32, m=2, seed=7, perturbation=0.3):
    domain = build_domain(m, n, 1.0)
    winding = [1] + [0] * (m - 1)
    return grassmannian_winding_field(domain, winding=winding, seed=seed, perturbation=perturbation)


def test_laplacian_symbol(domain2):
    symbol = laplacian_symbol(domain2)
    assert symbol.shape == domain2.shape
    assert symbol[0, 0] == 0.0
    assert symbol.max() == pytest.approx(4 * domain2.m / domain2.h ** 2)


def test_stable_dt_rules(domain2, smoothed_spec, disabled_spec):
    flow = FlowService(smoothed_spec)
    uniform, _ = flow.potential.hessian_bound()
    assert flow.stable_dt(domain2) == pytest.approx(0.9 * 0.25 / uniform)
    explicit = flow.stable_dt(domain2, Integrator.EXPLICIT_EULER)
    assert explicit == pytest.approx(0.9 * min(domain2.h ** 2 / 4, 0.25 / uniform))

    heat = FlowService(disabled_spec)
    assert heat.stable_dt(domain2, Integrator.EXPLICIT_EULER) == pytest.approx(0.9 * domain2.h ** 2 / 4)
    with pytest.raises(UnsupportedFamilyError):
        heat.stable_dt(domain2, Integrator.SPECTRAL_IMEX)
    with pytest.raises(UnsupportedFamilyError):
        FlowService(PotentialSpec("Singular")).stable_dt(domain2)


def test_flow_config_validation():
    with pytest.raises(ValidationError):
        FlowConfig(t_end=0.0)
    with pytest.raises(ValidationError):
        FlowConfig(snapshot_stride=0)
    assert FlowConfig(dt_policy="fixed:0.01").dt_policy.dt == 0.01


def test_heat_flow_matches_exact_semigroup(disabled_spec):
    domain = build_domain(2, 16, 1.0)
    x = domain.coordinates[:, 0]
    amplitude = np.cos(2 * np.pi * 3 * x)
    mats = amplitude[:, None, None] * np.array([[1.0, 0.5], [0.5, -2.0]])
    initial = SymmetricMatrixField.from_matrices(domain, mats)

    config = FlowConfig(dt_policy=parse_dt_policy("fixed:0.001"), t_end=0.02, snapshot_stride=5)
    trajectory = FlowService(disabled_spec).run_flow(initial, config)
    mu = (2 / domain.h ** 2) * (1 - np.cos(2 * np.pi * 3 * domain.h))
    np.testing.assert_allclose(trajectory.final.data, np.exp(-mu * 0.02) * initial.data, atol=1e-12)
    assert trajectory.final.t == pytest.approx(0.02)


def test_stationary_constant_field(reflection_field, disabled_spec):
    config = FlowConfig(dt_policy=parse_dt_policy("fixed:0.001"), t_end=0.1, snapshot_stride=10)
    trajectory = FlowService(disabled_spec).run_flow(reflection_field, config)
    assert trajectory.status == RunStatus.COMPLETED
    assert trajectory.step_count == 100
    # initial plus one snapshot every 10 steps
    assert len(trajectory.snapshots) == 11
    assert trajectory.snapshot_steps == list(range(0, 101, 10))
    # FFT round-off only
    assert max(abs(record.E) for record in trajectory.series) < 1e-20
    assert max(record.residual for record in trajectory.series) < 1e-10
    np.testing.assert_allclose(trajectory.final.data, reflection_field.data, atol=1e-14)


def test_max_steps_caps_run(reflection_field, disabled_spec):
    config = FlowConfig(dt_policy=parse_dt_policy("fixed:0.001"), t_end=1.0, snapshot_stride=4, max_steps=10)
    trajectory = FlowService(disabled_spec).run_flow(reflection_field, config)
    assert trajectory.step_count == 10
    assert trajectory.snapshot_steps == [0, 4, 8, 10]


def test_step_record_row_order():
    record = StepRecord(t=1.0, E=2.0, kinetic=3.0, potential=4.0, sup_e=5.0, residual=6.0, dEdt=7.0, dissipation=8.0)
    assert record.as_row() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]


def test_trajectory_rejects_out_of_order_snapshots(reflection_field):
    trajectory = Trajectory()
    trajectory.add_snapshot(reflection_field.with_data(reflection_field.data, 1.0), 0)
    with pytest.raises(ValidationError):
        trajectory.add_snapshot(reflection_field.with_data(reflection_field.data, 0.5), 1)


def test_dissipation_report_needs_two_steps(reflection_field, disabled_spec):
    config = FlowConfig(dt_policy=parse_dt_policy("fixed:0.001"), t_end=0.001)
    flow = FlowService(disabled_spec)
    trajectory = flow.run_flow(reflection_field, config)
    with pytest.raises(ValidationError):
        flow.dissipation_report(trajectory)


def test_singular_explicit_run_diverges():
    domain = build_domain(2, 16, 1.0)
    initial = grassmannian_winding_field(domain, winding=[1, 0], seed=3, perturbation=0.5)
    config = FlowConfig(
        dt_policy=parse_dt_policy("fixed:0.01"), t_end=1.0, snapshot_stride=5,
        integrator=Integrator.EXPLICIT_EULER, max_steps=100,
    )
    trajectory = FlowService(PotentialSpec("Singular")).run_flow(initial, config)
    assert trajectory.status == RunStatus.DIVERGED
    assert trajectory.divergence is not None
    assert trajectory.divergence.step <= 100
    # the last good state is kept
    assert trajectory.snapshot_steps[-1] == trajectory.divergence.step - 1
    assert np.all(np.isfinite(trajectory.final.data))
    assert len(trajectory.eigen_trace) == trajectory.step_count


def test_orthogonal_equivariance(smoothed_spec):
    initial = winding_scenario(n=16)
    angle = 0.7
    Q = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    config = FlowConfig(t_end=1.0, max_steps=20, snapshot_stride=20)
    flow = FlowService(smoothed_spec)
    plain = flow.run_flow(initial, config)
    rotated = flow.run_flow(initial.conjugated(Q), config)
    np.testing.assert_allclose(rotated.final.data, plain.final.conjugated(Q).data, atol=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("m, n", [(2, 32), (3, 12)])
@pytest.mark.parametrize("b", [1.0, 0.1, 0.01])
@pytest.mark.parametrize("L", [1, 2])
def test_energy_nonincreasing(m, n, b, L):
    family = "Smoothed" if L == 1 else "HigherPower"
    spec = PotentialSpec(family, b=b, L=L)
    initial = winding_scenario(n=n, m=m)
    config = FlowConfig(t_end=1.0, max_steps=100, snapshot_stride=50)
    trajectory = FlowService(spec).run_flow(initial, config)
    assert trajectory.status == RunStatus.COMPLETED
    E0 = trajectory.initial_energy.total
    energies = [E0] + [record.E for record in trajectory.series]
    assert all(later <= earlier + 1e-10 * E0 for earlier, later in zip(energies, energies[1:]))


@pytest.mark.slow
def test_dissipation_identity_and_first_order_mismatch(smoothed_spec):
    initial = winding_scenario(n=32, perturbation=0.05)
    flow = FlowService(smoothed_spec)
    dt = flow.stable_dt(initial.domain)
    t_end = 500 * dt
    full = flow.run_flow(initial, FlowConfig(dt_policy=parse_dt_policy(f"fixed:{dt!r}"), t_end=t_end,
                                             snapshot_stride=500))
    half = flow.run_flow(initial, FlowConfig(dt_policy=parse_dt_policy(f"fixed:{dt / 2!r}"), t_end=t_end,
                                             snapshot_stride=1000))
    assert len(full.series) == 500
    assert len(half.series) == 1000
    worst_full = flow.dissipation_report(full).worst
    worst_half = flow.dissipation_report(half).worst
    assert worst_full <= 0.05
    # the exponential Euler defect is first order in dt
    assert 1.4 <= worst_full / worst_half <= 2.6
