from enum import Enum


class PotentialFamily(str, Enum):
    """Repulsive potential families."""
    SINGULAR = "Singular"
    SMOOTHED = "Smoothed"
    HIGHER_POWER = "HigherPower"


class Integrator(str, Enum):
    """Time integrators for the gradient flow."""
    EXPLICIT_EULER = "ExplicitEuler"
    SPECTRAL_IMEX = "SpectralIMEX"


class PhiWeighting(str, Enum):
    """Integrands of the elliptic monotonicity functional."""
    # (1/2)|df|^2 + m/(m-2) W
    CHAPTER_MONO = "ChapterMono"
    # (1 + nu(r, x)) e
    CHAPTER_EPS = "ChapterEps"


class RunStatus(str, Enum):
    """Outcome of a flow run."""
    COMPLETED = "completed"
    DIVERGED = "diverged"


class ExitCode:
    OK = 0
    ERROR = 1
    CONFIG_ERROR = 2
    DIVERGED = 3


class SnapshotFormat:
    MAGIC = b"SGF1"
    VERSION = 1
    # magic, version, m, n_per_axis, period, l, t
    HEADER_STRUCT = "<4sIIIdId"
    PAYLOAD_DTYPE = "<f8"
    FILE_PATTERN = "snapshot_{step:08d}.sgf"
    GLOB = "snapshot_*.sgf"


class Tolerances:
    """Numerical thresholds shared across services."""
    DT_SAFETY = 0.9
    ADAPTIVE_SAFETY = 0.25
    EIGEN_GAP_REL = 1e-8
    DIVIDED_DIFFERENCE_REL = 1e-7
    HESSIAN_MARGIN = 1.05
    CALIBRATION_MARGIN = 1.25
    MONOTONICITY_SLACK = 1e-2
    STATIONARY_GATE = 1e-3
    STRIP_COVERAGE = 0.8
    DISSIPATION_FLOOR = 1e-10
    DIVERGENCE_GROWTH = 1e8
    TIME_MATCH = 1e-12
    PROJECTION_TOL = 1e-6
    SINGULAR_EIGEN = 1e-12
    # rescaled eigenvalue window and resolution for hessian_bound sampling
    HESSIAN_GRID_HALFWIDTH = 6.0
    HESSIAN_GRID_POINTS = 1201


class Defaults:
    DELTA = 0.5
    SNAPSHOT_STRIDE = 10
    MOSER_C2 = 16.0
    BOUNDED_VARIATION_BAND = 3.0
    # radii for profile scans, in units of h
    PROFILE_RADII = (4, 6, 8, 12, 16)
    CALIBRATION_B = (1.0, 0.1, 0.01)
    CALIBRATION_L = (1, 2)
    CALIBRATION_M = (2, 3)


class CsvColumns:
    """Header rows of every emitted table."""
    SERIES = ["t", "E", "kinetic", "potential", "sup_e", "residual", "dEdt", "dissipation"]
    PHI_PROFILE = ["center", "R", "phi_mono", "phi_eps", "p0"]
    PSI_CHECKS = [
        "center", "t0", "R", "R0", "psi_R", "psi_R0", "E0", "rhs",
        "C_hat_min", "coverage", "low_coverage", "pass",
    ]
    MOSER_CHECKS = ["kind", "center", "t0", "R", "delta", "C0", "C1", "C2", "lhs", "rhs", "ratio", "pass"]
    EPSREG = [
        "center", "t0", "R", "delta", "value", "eps0", "triggered",
        "sup_delta", "sup_half_delta", "implied_constant", "fixed_sigma_constant",
    ]
    BADSET_SWEEP = ["b", "L", "r", "J", "dimension", "H", "E0", "ratio", "stationary", "status"]
    SUP_E_SWEEP = [
        "b", "E_b", "sup_e", "bound1", "bound2", "bound_p0", "fallback_bound",
        "higher_power_bound", "C", "pass", "status",
    ]


class Messages:
    RUN_COMPLETED = "Flow run completed"
    RUN_DIVERGED = "Flow run diverged"
    ANALYSIS_DONE = "Analysis reports written"
    SWEEP_DONE = "Sweep tables written"
    CALIBRATION_DONE = "Calibrated constants written"
