from dataclasses import dataclass
from typing import Optional, Sequence, Tuple
import re

import numpy as np
from scipy.integrate import trapezoid

from src.utils.constants import Tolerances
from src.utils.exceptions import EmptyWindowError


@dataclass(frozen=True)
class DtPolicy:
    """Time-step policy: a fixed dt, or adaptive with a safety factor."""
    mode: str
    dt: Optional[float] = None
    safety: float = Tolerances.ADAPTIVE_SAFETY

    @property
    def is_fixed(self) -> bool:
        return self.mode == "fixed"

    def __str__(self) -> str:
        if self.is_fixed:
            return f"fixed:{self.dt!r}"
        return f"adaptive:{self.safety!r}"


_NUMBER = r'[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?'
_POLICY_PATTERN = re.compile(
    rf'^\s*(?:(?P<mode>adaptive|fixed)\s*(?::\s*(?P<value>{_NUMBER}))?|(?P<bare>{_NUMBER}))\s*$',
    re.IGNORECASE,
)


def parse_dt_policy(policy_str: str) -> DtPolicy:
    """Parse a dt policy string into a DtPolicy.

    Formats supported:
    - "adaptive": stable_dt with the default safety factor
    - "adaptive:S": stable_dt with safety factor S
    - "fixed:DT" or a bare number: constant step DT

    Args:
        policy_str: String describing the policy (e.g., "adaptive", "fixed:1e-3", "0.01")

    Returns:
        DtPolicy describing the policy

    Raises:
        ValueError: If the policy string is invalid
    """
    if policy_str is None or not str(policy_str).strip():
        raise ValueError("dt policy cannot be empty")

    match = _POLICY_PATTERN.match(str(policy_str))
    if not match:
        raise ValueError(f"Invalid dt policy: {policy_str}")

    if match.group('bare') is not None:
        mode, value = "fixed", match.group('bare')
    else:
        mode, value = match.group('mode').lower(), match.group('value')

    if mode == "fixed":
        if value is None:
            raise ValueError("fixed dt policy needs a value, e.g. fixed:1e-3")
        dt = float(value)
        if not np.isfinite(dt) or dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        return DtPolicy(mode="fixed", dt=dt)

    safety = Tolerances.ADAPTIVE_SAFETY if value is None else float(value)
    if not np.isfinite(safety) or safety <= 0 or safety > 1:
        raise ValueError(f"adaptive safety factor must lie in (0, 1], got {safety}")
    return DtPolicy(mode="adaptive", safety=safety)


def window_indices(times: Sequence[float], lo: float, hi: float) -> range:
    """Indices of sorted times inside [lo, hi], with a relative tolerance."""
    times = np.asarray(times, dtype=float)
    tol = Tolerances.TIME_MATCH * max(1.0, abs(lo), abs(hi))
    start = int(np.searchsorted(times, lo - tol, side='left'))
    stop = int(np.searchsorted(times, hi + tol, side='right'))
    return range(start, max(start, stop))


def held_trapezoid(times: Sequence[float], values: Sequence[float], lo: float, hi: float) -> Tuple[float, float]:
    """Trapezoidal integral over [lo, hi] with the end samples held to the edges.

    Returns:
        (integral, coverage) where coverage is the sampled fraction of [lo, hi]

    Raises:
        EmptyWindowError: If no sample lies inside the interval
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0:
        raise EmptyWindowError(f"No samples inside [{lo}, {hi}]")

    length = hi - lo
    if length <= 0:
        return 0.0, 1.0

    t_first = max(times[0], lo)
    t_last = min(times[-1], hi)
    integral = float(trapezoid(values, times)) if times.size > 1 else 0.0
    integral += values[0] * (t_first - lo) + values[-1] * (hi - t_last)
    coverage = max(0.0, t_last - t_first) / length
    return integral, min(1.0, coverage)
