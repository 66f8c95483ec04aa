"""Pulse sequences for calibration, Ramsey and echo experiments.

Fine delays are represented as carrier phases and coarse delays as the
spacing of pulse centres; the rotating-frame model only sees those two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .errors import CalibrationError, InvalidArgument
from .model import Drive, PhysicalParams
from .qcore import DensityMatrix, Level
from .solver import SolverConfig, evolve, eventual_emission

__all__ = [
    "PulseSequence",
    "single",
    "ramsey_pair",
    "echo_triple",
    "sequence_emission",
    "PiCalibration",
    "calibrate_pi",
    "MIN_SEPARATION",
]

#: minimum pulse spacing in units of sigma for non-overlapping sequences
MIN_SEPARATION = 3.0


@dataclass(frozen=True)
class PulseSequence:
    """Drives from one laser: sorted by centre, sharing ``sigma`` and ``delta_b``."""

    drives: tuple[Drive, ...]
    delta_b: float = 0.0

    def __init__(self, drives: Sequence[Drive], delta_b: float | None = None):
        drives = tuple(drives)
        for d in drives:
            if not isinstance(d, Drive):
                raise InvalidArgument(f"expected Drive, got {type(d).__name__}")
        if delta_b is None:
            delta_b = drives[0].delta_b if drives else 0.0
        if not math.isfinite(delta_b):
            raise InvalidArgument("delta_b must be finite")
        if any(d.delta_b != delta_b for d in drives):
            raise InvalidArgument("all drives in one sequence must share delta_b")
        if len({d.sigma for d in drives}) > 1:
            raise InvalidArgument("all drives in one sequence must share sigma")
        drives = tuple(sorted(drives, key=lambda d: d.t_center))
        object.__setattr__(self, "drives", drives)
        object.__setattr__(self, "delta_b", float(delta_b))

    @property
    def sigma(self) -> float:
        return self.drives[0].sigma if self.drives else 4.0

    @property
    def span(self) -> tuple[float, float]:
        """First and last pulse centre (0, 0 for an empty sequence)."""
        if not self.drives:
            return 0.0, 0.0
        return self.drives[0].t_center, self.drives[-1].t_center

    def shifted(self, dt: float) -> "PulseSequence":
        return PulseSequence([Drive(d.omega_peak, d.sigma, d.t_center + dt, d.phase, d.delta_b)
                              for d in self.drives], self.delta_b)

    def with_detuning(self, delta_b: float) -> "PulseSequence":
        return PulseSequence([Drive(d.omega_peak, d.sigma, d.t_center, d.phase, delta_b)
                              for d in self.drives], delta_b)

    def __len__(self) -> int:
        return len(self.drives)


def single(omega_peak: float, t_center: float = 0.0, phase: float = 0.0,
           delta_b: float = 0.0, sigma: float = 4.0) -> PulseSequence:
    return PulseSequence([Drive(omega_peak, sigma, t_center, phase, delta_b)], delta_b)


def _check_spacing(gap: float, sigma: float, allow_overlap: bool, what: str):
    if not allow_overlap and not gap > MIN_SEPARATION * sigma:
        raise InvalidArgument(
            f"{what} = {gap:g} ps overlaps the pulses (needs > {MIN_SEPARATION:g} sigma "
            f"= {MIN_SEPARATION * sigma:g} ps); pass allow_overlap=True for laser-interference runs")


def ramsey_pair(omega_half: float, tau: float, fine_phase: float = 0.0, delta_b: float = 0.0,
                *, sigma: float = 4.0, phase_on: str = "second",
                allow_overlap: bool = False) -> PulseSequence:
    """Two equal pulses at ``0`` and ``tau``; one of them carries ``fine_phase``.

    ``phase_on`` selects ``"second"`` (default) or ``"first"``.
    """
    _check_spacing(tau, sigma, allow_overlap, "tau")
    if phase_on not in ("first", "second"):
        raise InvalidArgument(f"phase_on must be 'first' or 'second', got {phase_on!r}")
    p1, p2 = (fine_phase, 0.0) if phase_on == "first" else (0.0, fine_phase)
    return PulseSequence([Drive(omega_half, sigma, 0.0, p1, delta_b),
                          Drive(omega_half, sigma, float(tau), p2, delta_b)], delta_b)


def echo_triple(omega_half: float, tau: float, fine_phase: float = 0.0, delta_b: float = 0.0,
                *, sigma: float = 4.0, phase_on: str = "last",
                allow_overlap: bool = False) -> PulseSequence:
    """Pulses at ``0``, ``tau/2`` and ``tau``; the middle one has twice the
    intensity, i.e. ``sqrt(2)`` times the amplitude.

    ``phase_on`` selects whether ``"last"`` (default) or ``"middle"`` carries
    the fine phase.
    """
    _check_spacing(0.5 * tau, sigma, allow_overlap, "tau/2")
    if phase_on not in ("last", "middle"):
        raise InvalidArgument(f"phase_on must be 'last' or 'middle', got {phase_on!r}")
    pm, pl = (fine_phase, 0.0) if phase_on == "middle" else (0.0, fine_phase)
    return PulseSequence([Drive(omega_half, sigma, 0.0, 0.0, delta_b),
                          Drive(math.sqrt(2.0) * omega_half, sigma, 0.5 * tau, pm, delta_b),
                          Drive(omega_half, sigma, float(tau), pl, delta_b)], delta_b)


def sequence_emission(seq: PulseSequence, params: PhysicalParams,
                      config: SolverConfig | None = None, *, margin: float = 5.0,
                      delta_b: float | None = None,
                      rho0: DensityMatrix | None = None) -> tuple[float, float]:
    """Eventual ``(P_xx, P_x)`` after a sequence starting from the ground state.

    The master equation is integrated from ``margin`` sigma before the first
    pulse to ``margin`` sigma after the last one; the remaining dark cascade
    is added analytically (see :func:`~qdcascade.solver.eventual_emission`).
    """
    first, last = seq.span
    m = margin * seq.sigma
    rho0 = DensityMatrix.pure(Level.G) if rho0 is None else rho0
    traj = evolve(rho0, first - m, last + m, seq, params, config, delta_b=delta_b)
    return eventual_emission(traj)


class PiCalibration(NamedTuple):
    omega_pi: float
    omega_half: float


def calibrate_pi(params: PhysicalParams, delta_b: float = 0.0,
                 search_range: tuple[float, float] = (0.1, 4.0), *, sigma: float = 4.0,
                 coarse_points: int = 40, rtol: float = 1e-4,
                 config: SolverConfig | None = None) -> PiCalibration:
    """Locate the first maximum of single-pulse biexciton emission.

    A uniform scan over ``search_range`` brackets the first interior local
    maximum, which is refined by golden-section search to ``rtol``. The
    half-maximum amplitude is then found by bisection on the rising edge.

    Raises
    ------
    CalibrationError
        The scan finds no interior maximum.
    """
    lo, hi = (float(v) for v in search_range)
    if not (0.0 <= lo < hi and math.isfinite(hi)):
        raise InvalidArgument(f"bad search range {search_range!r}")
    if coarse_points < 5:
        raise InvalidArgument("coarse_points must be >= 5")

    def pxx(omega: float) -> float:
        return sequence_emission(single(omega, 0.0, 0.0, delta_b, sigma), params, config)[0]

    grid = np.linspace(lo, hi, coarse_points)
    values = np.array([pxx(w) for w in grid])
    peak = None
    for i in range(1, coarse_points - 1):
        if values[i] > values[i - 1] and values[i] >= values[i + 1]:
            peak = i
            break
    if peak is None:
        raise CalibrationError(
            f"no interior emission maximum in [{lo:g}, {hi:g}] rad/ps "
            f"(endpoint values {values[0]:.3g}, {values[-1]:.3g})")

    bracket = (grid[peak - 1], grid[peak], grid[peak + 1])
    res = minimize_scalar(lambda w: -pxx(w), bracket=bracket, method="golden",
                          options={"xtol": 0.25 * rtol})
    omega_pi = float(res.x)
    if not (bracket[0] <= omega_pi <= bracket[2]):
        raise CalibrationError(f"golden-section search left the bracket ({omega_pi:g})")
    target = 0.5 * -float(res.fun)

    below = grid[(grid < omega_pi) & (values < target)]
    a = float(below[-1]) if below.size else lo
    above = grid[(grid > a) & (grid < omega_pi) & (values >= target)]
    b = float(above[0]) if above.size else omega_pi
    if pxx(a) >= target:
        raise CalibrationError("emission at the lower search bound already exceeds half maximum")
    omega_half = bisect(lambda w: pxx(w) - target, a, b, xtol=1e-12, rtol=0.25 * rtol)
    return PiCalibration(omega_pi, float(omega_half))
