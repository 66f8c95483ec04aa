"""Parameter sweeps: Rabi power dependence, Ramsey and echo visibility decay.

Static inhomogeneous broadening is a Gaussian distribution of shifts of the
two-photon detuning, averaged with Gauss-Hermite quadrature. Sweeps are
parallel maps over independent evolutions; results are collected in task
order, so outputs do not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import curve_fit

from .errors import (FitDomainError, FitError, FitQualityError, InvalidArgument,
                     ModelMismatchError, NumericalError)
from .model import PhysicalParams
from .pulses import PulseSequence, echo_triple, ramsey_pair, sequence_emission, single
from .solver import SolverConfig

__all__ = [
    "InhomogeneousNoise",
    "VisibilityCurve",
    "FitResult",
    "RabiCurve",
    "EfficiencyReport",
    "rabi_sweep",
    "ramsey_scan",
    "echo_scan",
    "fringe_visibility",
    "fit_decay",
    "calibrate_noise",
    "noise_round_trip",
    "efficiency_report",
    "PAPER_DETUNINGS",
]

#: two-photon laser detunings of the power-dependence measurement (rad/ps)
PAPER_DETUNINGS = tuple(2.0 * math.pi * f * 1e-3 for f in (0.0, 22.0, 35.0, 57.0))


@dataclass(frozen=True)
class InhomogeneousNoise:
    """Static Gaussian shift of ``delta_b`` with standard deviation ``sigma_inh`` (rad/ps)."""

    sigma_inh: float = 0.0
    quadrature_order: int = 21

    def __post_init__(self):
        if not (math.isfinite(self.sigma_inh) and self.sigma_inh >= 0.0):
            raise InvalidArgument(f"sigma_inh must be >= 0, got {self.sigma_inh!r}")
        n = self.quadrature_order
        if not isinstance(n, (int, np.integer)) or n < 3 or n % 2 == 0:
            raise InvalidArgument(f"quadrature_order must be an odd integer >= 3, got {n!r}")

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Detuning shifts and weights (summing to one) of the quadrature rule."""
        if self.sigma_inh == 0.0:
            return np.zeros(1), np.ones(1)
        x, w = hermgauss(int(self.quadrature_order))
        return math.sqrt(2.0) * self.sigma_inh * x, w / math.sqrt(math.pi)


@dataclass(frozen=True)
class VisibilityCurve:
    tau: np.ndarray
    visibility: np.ndarray
    fringe_mean: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        vis = np.asarray(self.visibility, dtype=float)
        mean = np.asarray(self.fringe_mean, dtype=float)
        if not (tau.shape == vis.shape == mean.shape and tau.ndim == 1):
            raise InvalidArgument("tau, visibility and fringe_mean must be 1-d arrays of equal length")
        if np.any(np.diff(tau) <= 0.0):
            raise InvalidArgument("tau must be strictly increasing")
        if np.any(vis < 0.0) or np.any(vis > 1.0 + 1e-6):
            raise InvalidArgument("visibilities must lie in [0, 1]")
        for name, arr in (("tau", tau), ("visibility", vis), ("fringe_mean", mean)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.tau.tolist(), self.visibility.tolist(), self.fringe_mean.tolist()))

    def __len__(self) -> int:
        return self.tau.size


@dataclass(frozen=True)
class FitResult:
    amplitude: float
    time_constant: float
    shape: str
    residual_rms: float

    def __post_init__(self):
        if not self.time_constant > 0.0:
            raise InvalidArgument("time_constant must be > 0")
        if self.shape not in ("gaussian", "exponential"):
            raise InvalidArgument(f"unknown shape {self.shape!r}")

    def __call__(self, tau):
        return _SHAPES[self.shape](np.asarray(tau, dtype=float), self.amplitude, self.time_constant)


class RabiCurve(NamedTuple):
    delta_b: float
    omega: np.ndarray
    p_xx: np.ndarray
    p_x: np.ndarray

    @property
    def omega_sq(self) -> np.ndarray:
        return self.omega ** 2

    def maxima(self) -> list[tuple[float, float]]:
        """Interior local maxima of ``p_xx`` as ``(omega, height)`` pairs."""
        p = self.p_xx
        idx = [i for i in range(1, p.size - 1) if p[i] > p[i - 1] and p[i] >= p[i + 1]]
        return [(float(self.omega[i]), float(p[i])) for i in idx]


def _pmap(fn: Callable, items: Sequence, workers: int | None):
    """Ordered map; the compiled kernel releases the GIL so threads scale."""
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(fn, items))


def rabi_sweep(omega_grid, detunings, params: PhysicalParams, *, sigma: float = 4.0,
               config: SolverConfig | None = None, workers: int | None = None) -> list[RabiCurve]:
    """Eventual single-pulse emission ``(P_xx, P_x)`` over amplitudes and detunings."""
    omega = np.asarray(omega_grid, dtype=float)
    dets = [float(d) for d in np.atleast_1d(detunings)]
    if omega.ndim != 1 or omega.size == 0 or not dets:
        raise InvalidArgument("omega_grid and detunings must be non-empty")
    if np.any(omega < 0.0):
        raise InvalidArgument("amplitudes must be >= 0")
    tasks = [(db, w) for db in dets for w in omega]

    def run(task):
        db, w = task
        try:
            return sequence_emission(single(w, 0.0, 0.0, db, sigma), params, config)
        except NumericalError as exc:
            raise type(exc)(f"at omega={w:g} rad/ps, delta_b={db:g} rad/ps: {exc}") from exc

    out = np.array(_pmap(run, tasks, workers)).reshape(len(dets), omega.size, 2)
    return [RabiCurve(db, omega.copy(), out[i, :, 0], out[i, :, 1]) for i, db in enumerate(dets)]


def fringe_visibility(phases, signal, *, quality: float = 0.1,
                      abs_floor: float = 1e-7) -> tuple[float, float, float]:
    """Fit ``a + b cos 2phi + c sin 2phi`` and return ``(visibility, mean, residual_rms)``.

    The visibility ``(max - min) / (max + min)`` of the fitted sinusoid is
    ``sqrt(b^2 + c^2) / a``.

    Raises
    ------
    FitQualityError
        The rms residual exceeds ``quality`` times the fitted amplitude (and
        ``abs_floor``, below which residuals are round-off).
    """
    phi = np.asarray(phases, dtype=float)
    y = np.asarray(signal, dtype=float)
    design = np.column_stack([np.ones_like(phi), np.cos(2.0 * phi), np.sin(2.0 * phi)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    amp = float(math.hypot(coef[1], coef[2]))
    mean = float(coef[0])
    if resid > quality * amp and resid > abs_floor:
        raise FitQualityError(f"sinusoid fit residual {resid:.3g} exceeds {quality:g} x amplitude {amp:.3g}")
    if mean <= 0.0:
        raise FitQualityError(f"fringe mean {mean:.3g} is not positive")
    return min(amp / mean, 1.0), mean, resid


def _check_phase_grid(phases: np.ndarray):
    if phases.ndim != 1 or phases.size < 8:
        raise InvalidArgument("fine_phase_grid needs at least 8 points")
    if np.ptp(phases) < math.pi * (1.0 - 1.0 / phases.size) - 1e-12:
        raise InvalidArgument("fine_phase_grid must span at least one period (pi)")


def default_phase_grid(n: int = 12) -> np.ndarray:
    """``n`` evenly spaced phases over ``[0, 2 pi)``, i.e. two fringe periods.

    A full carrier period makes the fit orthogonal to the small component of
    the signal that follows the single-photon phase, so visibilities do not
    depend on a global phase offset.
    """
    return np.arange(n) * (2.0 * math.pi / n)


def _visibility_scan(build, tau_grid, fine_phase_grid, noise, params, config, workers,
                     observable):
    taus = np.asarray(tau_grid, dtype=float)
    phases = np.asarray(fine_phase_grid if fine_phase_grid is not None else default_phase_grid(),
                        dtype=float)
    if taus.ndim != 1 or taus.size == 0:
        raise InvalidArgument("tau_grid must be a non-empty 1-d array")
    _check_phase_grid(phases)
    noise = noise or InhomogeneousNoise()
    shifts, weights = noise.nodes()
    index = {"p_xx": 0, "p_x": 1}.get(observable)
    if index is None:
        raise InvalidArgument(f"observable must be 'p_xx' or 'p_x', got {observable!r}")
    seqs = {(i, j): build(tau, phi) for i, tau in enumerate(taus) for j, phi in enumerate(phases)}
    tasks = [(i, j, k) for i in range(taus.size) for j in range(phases.size)
             for k in range(shifts.size)]

    def run(task):
        i, j, k = task
        seq: PulseSequence = seqs[(i, j)]
        try:
            return sequence_emission(seq, params, config, delta_b=seq.delta_b + shifts[k])[index]
        except NumericalError as exc:
            raise type(exc)(f"at tau={taus[i]:g} ps, phase={phases[j]:g}: {exc}") from exc

    raw = np.array(_pmap(run, tasks, workers)).reshape(taus.size, phases.size, shifts.size)
    signal = raw @ weights
    vis = np.empty(taus.size)
    mean = np.empty(taus.size)
    for i in range(taus.size):
        try:
            vis[i], mean[i], _ = fringe_visibility(phases, signal[i])
        except FitQualityError as exc:
            raise FitQualityError(f"at tau={taus[i]:g} ps: {exc}") from exc
    return VisibilityCurve(taus, vis, mean)


def ramsey_scan(tau_grid, fine_phase_grid, omega_half: float,
                noise: InhomogeneousNoise | None, params: PhysicalParams, *,
                delta_b: float = 0.0, sigma: float = 4.0, allow_overlap: bool = False,
                observable: str = "p_xx", config: SolverConfig | None = None,
                workers: int | None = None) -> VisibilityCurve:
    """Ramsey fringe visibility versus the coarse delay ``tau``.

    ``fine_phase_grid=None`` uses :func:`default_phase_grid`.
    """
    def build(tau, phi):
        return ramsey_pair(omega_half, tau, phi, delta_b, sigma=sigma, allow_overlap=allow_overlap)
    return _visibility_scan(build, tau_grid, fine_phase_grid, noise, params, config, workers,
                            observable)


def echo_scan(tau_grid, fine_phase_grid, omega_half: float,
              noise: InhomogeneousNoise | None, params: PhysicalParams, *,
              delta_b: float = 0.0, sigma: float = 4.0, phase_on: str = "last",
              allow_overlap: bool = False, observable: str = "p_xx",
              config: SolverConfig | None = None,
              workers: int | None = None) -> VisibilityCurve:
    """Echo fringe visibility versus the total delay ``tau``."""
    def build(tau, phi):
        return echo_triple(omega_half, tau, phi, delta_b, sigma=sigma, phase_on=phase_on,
                           allow_overlap=allow_overlap)
    return _visibility_scan(build, tau_grid, fine_phase_grid, noise, params, config, workers,
                            observable)


def _gaussian(t, v0, T):
    return v0 * np.exp(-(t / T) ** 2)


def _exponential(t, v0, T):
    return v0 * np.exp(-t / T)


_SHAPES = {"gaussian": _gaussian, "exponential": _exponential}


def fit_decay(curve, shape: str = "gaussian", *, tau=None) -> FitResult:
    """Least-squares ``V0 exp(-(tau/T)^2)`` or ``V0 exp(-tau/T)``.

    ``curve`` is a :class:`VisibilityCurve` or, with ``tau`` given, an array
    of visibilities.
    """
    if shape not in _SHAPES:
        raise InvalidArgument(f"shape must be 'gaussian' or 'exponential', got {shape!r}")
    if isinstance(curve, VisibilityCurve):
        t, v = curve.tau, curve.visibility
    else:
        if tau is None:
            raise InvalidArgument("tau is required when fitting a bare array")
        t, v = np.asarray(tau, dtype=float), np.asarray(curve, dtype=float)
    if t.size < 4:
        raise FitDomainError("need at least 4 points for a decay fit")
    if np.any(v <= 0.0):
        raise FitDomainError("visibilities must be positive")
    model = _SHAPES[shape]
    # linearized guess: log v is linear in t (exponential) or t^2 (gaussian)
    x = t if shape == "exponential" else t * t
    slope, icept = np.polyfit(x, np.log(v), 1)
    if slope < 0.0:
        T0 = -1.0 / slope if shape == "exponential" else math.sqrt(-1.0 / slope)
    else:
        T0 = 10.0 * float(np.max(t))
    p0 = (math.exp(icept), T0)
    try:
        popt, _ = curve_fit(model, t, v, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        resid0 = float(np.sqrt(np.mean((model(t, *p0) - v) ** 2)))
        raise FitError(f"{shape} fit did not converge (residual at start {resid0:.3g}): {exc}") from exc
    v0, T = (float(p) for p in popt)
    T = abs(T)
    if not (math.isfinite(T) and T > 0.0 and math.isfinite(v0)):
        raise FitError(f"{shape} fit returned a non-physical time constant {T!r}")
    resid = float(np.sqrt(np.mean((model(t, v0, T) - v) ** 2)))
    return FitResult(v0, T, shape, resid)


def noise_round_trip(sigma_inh: float, params: PhysicalParams, omega_half: float, *,
                     tau_grid=None, fine_phase_grid=None, quadrature_order: int = 21,
                     config: SolverConfig | None = None, workers: int | None = None,
                     allow_overlap: bool = True) -> FitResult:
    """Gaussian fit of the visibility reduction caused by ``sigma_inh``.

    The noisy Ramsey curve is divided by the noise-free one, which removes
    the homogeneous decay of ``params`` and leaves the inhomogeneous envelope.
    """
    taus = np.linspace(8.0, 480.0, 24) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    kw = dict(config=config, workers=workers, allow_overlap=allow_overlap)
    noisy = ramsey_scan(taus, fine_phase_grid, omega_half,
                        InhomogeneousNoise(sigma_inh, quadrature_order), params, **kw)
    clean = ramsey_scan(taus, fine_phase_grid, omega_half, None, params, **kw)
    ratio = noisy.visibility / clean.visibility
    keep = ratio > 1e-3
    return fit_decay(ratio[keep], "gaussian", tau=taus[keep])


def calibrate_noise(target_T2star: float, params: PhysicalParams | None = None,
                    omega_half: float | None = None, *, verify: bool = True,
                    tolerance: float = 0.10, **round_trip_kw) -> float:
    """``sigma_inh`` whose Gaussian envelope ``exp(-2 sigma^2 tau^2)`` has 1/e time ``target``.

    With ``verify`` the value is checked by a simulated Ramsey round trip.

    Raises
    ------
    ModelMismatchError
        The round-trip time constant differs from the target by more than
        ``tolerance``.
    """
    if not (target_T2star > 0.0):
        raise InvalidArgument(f"target must be > 0, got {target_T2star!r}")
    if math.isinf(target_T2star):
        return 0.0
    sigma = 1.0 / (math.sqrt(2.0) * target_T2star)
    if verify:
        if params is None or omega_half is None:
            raise InvalidArgument("params and omega_half are required to verify the calibration")
        fit = noise_round_trip(sigma, params, omega_half, **round_trip_kw)
        err = abs(fit.time_constant / target_T2star - 1.0)
        if err > tolerance:
            raise ModelMismatchError(
                f"round trip gives T = {fit.time_constant:.4g} ps for target {target_T2star:g} ps "
                f"({100 * err:.1f}% off)")
    return sigma


class EfficiencyReport(NamedTuple):
    eta: float
    pair_rate: float
    excitation_fraction: float


def efficiency_report(singles_xx: float, singles_x: float, coincidences: float,
                      rep_rate: float, *, suppression_factor: float = 2.0) -> EfficiencyReport:
    """Heralding efficiency and the pair-creation rate it implies.

    ``eta = coincidences / singles_xx``. The pair rate scales the exciton
    singles by ``1/eta`` and by ``suppression_factor``, the factor by which
    count rates drop when the laser is suppressed with crossed polarizers
    (``1`` when the rates were measured without them).
    """
    for name, v in (("singles_xx", singles_xx), ("singles_x", singles_x),
                    ("coincidences", coincidences), ("rep_rate", rep_rate),
                    ("suppression_factor", suppression_factor)):
        if not (math.isfinite(v) and v > 0.0):
            raise InvalidArgument(f"{name} must be > 0, got {v!r}")
    if coincidences > min(singles_xx, singles_x):
        raise InvalidArgument("coincidences cannot exceed the single count rates")
    eta = coincidences / singles_xx
    pair_rate = suppression_factor * singles_x / eta
    return EfficiencyReport(eta, pair_rate, pair_rate / rep_rate)
