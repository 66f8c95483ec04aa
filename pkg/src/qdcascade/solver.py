"""Time integration of the master equation over a pulse schedule.

The density matrix is integrated together with the two emission integrals
``int gamma_b P_b dt`` and ``int gamma_x P_x dt`` so both share the step
control and the order of the Runge-Kutta pair. The inner loop lives in a
compiled kernel with a pure-Python twin (see ``_backend``).
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from . import _backend
from .errors import (FitDomainError, IncompleteDecayError, IntegrationFailure,
                     InvalidArgument, StiffnessError)
from .model import Drive, PhysicalParams, common_detuning
from .qcore import DensityMatrix, Level

__all__ = [
    "Method",
    "SolverConfig",
    "Trajectory",
    "REPETITION_PERIOD",
    "InvariantMonitor",
    "evolve",
    "emission_probability",
    "eventual_emission",
    "lifetime_fit",
]

#: one period of the 76 MHz pump laser, in ps
REPETITION_PERIOD = 1e12 / 76e6

TRACE_TOL = 1e-8
HERM_TOL = 1e-9
EIG_TOL = 1e-9


class InvariantMonitor:
    """Thread-safe record of the worst invariant drifts over many evolutions."""

    def __init__(self):
        self._lock = threading.Lock()
        self.evolutions = 0
        self.max_trace_drift = 0.0
        self.max_herm_drift = 0.0
        self.min_eigenvalue = 0.0

    def record(self, stats: dict):
        with self._lock:
            self.evolutions += 1
            self.max_trace_drift = max(self.max_trace_drift, stats["max_trace_drift"])
            self.max_herm_drift = max(self.max_herm_drift, stats["max_herm_drift"])
            self.min_eigenvalue = min(self.min_eigenvalue, stats["min_eigenvalue"])

    def as_dict(self) -> dict:
        with self._lock:
            return {"evolutions": self.evolutions, "max_trace_drift": self.max_trace_drift,
                    "max_herm_drift": self.max_herm_drift, "min_eigenvalue": self.min_eigenvalue}


class Method(str, enum.Enum):
    RK45 = "rk45"
    RK4 = "rk4"


@dataclass(frozen=True)
class SolverConfig:
    """Integrator settings.

    ``max_step_pulse=None`` means ``sigma / 8`` of the drives being
    integrated. ``pulse_window`` is the half-width, in units of ``sigma``,
    of the region around each pulse centre where the pulse step cap applies.
    ``interaction_frame`` carries the state in the interaction picture of the
    diagonal Hamiltonian, so dark intervals are pure decay; results are always
    reported in the drive frame. A ``monitor`` collects invariant drifts of
    every evolution run with this configuration.
    """

    rtol: float = 1e-8
    atol: float = 1e-10
    max_step_pulse: float | None = None
    max_step_dark: float = 10.0
    method: Method = Method.RK45
    fixed_step: float = 1e-3
    min_step: float = 1e-6
    pulse_window: float = 5.0
    interaction_frame: bool = True
    backend: str | None = None
    monitor: InvariantMonitor | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for name in ("rtol", "atol", "max_step_dark", "fixed_step", "min_step", "pulse_window"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise InvalidArgument(f"{name} must be > 0, got {v!r}")
        if self.max_step_pulse is not None and not self.max_step_pulse > 0.0:
            raise InvalidArgument(f"max_step_pulse must be > 0, got {self.max_step_pulse!r}")

    def replace(self, **changes) -> "SolverConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    integrated_b: float
    integrated_x: float
    final: DensityMatrix
    t0: float
    t1: float
    stats: dict = field(default_factory=dict)

    @property
    def samples(self) -> list[tuple[float, DensityMatrix]]:
        return [(float(t), DensityMatrix.evolved(s)) for t, s in zip(self.times, self.states)]

    def populations(self) -> np.ndarray:
        """``(n, 3)`` array of ``P_g, P_x, P_b`` at the sample times."""
        return np.real(np.einsum("nii->ni", self.states))

    @property
    def max_trace_drift(self) -> float:
        return self.stats["max_trace_drift"]

    @property
    def max_herm_drift(self) -> float:
        return self.stats["max_herm_drift"]

    @property
    def min_eigenvalue(self) -> float:
        return self.stats["min_eigenvalue"]


def _unpack_drives(drives, delta_b):
    if hasattr(drives, "drives"):
        db = drives.delta_b if delta_b is None else delta_b
        drives = list(drives.drives)
    else:
        drives = list(drives or [])
        db = common_detuning(drives) if delta_b is None else delta_b
    for d in drives:
        if not isinstance(d, Drive):
            raise InvalidArgument(f"expected Drive, got {type(d).__name__}")
    sigmas = {d.sigma for d in drives}
    if len(sigmas) > 1:
        raise InvalidArgument("all drives of one evolution must share sigma")
    sigma = sigmas.pop() if sigmas else 4.0
    return drives, float(db), sigma


def _to_vector(rho: DensityMatrix) -> np.ndarray:
    y = np.zeros(20)
    flat = np.asarray(rho.data).ravel()
    y[0:18:2] = flat.real
    y[1:18:2] = flat.imag
    return y


def _to_matrix(y) -> np.ndarray:
    y = np.asarray(y)
    return (y[..., 0:18:2] + 1j * y[..., 1:18:2]).reshape(y.shape[:-1] + (3, 3))


def _from_interaction(rho, times, t0, params, delta_b):
    """Undo the interaction picture: ``rho_ij *= exp(-i (E_i - E_j)(t - t0))``."""
    energies = np.array([0.0, params.delta_e - delta_b, -2.0 * delta_b])
    gap = energies[:, None] - energies[None, :]
    s = np.asarray(times, dtype=float) - t0
    phases = np.exp(-1j * gap[None, :, :] * s.reshape(-1, 1, 1))
    return rho * phases.reshape(rho.shape)


def rates_vector(params: PhysicalParams) -> np.ndarray:
    kfac = params.k ** 4 / (2.0 * params.omega_ref ** 3)
    return np.array([params.gamma_b, params.gamma_x, params.gamma_db, params.gamma_dx,
                     params.delta_e, kfac], dtype=float)


def evolve(rho0: DensityMatrix, t0: float, t1: float, drives, params: PhysicalParams,
           config: SolverConfig | None = None, sample_times=None,
           delta_b: float | None = None) -> Trajectory:
    """Integrate ``rho0`` from ``t0`` to ``t1`` under ``drives``.

    ``drives`` is a list of :class:`~qdcascade.model.Drive` or any object with
    ``drives`` and ``delta_b`` attributes (e.g. a pulse sequence).
    ``sample_times`` is an increasing array inside ``[t0, t1]``, an integer
    number of uniform samples, or None for just the two end points.

    Raises
    ------
    StiffnessError
        The controller asked for a step below ``config.min_step``.
    IntegrationFailure
        Trace, Hermiticity or positivity drifted beyond ten times tolerance.
    """
    config = config or SolverConfig()
    if not isinstance(rho0, DensityMatrix):
        rho0 = DensityMatrix(rho0)
    t0 = float(t0)
    t1 = float(t1)
    if not (t1 > t0):
        raise InvalidArgument(f"need t1 > t0, got t0={t0}, t1={t1}")
    drive_list, db, sigma = _unpack_drives(drives, delta_b)

    if sample_times is None:
        st = np.array([t0, t1])
    elif np.ndim(sample_times) == 0:
        n = int(sample_times)
        if n < 2:
            raise InvalidArgument("need at least 2 samples")
        st = np.linspace(t0, t1, n)
    else:
        st = np.asarray(sample_times, dtype=float)
        if st.ndim != 1 or st.size == 0:
            raise InvalidArgument("sample_times must be a non-empty 1-d array")
        if np.any(np.diff(st) <= 0):
            raise InvalidArgument("sample_times must be strictly increasing")
        if st[0] < t0 or st[-1] > t1:
            raise InvalidArgument("sample_times must lie inside [t0, t1]")
    st = np.ascontiguousarray(st, dtype=float)

    omega = np.array([d.omega_peak for d in drive_list], dtype=float)
    tc = np.array([d.t_center for d in drive_list], dtype=float)
    phase = np.array([d.phase for d in drive_list], dtype=float)
    window = config.pulse_window * sigma
    edges = [c + s * window for c, o in zip(tc, omega) if o > 0.0 for s in (-1.0, 1.0)]
    breaks = np.array(sorted(e for e in edges if t0 < e < t1), dtype=float)
    h_pulse = sigma / 8.0 if config.max_step_pulse is None else config.max_step_pulse

    kernel = _backend.get(config.backend)
    status, y, samples, stats = kernel.integrate(
        _to_vector(rho0), t0, t1, omega, tc, phase, float(sigma), db, rates_vector(params),
        0 if config.method is Method.RK45 else 1, config.rtol, config.atol,
        float(h_pulse), config.max_step_dark, config.fixed_step, config.min_step,
        float(window), breaks, st, np.array([TRACE_TOL, HERM_TOL, EIG_TOL]),
        1 if config.interaction_frame else 0)
    info = {
        "accepted_steps": int(stats[0]),
        "rejected_steps": int(stats[1]),
        "nfev": int(stats[2]),
        "max_trace_drift": float(stats[5]),
        "max_herm_drift": float(stats[6]),
        "min_eigenvalue": float(stats[7]),
        "backend": kernel.__name__.rsplit(".", 1)[-1],
    }
    if config.monitor is not None:
        config.monitor.record(info)
    if status == 1:
        raise StiffnessError(
            f"step size underflow at t={stats[3]:.6g} ps (h={stats[4]:.3g} ps < "
            f"{config.min_step:g} ps) after {info['accepted_steps']} steps")
    if status == 2:
        raise IntegrationFailure(
            f"invariant breach at t={stats[3]:.6g} ps: trace drift {info['max_trace_drift']:.3e}, "
            f"hermiticity drift {info['max_herm_drift']:.3e}, "
            f"min eigenvalue {info['min_eigenvalue']:.3e}")
    if status != 0:
        raise IntegrationFailure(f"integration aborted (status {status}) at t={stats[3]:.6g} ps")

    rho_final = _to_matrix(y)
    states = _to_matrix(samples)
    if config.interaction_frame:
        rho_final = _from_interaction(rho_final, [t1], t0, params, db)
        states = _from_interaction(states, st, t0, params, db)
    try:
        final = DensityMatrix.evolved(rho_final)
    except InvalidArgument as exc:
        raise IntegrationFailure(f"final state invalid: {exc}") from exc
    return Trajectory(
        times=st,
        states=states,
        integrated_b=float(y[18]),
        integrated_x=float(y[19]),
        final=final,
        t0=t0,
        t1=t1,
        stats=info,
    )


def emission_probability(traj: Trajectory) -> tuple[float, float]:
    """Return ``(P_xx, P_x)``, the biexciton and exciton photon probabilities.

    The trajectory has to run long enough for the cascade to empty.
    """
    _, px, pb = (float(v) for v in np.real(np.diag(traj.final.data)))
    if pb + px > 0.01:
        raise IncompleteDecayError(
            f"trajectory ends with P_b + P_x = {pb + px:.3g} > 0.01; extend the window")
    return traj.integrated_b, traj.integrated_x


def eventual_emission(traj: Trajectory) -> tuple[float, float]:
    """Emission probabilities including the undrained tail after ``traj.t1``.

    Once the drive is off the populations obey the classical cascade rate
    equations, so every biexciton still present emits one XX and one X
    photon and every exciton one X photon.
    """
    _, px, pb = (float(v) for v in np.real(np.diag(traj.final.data)))
    return traj.integrated_b + pb, traj.integrated_x + px + pb


def _exp_model(t, amplitude, tau):
    return amplitude * np.exp(-t / tau)


def lifetime_fit(traj: Trajectory, level) -> float:
    """Least-squares exponential time constant (ps) of a level's population."""
    lv = Level.parse(level)
    if lv is Level.G:
        raise InvalidArgument("the ground state does not decay")
    t = traj.times - traj.times[0]
    pop = traj.populations()[:, int(lv)]
    if t.size < 3:
        raise FitDomainError("need at least 3 samples for a lifetime fit")
    if np.any(np.diff(pop) > 1e-12) or pop[0] <= 0.0:
        raise FitDomainError(f"population of level {lv.name.lower()} is not monotonically decaying")
    mask = pop > 1e-9 * pop[0]
    t, pop = t[mask], pop[mask]
    if t.size < 3 or pop[-1] >= pop[0]:
        raise FitDomainError("population does not decay over the sampled window")
    slope = np.polyfit(t, np.log(pop), 1)[0]
    guess = (pop[0], -1.0 / slope)
    try:
        (_, tau), _ = curve_fit(_exp_model, t, pop, p0=guess, maxfev=10000)
    except RuntimeError as exc:
        raise FitDomainError(f"exponential fit did not converge: {exc}") from exc
    if not (tau > 0.0 and math.isfinite(tau)):
        raise FitDomainError(f"fitted lifetime {tau!r} is not positive")
    return float(tau)
