"""Hamiltonian and Lindblad channels of the two-photon driven cascade.

All frequencies are angular, in rad/ps, and all times in ps, so the
Hamiltonian returned here is ``H / hbar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .qcore import DensityMatrix, Level, dissipator, projector

__all__ = [
    "PhysicalParams",
    "Drive",
    "envelope",
    "complex_drive",
    "hamiltonian",
    "incoherent_rate",
    "jump_operators",
    "master_rhs",
    "common_detuning",
]

TWO_LN2 = 2.0 * math.log(2.0)


@dataclass(frozen=True)
class PhysicalParams:
    """Measured rates and detunings of the quantum-dot cascade.

    Parameters
    ----------
    gamma_b, gamma_x : float
        Radiative decay rates of biexciton and exciton (1/ps).
    gamma_db, gamma_dx : float
        Pure-dephasing rates of the biexciton and exciton transitions (1/ps).
    delta_e : float
        Detuning of the two-photon virtual level from the exciton (rad/ps).
    k : float
        Strength of the incoherent two-photon channels relative to the drive.
    incoherent_ref : float or None
        Reference frequency ``w`` (rad/ps) in the incoherent pumping rate
        ``(k |Omega|)**4 / (2 w**3)``. ``None`` means ``w = delta_e``.
    """

    gamma_b: float = 1.0 / 405.0
    gamma_x: float = 1.0 / 771.0
    gamma_db: float = 1.0 / 211.0
    gamma_dx: float = 1.0 / 119.0
    delta_e: float = 2.0 * math.pi * 0.335
    k: float = 0.47
    incoherent_ref: float | None = None

    def __post_init__(self):
        for name in ("gamma_b", "gamma_x", "gamma_db", "gamma_dx", "k"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise InvalidArgument(f"{name} must be finite and >= 0, got {v!r}")
        if not (math.isfinite(self.delta_e) and self.delta_e > 0.0):
            raise InvalidArgument(f"delta_e must be > 0, got {self.delta_e!r}")
        if self.incoherent_ref is not None and not (self.incoherent_ref > 0.0):
            raise InvalidArgument(f"incoherent_ref must be > 0, got {self.incoherent_ref!r}")

    @property
    def omega_ref(self) -> float:
        return self.delta_e if self.incoherent_ref is None else self.incoherent_ref

    def replace(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)

    def closed(self) -> "PhysicalParams":
        """Same detunings with every dissipative channel switched off."""
        return replace(self, gamma_b=0.0, gamma_x=0.0, gamma_db=0.0, gamma_dx=0.0, k=0.0)


@dataclass(frozen=True)
class Drive:
    """One Gaussian pulse; ``sigma`` is the intensity FWHM in ps."""

    omega_peak: float
    sigma: float = 4.0
    t_center: float = 0.0
    phase: float = 0.0
    delta_b: float = 0.0

    def __post_init__(self):
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise InvalidArgument(f"sigma must be > 0, got {self.sigma!r}")
        if not (self.omega_peak >= 0.0 and math.isfinite(self.omega_peak)):
            raise InvalidArgument(f"omega_peak must be >= 0, got {self.omega_peak!r}")
        for name in ("t_center", "phase", "delta_b"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgument(f"{name} must be finite")


def envelope(t, drive: Drive):
    """Real pulse envelope ``Omega * exp(-2 ln2 (t - t_c)^2 / sigma^2)``."""
    dt = np.asarray(t, dtype=float) - drive.t_center
    out = drive.omega_peak * np.exp(-TWO_LN2 * dt * dt / (drive.sigma * drive.sigma))
    return float(out) if np.ndim(out) == 0 else out


def complex_drive(t: float, drives: Sequence[Drive]) -> complex:
    """Summed complex amplitude ``sum_j envelope_j(t) exp(i phase_j)``."""
    total = 0.0j
    for d in drives:
        total += envelope(t, d) * complex(math.cos(d.phase), math.sin(d.phase))
    return total


def common_detuning(drives: Sequence[Drive], default: float = 0.0) -> float:
    if not drives:
        return default
    db = drives[0].delta_b
    for d in drives[1:]:
        if d.delta_b != db:
            raise InvalidArgument("all drives in one sequence must share delta_b")
    return db


def hamiltonian(t: float, drives: Sequence[Drive], params: PhysicalParams,
                delta_b: float | None = None) -> np.ndarray:
    """Rotating-frame ``H/hbar`` at time ``t`` (rad/ps).

    ``delta_b`` overrides the detuning carried by the drives; with no drives
    it defaults to zero.
    """
    db = common_detuning(drives) if delta_b is None else delta_b
    om = complex_drive(t, drives)
    h = np.zeros((3, 3), dtype=np.complex128)
    h[1, 1] = params.delta_e - db
    h[2, 2] = -2.0 * db
    h[0, 1] = h[1, 2] = 0.5 * om
    h[1, 0] = h[2, 1] = 0.5 * om.conjugate()
    return h


def incoherent_rate(t: float, drives: Sequence[Drive], params: PhysicalParams) -> float:
    """Quartic incoherent pumping rate (1/ps)."""
    if params.k == 0.0 or not drives:
        return 0.0
    x = params.k * abs(complex_drive(t, drives))
    w = params.omega_ref
    return x ** 4 / (2.0 * w ** 3)


_SIGMA_XB = projector(Level.X, Level.B)
_SIGMA_GX = projector(Level.G, Level.X)
_DEPH_B = projector(Level.B, Level.B) - projector(Level.X, Level.X)
_DEPH_X = projector(Level.X, Level.X) - projector(Level.G, Level.G)
_PUMP_XB = projector(Level.B, Level.X)
_PUMP_GX = projector(Level.X, Level.G)


def jump_operators(t: float, drives: Sequence[Drive], params: PhysicalParams):
    """The six ``(A, rate)`` channels in the order decay b, decay x,
    dephasing b, dephasing x, pumping x->b, pumping g->x."""
    p = incoherent_rate(t, drives, params)
    return [
        (_SIGMA_XB, params.gamma_b),
        (_SIGMA_GX, params.gamma_x),
        (_DEPH_B, params.gamma_db),
        (_DEPH_X, params.gamma_dx),
        (_PUMP_XB, p),
        (_PUMP_GX, p),
    ]


def master_rhs(t: float, rho, drives: Sequence[Drive], params: PhysicalParams,
               delta_b: float | None = None) -> np.ndarray:
    """``d rho / dt`` (1/ps) from the Hamiltonian and the six channels."""
    r = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)
    h = hamiltonian(t, drives, params, delta_b)
    out = -1j * (h @ r - r @ h)
    for a, rate in jump_operators(t, drives, params):
        if rate:
            out = out + dissipator(a, rate, r)
    return out
