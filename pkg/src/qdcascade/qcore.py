"""Small-dimension linear algebra for the ground / exciton / biexciton system.

Operators are plain ``(3, 3)`` complex128 numpy arrays over the fixed basis
``(g, x, b)``; :class:`DensityMatrix` wraps one with validation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "Level",
    "InvalidArgument",
    "DensityMatrix",
    "projector",
    "commutator",
    "dissipator",
    "populations",
    "eigvalsh3",
]

DIM = 3


class Level(enum.IntEnum):
    G = 0
    X = 1
    B = 2

    @classmethod
    def parse(cls, value) -> "Level":
        if isinstance(value, Level):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise InvalidArgument(f"unknown level {value!r}") from None
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            if 0 <= value < DIM:
                return cls(int(value))
        raise InvalidArgument(f"level index out of range: {value!r}")


def _as_operator(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.complex128)
    if arr.shape != (DIM, DIM):
        raise InvalidArgument(f"expected a 3x3 operator, got shape {arr.shape}")
    return arr


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def projector(i, j) -> np.ndarray:
    """Transition operator ``|i><j|``."""
    out = np.zeros((DIM, DIM), dtype=np.complex128)
    out[Level.parse(i), Level.parse(j)] = 1.0
    return _frozen(out)


def commutator(a, b) -> np.ndarray:
    a = _as_operator(a)
    b = _as_operator(b)
    return _frozen(a @ b - b @ a)


def dissipator(a, rate: float, rho) -> np.ndarray:
    """Lindblad term ``rate/2 (2 A rho A^+ - A^+ A rho - rho A^+ A)``."""
    if not rate >= 0.0:
        raise InvalidArgument(f"dissipator rate must be >= 0, got {rate}")
    a = _as_operator(a)
    r = rho.data if isinstance(rho, DensityMatrix) else _as_operator(rho)
    ad = a.conj().T
    ada = ad @ a
    out = 0.5 * rate * (2.0 * (a @ r @ ad) - ada @ r - r @ ada)
    return _frozen(out)


def eigvalsh3(a) -> np.ndarray:
    """Ascending eigenvalues of a 3x3 Hermitian matrix by cyclic Jacobi sweeps.

    Accurate to a few ulps of ``||a||`` even for (near-)degenerate spectra,
    where the trigonometric cubic formula loses half the digits.
    """
    m = [[complex(v) for v in row] for row in _as_operator(a)]
    # symmetrize so tiny anti-Hermitian noise does not stall convergence
    for p in range(DIM):
        m[p][p] = complex(m[p][p].real, 0.0)
        for q in range(p + 1, DIM):
            v = 0.5 * (m[p][q] + m[q][p].conjugate())
            m[p][q] = v
            m[q][p] = v.conjugate()
    for _ in range(50):
        off = abs(m[0][1]) + abs(m[0][2]) + abs(m[1][2])
        scale = abs(m[0][0].real) + abs(m[1][1].real) + abs(m[2][2].real) + off
        if off <= 1e-300 or off <= 1e-18 * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            _jacobi_rotate(m, p, q)
    return np.sort(np.array([m[k][k].real for k in range(DIM)]))


def _jacobi_rotate(m, p, q):
    apq = m[p][q]
    mag = abs(apq)
    if mag == 0.0:
        return
    app = m[p][p].real
    aqq = m[q][q].real
    phase = apq / mag
    theta = 0.5 * (aqq - app) / mag
    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c
    # unitary G with columns p, q: G[p][p]=c, G[q][p]=-s*conj(phase),
    # G[p][q]=s*phase, G[q][q]=c; apply m <- G^+ m G
    sp = s * phase
    spc = sp.conjugate()
    for k in range(DIM):
        mkp = m[k][p]
        mkq = m[k][q]
        m[k][p] = c * mkp - spc * mkq
        m[k][q] = sp * mkp + c * mkq
    for k in range(DIM):
        mpk = m[p][k]
        mqk = m[q][k]
        m[p][k] = c * mpk - sp * mqk
        m[q][k] = spc * mpk + c * mqk
    m[p][q] = 0.0j
    m[q][p] = 0.0j


def hermiticity_error(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a - a.conj().T)))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite state of the cascade.

    Construction checks the invariants at ``atol`` (1e-12 for trace and
    Hermiticity); states produced by the integrator are built with the looser
    evolution tolerances via :meth:`evolved`.
    """

    data: np.ndarray

    def __init__(self, data, *, trace_tol: float = 1e-12, herm_tol: float = 1e-12,
                 eig_tol: float = 1e-9, check: bool = True):
        arr = np.array(_as_operator(data), dtype=np.complex128, copy=True)
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("density matrix has non-finite entries")
        if check:
            herm = hermiticity_error(arr)
            if herm > herm_tol:
                raise InvalidArgument(f"density matrix not Hermitian (max |rho - rho^+| = {herm:.3e})")
            tr = np.trace(arr).real
            if abs(tr - 1.0) > trace_tol:
                raise InvalidArgument(f"density matrix trace {tr!r} differs from 1")
            lo = eigvalsh3(arr)[0]
            if lo < -eig_tol:
                raise InvalidArgument(f"density matrix not positive (min eigenvalue {lo:.3e})")
        object.__setattr__(self, "data", _frozen(arr))

    @classmethod
    def evolved(cls, data) -> "DensityMatrix":
        return cls(data, trace_tol=1e-8, herm_tol=1e-9, eig_tol=1e-9)

    @classmethod
    def pure(cls, level) -> "DensityMatrix":
        lv = Level.parse(level)
        return cls(projector(lv, lv))

    @classmethod
    def from_ket(cls, amplitudes) -> "DensityMatrix":
        psi = np.asarray(amplitudes, dtype=np.complex128).reshape(DIM)
        norm = np.vdot(psi, psi).real
        if norm <= 0.0:
            raise InvalidArgument("zero state vector")
        psi = psi / math.sqrt(norm)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def mixture(cls, weights) -> "DensityMatrix":
        w = np.asarray(weights, dtype=float).reshape(DIM)
        return cls(np.diag(w.astype(np.complex128)))

    def __getitem__(self, idx):
        return self.data[idx]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def eigenvalues(self) -> np.ndarray:
        return eigvalsh3(self.data)

    def purity(self) -> float:
        return float(np.trace(self.data @ self.data).real)

    def coherence(self, i, j) -> complex:
        return complex(self.data[Level.parse(i), Level.parse(j)])


def populations(rho) -> tuple[float, float, float]:
    """Return ``(P_g, P_x, P_b)``."""
    r = rho.data if isinstance(rho, DensityMatrix) else _as_operator(rho)
    d = np.diag(r).real
    return float(d[0]), float(d[1]), float(d[2])
