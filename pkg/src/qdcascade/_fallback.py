"""Pure-Python twin of ``_kernels.pyx``; same state layout and step control."""

from __future__ import annotations

import math

import numpy as np

from .qcore import eigvalsh3

NY = 20
OK, STEP_UNDERFLOW, INVARIANT_BREACH, MAX_STEPS = 0, 1, 2, 3
TWO_LN2 = 2.0 * math.log(2.0)

# Dormand-Prince 5(4)
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40


class _Model:
    __slots__ = ("omega", "tc", "expphase", "inv_s2", "db", "gb", "gx", "kfac", "h0",
                 "decay", "window", "active", "frame", "tref", "w01", "w12")

    def __init__(self, omega, tc, phase, sigma, delta_b, rates, window=0.0, frame=0, tref=0.0):
        self.omega = np.asarray(omega, dtype=float)
        self.tc = np.asarray(tc, dtype=float)
        self.expphase = np.exp(1j * np.asarray(phase, dtype=float))
        self.inv_s2 = TWO_LN2 / (sigma * sigma)
        self.db = delta_b
        gb, gx, gdb, gdx, de, kfac = (float(v) for v in rates)
        self.gb, self.gx, self.kfac = gb, gx, kfac
        self.frame = frame
        self.tref = tref
        self.w01 = delta_b - de
        self.w12 = de + delta_b
        if frame:
            self.h0 = np.zeros((3, 3), dtype=np.complex128)
        else:
            self.h0 = np.diag([0.0, de - delta_b, -2.0 * delta_b]).astype(np.complex128)
        w01 = 0.5 * (gdb + 4.0 * gdx)
        w02 = 0.5 * (gdb + gdx)
        w12 = 0.5 * (4.0 * gdb + gdx)
        loss = np.array([0.0, gx, gb])
        self.decay = 0.5 * (loss[:, None] + loss[None, :]) + np.array(
            [[0.0, w01, w02], [w01, 0.0, w12], [w02, w12, 0.0]])
        self.window = window
        self.active = self.omega > 0.0

    def drive(self, t):
        if self.omega.size == 0:
            return 0.0j
        dt = t - self.tc
        return complex(np.sum(self.omega * np.exp(-self.inv_s2 * dt * dt) * self.expphase))

    def rhs(self, t, y):
        r = (y[0:18:2] + 1j * y[1:18:2]).reshape(3, 3)
        om = self.drive(t)
        h = self.h0.copy()
        hh = 0.5 * om
        if self.frame:
            s = t - self.tref
            h[0, 1] = hh * complex(math.cos(self.w01 * s), math.sin(self.w01 * s))
            h[1, 2] = hh * complex(math.cos(self.w12 * s), math.sin(self.w12 * s))
        else:
            h[0, 1] = h[1, 2] = hh
        h[1, 0] = h[0, 1].conjugate()
        h[2, 1] = h[1, 2].conjugate()
        d = -1j * (h @ r - r @ h) - self.decay * r
        if self.kfac != 0.0:
            a = abs(om) ** 2
            p = self.kfac * a * a
            d[0, :] -= 0.5 * p * r[0, :]
            d[:, 0] -= 0.5 * p * r[:, 0]
            d[1, :] -= 0.5 * p * r[1, :]
            d[:, 1] -= 0.5 * p * r[:, 1]
            d[1, 1] += p * r[0, 0]
            d[2, 2] += p * r[1, 1]
        d[0, 0] += self.gx * r[1, 1]
        d[1, 1] += self.gb * r[2, 2]
        out = np.empty(NY)
        flat = d.ravel()
        out[0:18:2] = flat.real
        out[1:18:2] = flat.imag
        out[18] = self.gb * y[16]
        out[19] = self.gx * y[8]
        return out

    def in_pulse(self, t):
        w = self.window
        return bool(np.any(self.active & (t >= self.tc - w) & (t < self.tc + w)))


def rhs_vector(t, y, omega, tc, phase, sigma, delta_b, rates, frame=0, tref=0.0):
    m = _Model(omega, tc, phase, sigma, delta_b, rates, frame=frame, tref=tref)
    return m.rhs(t, np.asarray(y, dtype=float))


def min_eig(y):
    y = np.asarray(y, dtype=float)
    r = (y[0:18:2] + 1j * y[1:18:2]).reshape(3, 3)
    return float(eigvalsh3(0.5 * (r + r.conj().T))[0])


class _Diag:
    def __init__(self, y, tols):
        self.tr0 = y[0] + y[8] + y[16]
        self.max_tr = 0.0
        self.max_herm = 0.0
        self.min_eig = math.inf
        self.tr_tol, self.herm_tol, self.eig_tol = (float(v) for v in tols)

    def check(self, y):
        tr = max(abs(y[0] + y[8] + y[16] - self.tr0), abs(y[1] + y[9] + y[17]))
        r = (y[0:18:2] + 1j * y[1:18:2]).reshape(3, 3)
        herm = float(np.max(np.abs(r - r.conj().T)))
        e = float(eigvalsh3(0.5 * (r + r.conj().T))[0])
        self.max_tr = max(self.max_tr, tr)
        self.max_herm = max(self.max_herm, herm)
        self.min_eig = min(self.min_eig, e)
        bad = (tr > 10 * self.tr_tol or herm > 10 * self.herm_tol or e < -10 * self.eig_tol)
        return bad or not (math.isfinite(tr) and math.isfinite(herm) and math.isfinite(e))


def _hermite(th, h, y0, f0, y1, f1):
    th2 = th * th
    th3 = th2 * th
    return ((2 * th3 - 3 * th2 + 1) * y0 + (th3 - 2 * th2 + th) * h * f0
            + (-2 * th3 + 3 * th2) * y1 + (th3 - th2) * h * f1)


def _next_break(breaks, t):
    eps = 1e-12 * (1.0 + abs(t))
    for b in breaks:
        if b > t + eps:
            return b
    return math.inf


def _wnorm(v, y0, y1, rtol, atol):
    sk = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return math.sqrt(float(np.mean((v / sk) ** 2)))


def _run_adaptive(m, t0, t1, y, rtol, atol, h_pulse, h_dark, h_min, breaks, st, samples, dg):
    t = t0
    ns = len(st)
    isamp = 0
    while isamp < ns and st[isamp] <= t0:
        samples[isamp] = y
        isamp += 1
    k1 = m.rhs(t, y)
    nfev = 1
    sk = atol + rtol * np.abs(y)
    d0 = math.sqrt(float(np.mean((y / sk) ** 2)))
    d1 = math.sqrt(float(np.mean((k1 / sk) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    hmax = h_pulse if m.in_pulse(t) else h_dark
    h0 = min(h0, hmax)
    k2 = m.rhs(t + h0, y + h0 * k1)
    nfev += 1
    d2 = math.sqrt(float(np.mean(((k2 - k1) / sk) ** 2))) / h0
    d2 = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if d2 <= 1e-15 else (0.01 / d2) ** 0.2
    h = min(100 * h0, h1, hmax)

    beta, safe, facc1, facc2 = 0.04, 0.9, 5.0, 0.1
    expo1 = 0.2 - beta * 0.75
    facold = 1e-4
    reject = False
    nacc = nrej = 0
    status = OK
    while t < t1:
        if nacc + nrej > 50_000_000:
            status = MAX_STEPS
            break
        if h < h_min:
            status = STEP_UNDERFLOW
            break
        hmax = h_pulse if m.in_pulse(t) else h_dark
        h = min(h, hmax)
        nb = min(_next_break(breaks, t), t1)
        hlim = nb - t
        clipped = h >= hlim
        htry = hlim if clipped else h
        k2 = m.rhs(t + C2 * htry, y + htry * A21 * k1)
        k3 = m.rhs(t + C3 * htry, y + htry * (A31 * k1 + A32 * k2))
        k4 = m.rhs(t + C4 * htry, y + htry * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = m.rhs(t + C5 * htry, y + htry * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        tn = nb if clipped else t + htry
        k6 = m.rhs(tn, y + htry * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        yn = y + htry * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = m.rhs(tn, yn)
        nfev += 6
        ye = htry * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        err = _wnorm(ye, y, yn, rtol, atol)
        if not math.isfinite(err):
            err = 1e10
        fac11 = max(err, 1e-300) ** expo1
        if err <= 1.0:
            fac = min(facc1, max(facc2, fac11 / facold ** beta / safe))
            hnew = htry / fac
            facold = max(err, 1e-4)
            while isamp < ns and st[isamp] <= tn:
                samples[isamp] = _hermite((st[isamp] - t) / (tn - t), tn - t, y, k1, yn, k7)
                isamp += 1
            y, k1, t = yn, k7, tn
            nacc += 1
            if dg.check(y):
                status = INVARIANT_BREACH
                break
            if reject:
                hnew = min(hnew, htry)
                reject = False
            if clipped and hnew < h:
                hnew = h
            h = hnew
        else:
            h = htry / min(facc1, fac11 / safe)
            reject = True
            nrej += 1
    return status, y, (nacc, nrej, nfev, t, h)


def _run_rk4(m, t0, t1, y, hfix, st, samples, dg):
    ns = len(st)
    isamp = 0
    while isamp < ns and st[isamp] <= t0:
        samples[isamp] = y
        isamp += 1
    nsteps = int((t1 - t0) / hfix)
    if t0 + nsteps * hfix < t1 - 1e-12 * (1.0 + abs(t1)):
        nsteps += 1
    t = t0
    k1 = m.rhs(t, y)
    nfev = 1
    status = OK
    n = 0
    for step in range(nsteps):
        tn = t0 + (step + 1) * hfix
        if step == nsteps - 1 or tn > t1:
            tn = t1
        h = tn - t
        k2 = m.rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = m.rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = m.rhs(tn, y + h * k3)
        yn = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        f1 = m.rhs(tn, yn)
        nfev += 4
        while isamp < ns and st[isamp] <= tn:
            samples[isamp] = _hermite((st[isamp] - t) / h, h, y, k1, yn, f1)
            isamp += 1
        y, k1, t = yn, f1, tn
        n += 1
        if dg.check(y):
            status = INVARIANT_BREACH
            break
    return status, y, (n, 0, nfev, t, hfix)


def integrate(y0, t0, t1, omega, tc, phase, sigma, delta_b, rates, method, rtol, atol,
              h_pulse, h_dark, h_fixed, h_min, window, breaks, sample_times, tols, frame=0):
    """Same contract as the compiled ``integrate``."""
    m = _Model(omega, tc, phase, sigma, delta_b, rates, window, frame, t0)
    y = np.array(y0, dtype=float, copy=True)
    st = np.asarray(sample_times, dtype=float)
    samples = np.zeros((len(st), NY))
    dg = _Diag(y, tols)
    dg.check(y)
    if method == 0:
        status, y, s = _run_adaptive(m, t0, t1, y, rtol, atol, h_pulse, h_dark, h_min,
                                     list(breaks), st, samples, dg)
    else:
        status, y, s = _run_rk4(m, t0, t1, y, h_fixed, st, samples, dg)
    stats = np.array(list(s) + [dg.max_tr, dg.max_herm, dg.min_eig], dtype=float)
    return status, y, samples, stats
