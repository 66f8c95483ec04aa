# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled master-equation kernels.

State layout (20 doubles): real/imag pairs of the 9 density-matrix entries in
row-major order over (g, x, b), then the two emission integrals
``int gamma_b P_b dt`` and ``int gamma_x P_x dt``. Mirrors ``_fallback.py``.
"""

import numpy as np

from libc.math cimport exp, sqrt, fabs, cos, sin, pow, copysign, hypot

cdef extern from "complex.h" nogil:
    double complex conj(double complex)
    double cabs(double complex)

cdef enum:
    NY = 20
    OK = 0
    STEP_UNDERFLOW = 1
    INVARIANT_BREACH = 2
    MAX_STEPS = 3

cdef double TWO_LN2 = 1.3862943611198906


cdef struct Model:
    int npulse
    double *omega
    double *tc
    double *cph
    double *sph
    double inv_s2
    double db
    double gb
    double gx
    double gdb
    double gdx
    double de
    double kfac
    double window
    int frame
    double tref


cdef struct Diag:
    double tr0
    double max_tr
    double max_herm
    double min_eig
    double tr_tol
    double herm_tol
    double eig_tol


cdef inline double complex _drive(Model* m, double t) noexcept nogil:
    cdef double re = 0.0, im = 0.0, e, dt
    cdef int j
    for j in range(m.npulse):
        dt = t - m.tc[j]
        e = m.omega[j] * exp(-m.inv_s2 * dt * dt)
        re += e * m.cph[j]
        im += e * m.sph[j]
    return re + im * 1j


cdef void rhs(Model* m, double t, const double* y, double* dy) noexcept nogil:
    cdef double complex r[9]
    cdef double complex h[9]
    cdef double complex d, om, hh, acc
    cdef double loss[3]
    cdef double w[9]
    cdef double p = 0.0, a, ph
    cdef int i, j, kk
    for i in range(9):
        r[i] = y[2 * i] + y[2 * i + 1] * 1j
    om = _drive(m, t)
    if m.kfac != 0.0:
        a = cabs(om)
        a = a * a
        p = m.kfac * a * a
    hh = 0.5 * om
    h[0] = 0.0
    h[2] = 0.0
    h[6] = 0.0
    if m.frame:
        # interaction picture of diag(0, de - db, -2 db)
        ph = (m.db - m.de) * (t - m.tref)
        h[1] = hh * (cos(ph) + sin(ph) * 1j)
        ph = (m.de + m.db) * (t - m.tref)
        h[5] = hh * (cos(ph) + sin(ph) * 1j)
        h[4] = 0.0
        h[8] = 0.0
    else:
        h[1] = hh
        h[5] = hh
        h[4] = m.de - m.db
        h[8] = -2.0 * m.db
    h[3] = conj(h[1])
    h[7] = conj(h[5])
    loss[0] = p
    loss[1] = m.gx + p
    loss[2] = m.gb
    w[0] = 0.0
    w[4] = 0.0
    w[8] = 0.0
    w[1] = 0.5 * (m.gdb + 4.0 * m.gdx)
    w[3] = w[1]
    w[2] = 0.5 * (m.gdb + m.gdx)
    w[6] = w[2]
    w[5] = 0.5 * (4.0 * m.gdb + m.gdx)
    w[7] = w[5]
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for kk in range(3):
                acc = acc + h[3 * i + kk] * r[3 * kk + j] - r[3 * i + kk] * h[3 * kk + j]
            d = -1j * acc - (0.5 * (loss[i] + loss[j]) + w[3 * i + j]) * r[3 * i + j]
            if i == 0 and j == 0:
                d = d + m.gx * r[4]
            elif i == 1 and j == 1:
                d = d + m.gb * r[8] + p * r[0]
            elif i == 2 and j == 2:
                d = d + p * r[4]
            dy[2 * (3 * i + j)] = d.real
            dy[2 * (3 * i + j) + 1] = d.imag
    dy[18] = m.gb * y[16]
    dy[19] = m.gx * y[8]


cdef void _jacobi_rotate(double complex* a, int p, int q) noexcept nogil:
    cdef double complex apq = a[3 * p + q], ph, sp, spc, x, z
    cdef double mag = cabs(apq), theta, t, c, s
    cdef int kk
    if mag == 0.0:
        return
    ph = apq / mag
    theta = 0.5 * (a[3 * q + q].real - a[3 * p + p].real) / mag
    t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
    c = 1.0 / sqrt(t * t + 1.0)
    s = t * c
    sp = s * ph
    spc = conj(sp)
    for kk in range(3):
        x = a[3 * kk + p]
        z = a[3 * kk + q]
        a[3 * kk + p] = c * x - spc * z
        a[3 * kk + q] = sp * x + c * z
    for kk in range(3):
        x = a[3 * p + kk]
        z = a[3 * q + kk]
        a[3 * p + kk] = c * x - sp * z
        a[3 * q + kk] = spc * x + c * z
    a[3 * p + q] = 0.0
    a[3 * q + p] = 0.0


cdef double min_eigenvalue(const double* y) noexcept nogil:
    cdef double complex a[9]
    cdef double complex v
    cdef int i, j, sweep
    cdef double off, scale, lo
    for i in range(3):
        a[4 * i] = y[8 * i]
        for j in range(i + 1, 3):
            v = 0.5 * ((y[2 * (3 * i + j)] + y[2 * (3 * i + j) + 1] * 1j)
                       + conj(y[2 * (3 * j + i)] + y[2 * (3 * j + i) + 1] * 1j))
            a[3 * i + j] = v
            a[3 * j + i] = conj(v)
    for sweep in range(50):
        off = cabs(a[1]) + cabs(a[2]) + cabs(a[5])
        scale = fabs(a[0].real) + fabs(a[4].real) + fabs(a[8].real) + off
        if off <= 1e-300 or off <= 1e-18 * scale:
            break
        _jacobi_rotate(a, 0, 1)
        _jacobi_rotate(a, 0, 2)
        _jacobi_rotate(a, 1, 2)
    lo = a[0].real
    if a[4].real < lo:
        lo = a[4].real
    if a[8].real < lo:
        lo = a[8].real
    return lo


cdef int check_invariants(const double* y, Diag* dg) noexcept nogil:
    cdef double tr = fabs(y[0] + y[8] + y[16] - dg.tr0)
    cdef double trim = fabs(y[1] + y[9] + y[17])
    cdef double herm = 0.0, e
    cdef int i, j, a, b
    if trim > tr:
        tr = trim
    for i in range(3):
        e = 2.0 * fabs(y[2 * (4 * i) + 1])
        if e > herm:
            herm = e
        for j in range(i + 1, 3):
            a = 2 * (3 * i + j)
            b = 2 * (3 * j + i)
            e = hypot(y[a] - y[b], y[a + 1] + y[b + 1])
            if e > herm:
                herm = e
    if tr > dg.max_tr:
        dg.max_tr = tr
    if herm > dg.max_herm:
        dg.max_herm = herm
    e = min_eigenvalue(y)
    if e < dg.min_eig:
        dg.min_eig = e
    if tr > 10.0 * dg.tr_tol or herm > 10.0 * dg.herm_tol or e < -10.0 * dg.eig_tol:
        return 1
    if tr != tr or herm != herm or e != e:
        return 1
    return 0


cdef inline int in_pulse(Model* m, double t) noexcept nogil:
    cdef int j
    for j in range(m.npulse):
        if m.omega[j] > 0.0 and t >= m.tc[j] - m.window and t < m.tc[j] + m.window:
            return 1
    return 0


cdef inline double next_break(const double* br, int nbr, double t) noexcept nogil:
    cdef int i
    cdef double eps = 1e-12 * (1.0 + fabs(t))
    for i in range(nbr):
        if br[i] > t + eps:
            return br[i]
    return 1e300


cdef double wnorm(const double* v, const double* y0, const double* y1, double rtol, double atol) noexcept nogil:
    cdef double s = 0.0, sk, a, b
    cdef int i
    for i in range(NY):
        a = fabs(y0[i])
        b = fabs(y1[i])
        sk = atol + rtol * (a if a > b else b)
        s += (v[i] / sk) * (v[i] / sk)
    return sqrt(s / NY)


cdef void hermite(double th, double h, const double* y0, const double* f0,
                  const double* y1, const double* f1, double* out) noexcept nogil:
    cdef double th2 = th * th, th3 = th2 * th
    cdef double a0 = 2.0 * th3 - 3.0 * th2 + 1.0
    cdef double b0 = (th3 - 2.0 * th2 + th) * h
    cdef double a1 = -2.0 * th3 + 3.0 * th2
    cdef double b1 = (th3 - th2) * h
    cdef int i
    for i in range(NY):
        out[i] = a0 * y0[i] + b0 * f0[i] + a1 * y1[i] + b1 * f1[i]


cdef int emit_samples(double t, double tn, const double* y0, const double* f0,
                      const double* y1, const double* f1, const double* st, int ns,
                      int isamp, double* out) noexcept nogil:
    cdef double h = tn - t
    while isamp < ns and st[isamp] <= tn:
        hermite((st[isamp] - t) / h, h, y0, f0, y1, f1, out + NY * isamp)
        isamp += 1
    return isamp


# Dormand-Prince 5(4) tableau
cdef double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0, A73 = 500.0 / 1113.0, A74 = 125.0 / 192.0, A75 = -2187.0 / 6784.0, A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0, E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0


cdef int run_adaptive(Model* m, double t0, double t1, double* y, double rtol, double atol,
                      double h_pulse, double h_dark, double h_min, const double* br, int nbr,
                      const double* st, int ns, double* samples, Diag* dg, double* stats) noexcept nogil:
    cdef double k1[NY], k2[NY], k3[NY], k4[NY], k5[NY], k6[NY], k7[NY]
    cdef double yt[NY], yn[NY], ye[NY]
    cdef double t = t0, h, hlim, hmax, htry, tn, err, fac11, fac, facold = 1e-4, hnew, d0, d1, d2, h0, h1, nb
    cdef double beta = 0.04, expo1 = 0.2 - 0.04 * 0.75, safe = 0.9, facc1 = 5.0, facc2 = 0.1
    cdef int i, isamp = 0, reject = 0, nacc = 0, nrej = 0, nfev = 0, status = OK, clipped
    cdef long maxsteps = 50000000

    while isamp < ns and st[isamp] <= t0:
        for i in range(NY):
            samples[NY * isamp + i] = y[i]
        isamp += 1

    rhs(m, t, y, k1)
    nfev += 1
    # initial step (Hairer)
    for i in range(NY):
        yt[i] = y[i] / (atol + rtol * fabs(y[i]))
        ye[i] = k1[i] / (atol + rtol * fabs(y[i]))
    d0 = 0.0
    d1 = 0.0
    for i in range(NY):
        d0 += yt[i] * yt[i]
        d1 += ye[i] * ye[i]
    d0 = sqrt(d0 / NY)
    d1 = sqrt(d1 / NY)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    hmax = h_pulse if in_pulse(m, t) else h_dark
    if h0 > hmax:
        h0 = hmax
    for i in range(NY):
        yt[i] = y[i] + h0 * k1[i]
    rhs(m, t + h0, yt, k2)
    nfev += 1
    d2 = 0.0
    for i in range(NY):
        err = (k2[i] - k1[i]) / (atol + rtol * fabs(y[i]))
        d2 += err * err
    d2 = sqrt(d2 / NY) / h0
    if d1 > d2:
        d2 = d1
    if d2 <= 1e-15:
        h1 = h0 * 1e-3
        if h1 < 1e-6:
            h1 = 1e-6
    else:
        h1 = pow(0.01 / d2, 0.2)
    h = 100.0 * h0
    if h1 < h:
        h = h1
    if hmax < h:
        h = hmax

    while t < t1:
        if nacc + nrej > maxsteps:
            status = MAX_STEPS
            break
        if h < h_min:
            status = STEP_UNDERFLOW
            break
        hmax = h_pulse if in_pulse(m, t) else h_dark
        if h > hmax:
            h = hmax
        nb = next_break(br, nbr, t)
        if nb > t1:
            nb = t1
        hlim = nb - t
        clipped = 0
        htry = h
        if htry >= hlim:
            htry = hlim
            clipped = 1

        for i in range(NY):
            yt[i] = y[i] + htry * A21 * k1[i]
        rhs(m, t + C2 * htry, yt, k2)
        for i in range(NY):
            yt[i] = y[i] + htry * (A31 * k1[i] + A32 * k2[i])
        rhs(m, t + C3 * htry, yt, k3)
        for i in range(NY):
            yt[i] = y[i] + htry * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(m, t + C4 * htry, yt, k4)
        for i in range(NY):
            yt[i] = y[i] + htry * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(m, t + C5 * htry, yt, k5)
        for i in range(NY):
            yt[i] = y[i] + htry * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        tn = nb if clipped else t + htry
        rhs(m, tn, yt, k6)
        for i in range(NY):
            yn[i] = y[i] + htry * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
        rhs(m, tn, yn, k7)
        nfev += 6
        for i in range(NY):
            ye[i] = htry * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        err = wnorm(ye, y, yn, rtol, atol)
        if err != err:
            err = 1e10
        fac11 = pow(err if err > 1e-300 else 1e-300, expo1)
        if err <= 1.0:
            fac = fac11 / pow(facold, beta)
            fac = fac / safe
            if fac < facc2:
                fac = facc2
            if fac > facc1:
                fac = facc1
            hnew = htry / fac
            facold = err if err > 1e-4 else 1e-4
            isamp = emit_samples(t, tn, y, k1, yn, k7, st, ns, isamp, samples)
            for i in range(NY):
                y[i] = yn[i]
                k1[i] = k7[i]
            t = tn
            nacc += 1
            if check_invariants(y, dg):
                status = INVARIANT_BREACH
                break
            if reject:
                if hnew > htry:
                    hnew = htry
                reject = 0
            if clipped and hnew < h:
                hnew = h
            h = hnew
        else:
            fac = fac11 / safe
            if fac > facc1:
                fac = facc1
            h = htry / fac
            reject = 1
            nrej += 1

    stats[0] = nacc
    stats[1] = nrej
    stats[2] = nfev
    stats[3] = t
    stats[4] = h
    return status


cdef int run_rk4(Model* m, double t0, double t1, double* y, double hfix, const double* st, int ns,
                 double* samples, Diag* dg, double* stats) noexcept nogil:
    cdef double k1[NY], k2[NY], k3[NY], k4[NY], yt[NY], yn[NY], f1[NY]
    cdef double t = t0, h, tn
    cdef long n = 0, nsteps, step
    cdef int i, isamp = 0, status = OK, nfev = 0
    while isamp < ns and st[isamp] <= t0:
        for i in range(NY):
            samples[NY * isamp + i] = y[i]
        isamp += 1
    nsteps = <long>((t1 - t0) / hfix)
    if t0 + nsteps * hfix < t1 - 1e-12 * (1.0 + fabs(t1)):
        nsteps += 1
    rhs(m, t, y, k1)
    nfev += 1
    for step in range(nsteps):
        tn = t0 + (step + 1) * hfix
        if step == nsteps - 1 or tn > t1:
            tn = t1
        h = tn - t
        for i in range(NY):
            yt[i] = y[i] + 0.5 * h * k1[i]
        rhs(m, t + 0.5 * h, yt, k2)
        for i in range(NY):
            yt[i] = y[i] + 0.5 * h * k2[i]
        rhs(m, t + 0.5 * h, yt, k3)
        for i in range(NY):
            yt[i] = y[i] + h * k3[i]
        rhs(m, tn, yt, k4)
        for i in range(NY):
            yn[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        rhs(m, tn, yn, f1)
        nfev += 4
        if isamp < ns and st[isamp] <= tn:
            isamp = emit_samples(t, tn, y, k1, yn, f1, st, ns, isamp, samples)
        for i in range(NY):
            y[i] = yn[i]
            k1[i] = f1[i]
        t = tn
        n += 1
        if check_invariants(y, dg):
            status = INVARIANT_BREACH
            break
    stats[0] = n
    stats[1] = 0
    stats[2] = nfev
    stats[3] = t
    stats[4] = hfix
    return status


def integrate(double[::1] y0, double t0, double t1,
              double[::1] omega, double[::1] tc, double[::1] phase,
              double sigma, double delta_b, double[::1] rates,
              int method, double rtol, double atol,
              double h_pulse, double h_dark, double h_fixed, double h_min,
              double window, double[::1] breaks, double[::1] sample_times,
              double[::1] tols, int frame=0):
    """Integrate the augmented master equation from ``t0`` to ``t1``.

    ``rates`` is ``(gamma_b, gamma_x, gamma_db, gamma_dx, delta_e, kfac)``
    where ``kfac = k**4 / (2 w**3)``. ``method`` 0 is adaptive
    Dormand-Prince, 1 is fixed-step RK4. With ``frame=1`` the state is
    carried in the interaction picture of the diagonal Hamiltonian referenced
    to ``t0``; ``y`` and ``samples`` are returned in that picture. Returns ``(status, y, samples,
    stats)`` with ``stats = (accepted, rejected, nfev, t_reached, h_last,
    max_trace_dev, max_herm_dev, min_eig)``.
    """
    cdef Model m
    cdef Diag dg
    cdef int status
    cdef int n = omega.shape[0]
    cdef int ns = sample_times.shape[0]
    cdef int nbr = breaks.shape[0]
    cph_arr = np.cos(np.asarray(phase))
    sph_arr = np.sin(np.asarray(phase))
    cdef double[::1] cph = cph_arr
    cdef double[::1] sph = sph_arr
    y_arr = np.array(y0, dtype=np.float64, copy=True)
    cdef double[::1] y = y_arr
    samples_arr = np.zeros((max(ns, 1), NY), dtype=np.float64)
    cdef double[:, ::1] samples = samples_arr
    stats_arr = np.zeros(8, dtype=np.float64)
    cdef double[::1] stats = stats_arr
    cdef double dummy = 0.0

    m.npulse = n
    m.omega = &omega[0] if n > 0 else &dummy
    m.tc = &tc[0] if n > 0 else &dummy
    m.cph = &cph[0] if n > 0 else &dummy
    m.sph = &sph[0] if n > 0 else &dummy
    m.inv_s2 = TWO_LN2 / (sigma * sigma)
    m.db = delta_b
    m.gb = rates[0]
    m.gx = rates[1]
    m.gdb = rates[2]
    m.gdx = rates[3]
    m.de = rates[4]
    m.kfac = rates[5]
    m.window = window
    m.frame = frame
    m.tref = t0

    dg.tr0 = y[0] + y[8] + y[16]
    dg.max_tr = 0.0
    dg.max_herm = 0.0
    dg.min_eig = 1e300
    dg.tr_tol = tols[0]
    dg.herm_tol = tols[1]
    dg.eig_tol = tols[2]
    check_invariants(&y[0], &dg)

    with nogil:
        if method == 0:
            status = run_adaptive(&m, t0, t1, &y[0], rtol, atol, h_pulse, h_dark, h_min,
                                  &breaks[0] if nbr > 0 else &dummy, nbr,
                                  &sample_times[0] if ns > 0 else &dummy, ns,
                                  &samples[0, 0], &dg, &stats[0])
        else:
            status = run_rk4(&m, t0, t1, &y[0], h_fixed,
                             &sample_times[0] if ns > 0 else &dummy, ns,
                             &samples[0, 0], &dg, &stats[0])
    stats[5] = dg.max_tr
    stats[6] = dg.max_herm
    stats[7] = dg.min_eig
    return status, y_arr, samples_arr[:ns], stats_arr


def rhs_vector(double t, double[::1] y, double[::1] omega, double[::1] tc, double[::1] phase,
               double sigma, double delta_b, double[::1] rates, int frame=0, double tref=0.0):
    """Single right-hand-side evaluation on the 20-component state."""
    cdef Model m
    cdef int n = omega.shape[0]
    cph_arr = np.cos(np.asarray(phase))
    sph_arr = np.sin(np.asarray(phase))
    cdef double[::1] cph = cph_arr
    cdef double[::1] sph = sph_arr
    out_arr = np.zeros(NY, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double dummy = 0.0
    m.npulse = n
    m.omega = &omega[0] if n > 0 else &dummy
    m.tc = &tc[0] if n > 0 else &dummy
    m.cph = &cph[0] if n > 0 else &dummy
    m.sph = &sph[0] if n > 0 else &dummy
    m.inv_s2 = TWO_LN2 / (sigma * sigma)
    m.db = delta_b
    m.gb = rates[0]
    m.gx = rates[1]
    m.gdb = rates[2]
    m.gdx = rates[3]
    m.de = rates[4]
    m.kfac = rates[5]
    m.window = 0.0
    m.frame = frame
    m.tref = tref
    rhs(&m, t, &y[0], &out[0])
    return out_arr


def min_eig(double[::1] y):
    return min_eigenvalue(&y[0])
