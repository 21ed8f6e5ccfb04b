# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: packed nonlinearity evaluation, RK4 integration of the
lumped/compartmental ODEs and of the method-of-lines PDE, and cyclic Jacobi.

Signatures and return values match ``cyclostab._fallback`` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, floor, isfinite, copysign, INFINITY

cnp.import_array()

DEF OK = 0
DEF NONFINITE = 1
DEF UNDERFLOW = 2
DEF BAD_DIFFUSION = 3


cdef inline double _base(const double[:, ::1] rows, Py_ssize_t r,
                         const double[:, ::1] knots, double x) noexcept nogil:
    cdef int code = <int>rows[r, 0]
    cdef double z, slope
    cdef Py_ssize_t start, count, lo, hi, mid
    if code == 0:
        return rows[r, 1] * x
    elif code == 1:
        return rows[r, 1] * x / (rows[r, 2] + x)
    elif code == 2:
        return rows[r, 1] / (1.0 + rows[r, 2] * x)
    elif code == 3:
        z = rows[r, 3] * (x - 1.0)
        if z > 1.0:
            z = 1.0
        elif z < -1.0:
            z = -1.0
        return exp(-rows[r, 1] * (x - 1.0)) + rows[r, 2] * z
    elif code == 4:
        return rows[r, 1]
    start = <Py_ssize_t>rows[r, 8]
    count = <Py_ssize_t>rows[r, 9]
    lo = 0
    hi = count - 2
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if knots[start + mid, 0] <= x:
            lo = mid
        else:
            hi = mid - 1
    slope = (knots[start + lo + 1, 1] - knots[start + lo, 1]) / (
        knots[start + lo + 1, 0] - knots[start + lo, 0])
    return knots[start + lo, 1] + slope * (x - knots[start + lo, 0])


cdef inline double _eval(const double[:, ::1] rows, Py_ssize_t r,
                         const double[:, ::1] knots, double s) noexcept nogil:
    if <int>rows[r, 0] == 0:
        # same arithmetic as the fallback's specialized linear closure
        return rows[r, 6] * rows[r, 1] * s + rows[r, 6] * (rows[r, 1] * rows[r, 5] - rows[r, 7])
    if <int>rows[r, 0] == 4:
        return rows[r, 6] * (rows[r, 1] - rows[r, 7])
    return rows[r, 6] * (_base(rows, r, knots, s + rows[r, 5]) - rows[r, 7])


def eval_packed(double[::1] row, const double[:, ::1] knots, double s):
    cdef double[:, ::1] rows = np.ascontiguousarray(np.asarray(row).reshape(1, -1))
    return _eval(rows, 0, knots, s)


cdef void _ode_rhs(const double[:, ::1] f_rows, const double[:, ::1] g_rows,
                   const double[:, ::1] mu_rows, const double[:, ::1] knots,
                   Py_ssize_t m, Py_ssize_t n, const double* x, double* out,
                   double* gv) noexcept nogil:
    cdef Py_ssize_t j, i, a, base
    cdef double q
    for j in range(m):
        base = j * n
        for i in range(n):
            gv[i] = _eval(g_rows, i, knots, x[base + i])
        out[base] = -_eval(f_rows, 0, knots, x[base]) - gv[n - 1]
        for i in range(1, n):
            out[base + i] = -_eval(f_rows, i, knots, x[base + i]) + gv[i - 1]
    for j in range(m - 1):
        for i in range(n):
            a = j * n + i
            q = _eval(mu_rows, a, knots, x[a] - x[a + n])
            out[a] -= q
            out[a + n] += q


def ode_rhs(const double[:, ::1] f_rows, const double[:, ::1] g_rows,
            const double[:, ::1] mu_rows, const double[:, ::1] knots,
            Py_ssize_t m, Py_ssize_t n, x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.zeros(m * n)
    cdef double[::1] ov = out
    cdef double[::1] gv = np.zeros(n)
    _ode_rhs(f_rows, g_rows, mu_rows, knots, m, n, &xv[0], &ov[0], &gv[0])
    return out


def integrate_ode(const double[:, ::1] f_rows, const double[:, ::1] g_rows,
                  const double[:, ::1] mu_rows, const double[:, ::1] knots,
                  Py_ssize_t m, Py_ssize_t n, x0, double dt, double t_end,
                  Py_ssize_t stride):
    cdef Py_ssize_t dim = m * n
    cdef Py_ssize_t n_full = <Py_ssize_t>floor(t_end / dt + 1e-9)
    cdef double rem = t_end - n_full * dt
    if rem <= 1e-12 * max(1.0, t_end):
        rem = 0.0
    cdef Py_ssize_t total = n_full + (1 if rem > 0.0 else 0)
    cdef Py_ssize_t n_out = 1 + total // stride + (1 if total % stride != 0 else 0)
    times = np.zeros(n_out)
    states = np.zeros((n_out, dim))
    cdef double[::1] tv = times
    cdef double[:, ::1] sv = states
    cdef double[:, ::1] work = np.zeros((7, dim))
    cdef double[::1] gv = np.zeros(max(n, 1))
    cdef double* x = &work[0, 0]
    cdef double* k1 = &work[1, 0]
    cdef double* k2 = &work[2, 0]
    cdef double* k3 = &work[3, 0]
    cdef double* k4 = &work[4, 0]
    cdef double* tmp = &work[5, 0]
    cdef double* xn = &work[6, 0]
    cdef Py_ssize_t i, step, k = 0
    cdef double h, t
    cdef int status = OK
    cdef double t_fail = t_end
    x0v = np.ascontiguousarray(x0, dtype=np.float64)
    for i in range(dim):
        x[i] = x0v[i]
        sv[0, i] = x[i]
    tv[0] = 0.0
    with nogil:
        for step in range(1, total + 1):
            h = dt if step <= n_full else rem
            _ode_rhs(f_rows, g_rows, mu_rows, knots, m, n, x, k1, &gv[0])
            for i in range(dim):
                tmp[i] = x[i] + 0.5 * h * k1[i]
            _ode_rhs(f_rows, g_rows, mu_rows, knots, m, n, tmp, k2, &gv[0])
            for i in range(dim):
                tmp[i] = x[i] + 0.5 * h * k2[i]
            _ode_rhs(f_rows, g_rows, mu_rows, knots, m, n, tmp, k3, &gv[0])
            for i in range(dim):
                tmp[i] = x[i] + h * k3[i]
            _ode_rhs(f_rows, g_rows, mu_rows, knots, m, n, tmp, k4, &gv[0])
            for i in range(dim):
                xn[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            for i in range(dim):
                if not isfinite(xn[i]):
                    status = NONFINITE
                    break
            if status != OK:
                t_fail = (step - 1) * dt
                break
            for i in range(dim):
                x[i] = xn[i]
            if step % stride == 0 or step == total:
                k += 1
                tv[k] = step * dt if step <= n_full else t_end
                for i in range(dim):
                    sv[k, i] = x[i]
    return times[: k + 1], states[: k + 1], status, t_fail


cdef double _pde_rhs(const double[:, ::1] f_rows, const double[:, ::1] g_rows,
                     const double[:, ::1] h_rows, const double[:, ::1] knots,
                     Py_ssize_t n, Py_ssize_t N, double dx, const double* psi,
                     double* out, double* flux, double* gv, double* hmax) noexcept nogil:
    # returns the minimum face diffusion coefficient
    cdef Py_ssize_t i, j, off
    cdef double hf, hmin = INFINITY, hm = -INFINITY
    for i in range(n):
        off = i * N
        for j in range(N - 1):
            hf = _eval(h_rows, i, knots, 0.5 * (psi[off + j] + psi[off + j + 1]))
            if hf < hmin:
                hmin = hf
            if hf > hm:
                hm = hf
            flux[j] = hf * (psi[off + j + 1] - psi[off + j]) / dx
        out[off] = 2.0 * flux[0] / dx
        for j in range(1, N - 1):
            out[off + j] = (flux[j] - flux[j - 1]) / dx
        out[off + N - 1] = -2.0 * flux[N - 2] / dx
    for i in range(n):
        off = i * N
        for j in range(N):
            out[off + j] -= _eval(f_rows, i, knots, psi[off + j])
    # cyclic coupling: -g_n into the first component, +g_{i-1} into the rest
    for j in range(N):
        gv[j] = _eval(g_rows, n - 1, knots, psi[(n - 1) * N + j])
    for j in range(N):
        out[j] -= gv[j]
    for i in range(1, n):
        for j in range(N):
            out[i * N + j] += _eval(g_rows, i - 1, knots, psi[(i - 1) * N + j])
    hmax[0] = hm
    return hmin


def pde_rhs(const double[:, ::1] f_rows, const double[:, ::1] g_rows,
            const double[:, ::1] h_rows, const double[:, ::1] knots,
            Py_ssize_t n, Py_ssize_t N, double dx, psi):
    cdef double[::1] pv = np.ascontiguousarray(psi, dtype=np.float64).reshape(-1)
    out = np.zeros(n * N)
    cdef double[::1] ov = out
    cdef double[::1] flux = np.zeros(N)
    cdef double[::1] gv = np.zeros(N)
    cdef double hmax
    cdef double hmin = _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx,
                                &pv[0], &ov[0], &flux[0], &gv[0], &hmax)
    return out.reshape(n, N), hmin


cdef inline double _output_time(Py_ssize_t k, double cadence, double t_end) nogil:
    # multiples of the cadence, snapped to t_end when within rounding of it
    cdef double t = k * cadence
    if t >= t_end - 1e-9 * cadence:
        return t_end
    return t


def integrate_pde(const double[:, ::1] f_rows, const double[:, ::1] g_rows,
                  const double[:, ::1] h_rows, const double[:, ::1] knots,
                  Py_ssize_t n, Py_ssize_t N, double dx, psi0, double t_end,
                  double dt, double cadence, double dt_floor):
    cdef Py_ssize_t dim = n * N
    cdef bint auto = dt <= 0.0
    cdef double[:, ::1] work = np.zeros((7, dim))
    cdef double[::1] flux = np.zeros(N)
    cdef double[::1] gv = np.zeros(N)
    cdef double* psi = &work[0, 0]
    cdef double* k1 = &work[1, 0]
    cdef double* k2 = &work[2, 0]
    cdef double* k3 = &work[3, 0]
    cdef double* k4 = &work[4, 0]
    cdef double* tmp = &work[5, 0]
    cdef double* new = &work[6, 0]
    cdef double t = 0.0, next_out = _output_time(1, cadence, t_end), step, hmin, hmax, dummy
    cdef double dt_min = INFINITY, dt_max = 0.0
    cdef Py_ssize_t i, n_steps = 0, n_out = 1
    cdef int status = OK
    cdef bint land
    p0 = np.ascontiguousarray(psi0, dtype=np.float64).reshape(-1)
    for i in range(dim):
        psi[i] = p0[i]
    times = [0.0]
    states = [p0.reshape(n, N).copy()]
    buf = np.zeros(dim)
    cdef double[::1] bv = buf
    while t < t_end:
        with nogil:
            while t < t_end:
                hmin = _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, psi, k1,
                                &flux[0], &gv[0], &hmax)
                if not hmin > 0.0:
                    status = BAD_DIFFUSION
                    break
                step = 0.4 * dx * dx / (2.0 * hmax) if auto else dt
                if step < dt_floor:
                    status = UNDERFLOW
                    break
                land = False
                if step * (1.0 + 1e-6) >= next_out - t:
                    step = next_out - t
                    land = True
                for i in range(dim):
                    tmp[i] = psi[i] + 0.5 * step * k1[i]
                _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, tmp, k2, &flux[0], &gv[0], &dummy)
                for i in range(dim):
                    tmp[i] = psi[i] + 0.5 * step * k2[i]
                _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, tmp, k3, &flux[0], &gv[0], &dummy)
                for i in range(dim):
                    tmp[i] = psi[i] + step * k3[i]
                _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, tmp, k4, &flux[0], &gv[0], &dummy)
                for i in range(dim):
                    new[i] = psi[i] + step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                for i in range(dim):
                    if not isfinite(new[i]):
                        status = NONFINITE
                        break
                if status != OK:
                    break
                for i in range(dim):
                    psi[i] = new[i]
                n_steps += 1
                if step < dt_min:
                    dt_min = step
                if step > dt_max:
                    dt_max = step
                if land:
                    t = next_out
                    n_out += 1
                    next_out = _output_time(n_out, cadence, t_end)
                    for i in range(dim):
                        bv[i] = psi[i]
                    break
                else:
                    t += step
        if status != OK:
            return np.array(times), np.array(states), status, t, n_steps, dt_min, dt_max
        times.append(t)
        states.append(buf.reshape(n, N).copy())
    return np.array(times), np.array(states), status, t_end, n_steps, dt_min, dt_max


def jacobi_eigh(a, double tol=1e-15, int max_sweeps=100):
    cdef double[:, ::1] A = np.array(a, dtype=np.float64, order="C")
    cdef Py_ssize_t n = A.shape[0]
    V_arr = np.eye(n)
    cdef double[:, ::1] V = V_arr
    cdef Py_ssize_t p, q, r
    cdef double apq, theta, t, c, s, arp, arq, vrp, vrq
    cdef int sweeps = 0
    cdef bint rotated
    with nogil:
        for sweeps in range(1, max_sweeps + 1):
            rotated = False
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    if apq == 0.0:
                        continue
                    if fabs(apq) <= tol * sqrt(fabs(A[p, p] * A[q, q])) or fabs(apq) < 1e-300:
                        continue
                    rotated = True
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    if fabs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    A[p, p] -= t * apq
                    A[q, q] += t * apq
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    for r in range(n):
                        if r != p and r != q:
                            arp = A[r, p]
                            arq = A[r, q]
                            A[r, p] = c * arp - s * arq
                            A[p, r] = A[r, p]
                            A[r, q] = s * arp + c * arq
                            A[q, r] = A[r, q]
                        vrp = V[r, p]
                        vrq = V[r, q]
                        V[r, p] = c * vrp - s * vrq
                        V[r, q] = s * vrp + c * vrq
            if not rotated:
                break
    w = np.array([A[i, i] for i in range(n)])
    order = np.argsort(w, kind="stable")
    return w[order], V_arr[:, order], sweeps
