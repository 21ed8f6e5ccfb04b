"""Pure-Python kernels; same signatures and results as the compiled ``_kernels``.

Functions are passed as packed rows (see :meth:`ScalarFn.pack`)::

    [code, p0, p1, p2, p3, shift, scale, offset, tab_start, tab_len]

Status codes returned by the integrators: 0 ok, 1 non-finite state,
2 step underflow, 3 non-positive diffusion coefficient.
"""

import math

import numpy as np

OK, NONFINITE, UNDERFLOW, BAD_DIFFUSION = 0, 1, 2, 3


def _exp(z):
    try:
        return math.exp(z)
    except OverflowError:
        return math.inf


def _base(row, knots, x):
    code = int(row[0])
    if code == 0:
        return row[1] * x
    if code == 1:
        return row[1] * x / (row[2] + x)
    if code == 2:
        return row[1] / (1.0 + row[2] * x)
    if code == 3:
        z = row[3] * (x - 1.0)
        return _exp(-row[1] * (x - 1.0)) + row[2] * max(-1.0, min(1.0, z))
    if code == 4:
        return row[1]
    start, count = int(row[8]), int(row[9])
    xs = knots[start : start + count, 0]
    ys = knots[start : start + count, 1]
    lo, hi = 0, count - 2
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid - 1
    slope = (ys[lo + 1] - ys[lo]) / (xs[lo + 1] - xs[lo])
    return ys[lo] + slope * (x - xs[lo])


def eval_packed(row, knots, s):
    """Value of one packed function at ``s``."""
    return row[6] * (_base(row, knots, s + row[5]) - row[7])


def _evaluator(row, knots):
    # specialize the common kinds into closures to cut dispatch cost
    code = int(row[0])
    shift, scale, offset = float(row[5]), float(row[6]), float(row[7])
    p1, p2 = float(row[1]), float(row[2])
    if code == 0:
        k = scale * p1
        c = scale * (p1 * shift - offset)
        return lambda s: k * s + c
    if code == 1:
        return lambda s: scale * (p1 * (s + shift) / (p2 + s + shift) - offset)
    if code == 4:
        c = scale * (p1 - offset)
        return lambda s: c
    row = np.array(row, dtype=float)
    return lambda s: row[6] * (_base(row, knots, s + row[5]) - row[7])


def _ode_rhs_factory(f_rows, g_rows, mu_rows, knots, m, n):
    f = [_evaluator(r, knots) for r in f_rows]
    g = [_evaluator(r, knots) for r in g_rows]
    mu = [_evaluator(r, knots) for r in mu_rows]

    def rhs(x):
        out = [0.0] * (m * n)
        for j in range(m):
            base = j * n
            gv = [g[i](x[base + i]) for i in range(n)]
            out[base] = -f[0](x[base]) - gv[n - 1]
            for i in range(1, n):
                out[base + i] = -f[i](x[base + i]) + gv[i - 1]
        for j in range(m - 1):
            for i in range(n):
                a = j * n + i
                q = mu[j * n + i](x[a] - x[a + n])
                out[a] -= q
                out[a + n] += q
        return out

    return rhs


def ode_rhs(f_rows, g_rows, mu_rows, knots, m, n, x):
    rhs = _ode_rhs_factory(f_rows, g_rows, mu_rows, knots, m, n)
    return np.array(rhs([float(v) for v in x]))


def integrate_ode(f_rows, g_rows, mu_rows, knots, m, n, x0, dt, t_end, stride):
    """Classical RK4 with fixed step ``dt`` up to ``t_end``.

    Output every ``stride`` steps and at ``t_end``; a shorter final step
    lands exactly on ``t_end``.  Returns ``(times, states, status, t_fail)``.
    """
    rhs = _ode_rhs_factory(f_rows, g_rows, mu_rows, knots, m, n)
    dim = m * n
    n_full = int(math.floor(t_end / dt + 1e-9))
    rem = t_end - n_full * dt
    if rem <= 1e-12 * max(1.0, t_end):
        rem = 0.0
    x = [float(v) for v in x0]
    times = [0.0]
    states = [list(x)]
    total = n_full + (1 if rem > 0.0 else 0)
    for step in range(1, total + 1):
        h = dt if step <= n_full else rem
        k1 = rhs(x)
        k2 = rhs([x[i] + 0.5 * h * k1[i] for i in range(dim)])
        k3 = rhs([x[i] + 0.5 * h * k2[i] for i in range(dim)])
        k4 = rhs([x[i] + h * k3[i] for i in range(dim)])
        xn = [x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(dim)]
        t = step * dt if step <= n_full else t_end
        if not all(math.isfinite(v) for v in xn):
            return np.array(times), np.array(states), NONFINITE, (step - 1) * dt
        x = xn
        if step % stride == 0 or step == total:
            times.append(t)
            states.append(list(x))
    return np.array(times), np.array(states).reshape(len(times), dim), OK, t_end


def _vector_eval(rows, knots, psi):
    out = np.empty_like(psi)
    for i, row in enumerate(rows):
        code = int(row[0])
        if code == 0:
            out[i] = row[6] * row[1] * psi[i] + row[6] * (row[1] * row[5] - row[7])
            continue
        if code == 4:
            out[i] = row[6] * (row[1] - row[7])
            continue
        x = psi[i] + row[5]
        if code == 1:
            base = row[1] * x / (row[2] + x)
        elif code == 2:
            base = row[1] / (1.0 + row[2] * x)
        elif code == 3:
            with np.errstate(over="ignore"):
                base = np.exp(-row[1] * (x - 1.0)) + row[2] * np.clip(row[3] * (x - 1.0), -1.0, 1.0)
        else:
            base = np.array([_base(row, knots, float(v)) for v in x])
        out[i] = row[6] * (base - row[7])
    return out


def _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, psi):
    hf = _vector_eval(h_rows, knots, 0.5 * (psi[:, 1:] + psi[:, :-1]))
    hmin = float(hf.min())
    hmax = float(hf.max())
    flux = hf * np.diff(psi, axis=1) / dx
    out = np.empty_like(psi)
    out[:, 1:-1] = (flux[:, 1:] - flux[:, :-1]) / dx
    # half control volumes at the no-flux boundaries
    out[:, 0] = 2.0 * flux[:, 0] / dx
    out[:, -1] = -2.0 * flux[:, -1] / dx
    fv = _vector_eval(f_rows, knots, psi)
    gv = _vector_eval(g_rows, knots, psi)
    out -= fv
    out[0] -= gv[n - 1]
    out[1:] += gv[:-1]
    return out, hmin, hmax


def pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, psi):
    """Method-of-lines right-hand side; returns ``(dpsi, hmin)``."""
    psi = np.asarray(psi, dtype=float).reshape(n, N)
    out, hmin, _ = _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, psi)
    return out, hmin


def _output_time(k, cadence, t_end):
    # multiples of the cadence, snapped to t_end when within rounding of it
    t = k * cadence
    return t_end if t >= t_end - 1e-9 * cadence else t


def integrate_pde(f_rows, g_rows, h_rows, knots, n, N, dx, psi0, t_end, dt, cadence, dt_floor):
    """RK4 in time; ``dt <= 0`` selects the diffusive stability guard.

    Returns ``(times, states, status, t_fail, n_steps, dt_min, dt_max)``.
    """
    psi = np.array(psi0, dtype=float).reshape(n, N)
    auto = dt <= 0.0
    t = 0.0
    n_out = 1
    next_out = _output_time(n_out, cadence, t_end)
    times = [0.0]
    states = [psi.copy()]
    n_steps = 0
    dt_min, dt_max = math.inf, 0.0
    while t < t_end:
        k1, hmin, hmax = _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, psi)
        if not hmin > 0.0:
            return _pack(times, states, BAD_DIFFUSION, t, n_steps, dt_min, dt_max)
        step = 0.4 * dx * dx / (2.0 * hmax) if auto else dt
        if step < dt_floor:
            return _pack(times, states, UNDERFLOW, t, n_steps, dt_min, dt_max)
        land = False
        # stretch by up to 1e-6 rather than leave a sliver before the output time
        if step * (1.0 + 1e-6) >= next_out - t:
            step = next_out - t
            land = True
        k2 = _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, psi + 0.5 * step * k1)[0]
        k3 = _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, psi + 0.5 * step * k2)[0]
        k4 = _pde_rhs(f_rows, g_rows, h_rows, knots, n, N, dx, psi + step * k3)[0]
        new = psi + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(new)):
            return _pack(times, states, NONFINITE, t, n_steps, dt_min, dt_max)
        psi = new
        n_steps += 1
        dt_min = min(dt_min, step)
        dt_max = max(dt_max, step)
        if land:
            t = next_out
            times.append(t)
            states.append(psi.copy())
            n_out += 1
            next_out = _output_time(n_out, cadence, t_end)
            if t >= t_end:
                break
        else:
            t += step
    return _pack(times, states, OK, t_end, n_steps, dt_min, dt_max)


def _pack(times, states, status, t, n_steps, dt_min, dt_max):
    return np.array(times), np.array(states), status, t, n_steps, dt_min, dt_max


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    A pair is rotated while ``|a_pq| > tol * sqrt(|a_pp a_qq|)``; this
    relative threshold keeps small eigenvalues of graded matrices accurate.
    Returns ``(eigenvalues ascending, eigenvectors as columns, sweeps)``.
    """
    a = [list(map(float, r)) for r in np.asarray(a, dtype=float)]
    n = len(a)
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                if abs(apq) <= tol * math.sqrt(abs(a[p][p] * a[q][q])) or abs(apq) < 1e-300:
                    continue
                rotated = True
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                a[p][p] -= t * apq
                a[q][q] += t * apq
                a[p][q] = a[q][p] = 0.0
                for r in range(n):
                    if r != p and r != q:
                        arp, arq = a[r][p], a[r][q]
                        a[r][p] = a[p][r] = c * arp - s * arq
                        a[r][q] = a[q][r] = s * arp + c * arq
                    vrp, vrq = v[r][p], v[r][q]
                    v[r][p] = c * vrp - s * vrq
                    v[r][q] = s * vrp + c * vrq
        if not rotated:
            break
    w = np.array([a[i][i] for i in range(n)])
    order = np.argsort(w, kind="stable")
    return w[order], np.array(v)[:, order], sweeps
