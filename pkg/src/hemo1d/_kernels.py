"""Compiled inner loops of the network solver.

Everything here works in nondimensional units with unit density. State for
all vessels lives in flat arrays; vessel ``v`` occupies
``off[v] : off[v] + npts[v]``. Midpoint parameters use the same offsets and
hold ``npts[v] - 1`` entries.
"""

import math

import numpy as np
from numba import njit

SQRT_PI = math.sqrt(math.pi)

# status codes returned by advance_block
OK = 0
NEGATIVE_AREA = 1
CFL_VIOLATION = 2
JUNCTION_DIVERGED = 3
BOUNDARY_DIVERGED = 4

NEWTON_MAX = 50
NEWTON_TOL = 1e-11
NEWTON_ACCEPT = 1e-10


@njit(cache=True)
def wave_speed(a, f, a0):
    return math.sqrt(0.5 * f * math.sqrt(a0 / a))


@njit(cache=True)
def pressure(a, f, a0):
    return f * (1.0 - math.sqrt(a0 / a))


@njit(cache=True)
def dpressure(a, f, a0):
    return 0.5 * f * math.sqrt(a0) / (a * math.sqrt(a))


@njit(cache=True)
def flux2(a, q, f, a0):
    return q * q / a + f * math.sqrt(a0 * a)


@njit(cache=True)
def source2(a, q, r0, a0, f, fr, r0x, nu, delta, gcos):
    sa = math.sqrt(a)
    s = -2.0 * SQRT_PI * nu * q / (delta * sa) + gcos * a
    if r0x != 0.0:
        s += (2.0 * sa * (SQRT_PI * f + math.sqrt(a0) * fr) - a * fr) * r0x
    return s


@njit(cache=True)
def char_rate(a, q, r0, a0, f, fr, r0x, nu, delta, gcos, sign):
    """Rate of change of u + sign*(-4c) along the characteristic u + sign*c."""
    u = q / a
    c = wave_speed(a, f, a0)
    rate = -2.0 * SQRT_PI * nu * u / (delta * math.sqrt(a)) + gcos
    if r0x != 0.0:
        p_r0 = fr * (1.0 - math.sqrt(a0 / a)) - f * SQRT_PI / math.sqrt(a)
        c_r0 = c * (0.5 * fr / f + 0.5 / r0)
        rate += -p_r0 * r0x - sign * 4.0 * c_r0 * r0x * (u + sign * c)
    return rate


@njit(cache=True)
def lax_wendroff_vessel(v, dt, A, q, An, qn, r0, a0, f, fr, r0x,
                        r0h, a0h, fh, frh, r0xh, off, npts, dx, gcos, nu, delta,
                        fn, sn, ah, qh):
    """Two-step Lax-Wendroff update of interior nodes of vessel ``v``.

    ``fn``, ``sn``, ``ah`` and ``qh`` are scratch arrays at least as long as
    the vessel.
    """
    o = off[v]
    n = npts[v]
    lam = dt / dx[v]
    gc = gcos[v]
    for j in range(n):
        i = o + j
        fn[j] = flux2(A[i], q[i], f[i], a0[i])
        sn[j] = source2(A[i], q[i], r0[i], a0[i], f[i], fr[i], r0x[i], nu, delta, gc)
    for j in range(n - 1):
        i = o + j
        ah[j] = 0.5 * (A[i] + A[i + 1]) - 0.5 * lam * (q[i + 1] - q[i])
        qh[j] = 0.5 * (q[i] + q[i + 1]) - 0.5 * lam * (fn[j + 1] - fn[j]) + 0.25 * dt * (sn[j] + sn[j + 1])
    # reuse fn, sn for midpoint fluxes and sources
    for j in range(n - 1):
        k = o + j
        fn[j] = flux2(ah[j], qh[j], fh[k], a0h[k])
        sn[j] = source2(ah[j], qh[j], r0h[k], a0h[k], fh[k], frh[k], r0xh[k], nu, delta, gc)
    for j in range(1, n - 1):
        i = o + j
        An[i] = A[i] - lam * (qh[j] - qh[j - 1])
        qn[i] = q[i] - lam * (fn[j] - fn[j - 1]) + 0.5 * dt * (sn[j - 1] + sn[j])


@njit(cache=True)
def outgoing_invariant(v, at_outlet, dt, A, q, r0, a0, f, fr, r0x, off, npts, dx,
                       gcos, nu, delta):
    """Outgoing Riemann variable at a vessel end, advanced to the new time level.

    At the outlet this is ``u - 4c`` carried by the forward characteristic;
    at the inlet ``u + 4c`` carried by the backward one.
    """
    o = off[v]
    if at_outlet:
        b = o + npts[v] - 1
        nb = b - 1
        sign = 1.0
    else:
        b = o
        nb = o + 1
        sign = -1.0
    ab = A[b]
    ub = q[b] / ab
    cb = wave_speed(ab, f[b], a0[b])
    lam = ub + sign * cb
    theta = abs(lam) * dt / dx[v]
    # written as x_b + theta (x_nb - x_b) so that equal neighbours stay exact
    af = A[b] + theta * (A[nb] - A[b])
    qf = q[b] + theta * (q[nb] - q[b])
    r0f = r0[b] + theta * (r0[nb] - r0[b])
    a0f = a0[b] + theta * (a0[nb] - a0[b])
    ff = f[b] + theta * (f[nb] - f[b])
    frf = fr[b] + theta * (fr[nb] - fr[b])
    r0xf = r0x[b] + theta * (r0x[nb] - r0x[b])
    cf = wave_speed(af, ff, a0f)
    w = qf / af - sign * 4.0 * cf
    w += dt * char_rate(af, qf, r0f, a0f, ff, frf, r0xf, nu, delta, gcos[v], sign)
    return w


@njit(cache=True)
def solve_inlet(qin, w, a_guess, f, a0):
    """Area at the inlet given prescribed flow and backward invariant ``u + 4c``."""
    a = a_guess
    for it in range(NEWTON_MAX):
        c = wave_speed(a, f, a0)
        res = qin / a + 4.0 * c - w
        if abs(res) < NEWTON_TOL:
            return a, 0
        d = -qin / (a * a) - c / a
        step = -res / d
        while a + step <= 0.0:
            step *= 0.5
        a += step
    c = wave_speed(a, f, a0)
    if abs(qin / a + 4.0 * c - w) < NEWTON_ACCEPT:
        return a, 0
    return a, 1


@njit(cache=True)
def solve_outlet(w, kz, hist, a_guess, f, a0):
    """Area at a terminal where p = kz*q + hist and q = A (w + 4c)."""
    a = a_guess
    for it in range(NEWTON_MAX):
        c = wave_speed(a, f, a0)
        u = w + 4.0 * c
        res = pressure(a, f, a0) - kz * a * u - hist
        if abs(res) < NEWTON_TOL:
            return a, 0
        d = dpressure(a, f, a0) - kz * (u - c)
        step = -res / d
        while a + step <= 0.0:
            step *= 0.5
        a += step
    c = wave_speed(a, f, a0)
    res = pressure(a, f, a0) - kz * a * (w + 4.0 * c) - hist
    if abs(res) < NEWTON_ACCEPT:
        return a, 0
    return a, 1


@njit(cache=True)
def solve_junction(ap, wp, fp, a0p, ad, wd, fd, a0d):
    """Newton solve of flow conservation and pressure continuity.

    ``ap`` and ``ad`` hold initial guesses; ``ad`` is overwritten. Returns the
    parent area, the final residual norm and an error flag.
    """
    nd = ad.shape[0]
    qd = np.empty(nd)
    dqd = np.empty(nd)
    pd = np.empty(nd)
    dpd = np.empty(nd)
    rp = np.empty(nd)
    for it in range(NEWTON_MAX + 1):
        cp = wave_speed(ap, fp, a0p)
        up = wp + 4.0 * cp
        qp = ap * up
        dqp = up - cp
        pp = pressure(ap, fp, a0p)
        dpp = dpressure(ap, fp, a0p)
        r0 = qp
        rmax = 0.0
        for i in range(nd):
            ci = wave_speed(ad[i], fd[i], a0d[i])
            ui = wd[i] - 4.0 * ci
            qd[i] = ad[i] * ui
            dqd[i] = ui + ci
            pd[i] = pressure(ad[i], fd[i], a0d[i])
            dpd[i] = dpressure(ad[i], fd[i], a0d[i])
            r0 -= qd[i]
            rp[i] = pp - pd[i]
            rmax = max(rmax, abs(rp[i]))
        rmax = max(rmax, abs(r0))
        if rmax < NEWTON_TOL:
            return ap, rmax, 0
        if it == NEWTON_MAX:
            break
        # arrowhead Jacobian solved in closed form
        num = -r0
        den = dqp
        for i in range(nd):
            num += dqd[i] * rp[i] / dpd[i]
            den -= dpp * dqd[i] / dpd[i]
        dap = num / den
        scale = 1.0
        for _ in range(60):
            ok = ap + scale * dap > 0.0
            for i in range(nd):
                dai = (rp[i] + dpp * dap) / dpd[i]
                if ad[i] + scale * dai <= 0.0:
                    ok = False
            if ok:
                break
            scale *= 0.5
        for i in range(nd):
            ad[i] += scale * (rp[i] + dpp * dap) / dpd[i]
        ap += scale * dap
    if rmax < NEWTON_ACCEPT:
        return ap, rmax, 0
    return ap, rmax, 1


@njit(cache=True)
def advance_block(m_start, nsteps, N, dt,
                  A, q, An, qn,
                  r0, a0, f, fr, r0x, r0h, a0h, fh, frh, r0xh,
                  off, npts, dx, gcos, nu, delta,
                  root, qin,
                  j_par, j_ptr, j_dau,
                  t_ves, dtz, hold, qblk, qhist,
                  rec_stride, st_idx, rec,
                  stats, info):
    """Advance ``nsteps`` time steps starting from time index ``m_start``.

    ``dtz[t, s]`` holds ``dt * z_s`` for the first block of lags,
    ``hold[t, s]`` the convolution with history older than the block, and
    ``qblk`` collects new outlet flows for the in-block part.

    ``stats``: [max flow residual, max pressure residual, max CFL,
    inflow volume, outflow volume]; ``info`` receives (vessel, node) on error.
    """
    nv = off.shape[0]
    nj = j_par.shape[0]
    nt = t_ves.shape[0]
    nmax = 0
    for v in range(nv):
        nmax = max(nmax, npts[v])
    fn = np.empty(nmax)
    sn = np.empty(nmax)
    ah = np.empty(nmax)
    qh = np.empty(nmax)
    ad = np.empty(8)
    wd = np.empty(8)
    fd = np.empty(8)
    a0d = np.empty(8)
    for s in range(nsteps):
        m = m_start + s + 1
        # interior
        for v in range(nv):
            lax_wendroff_vessel(v, dt, A, q, An, qn, r0, a0, f, fr, r0x,
                                r0h, a0h, fh, frh, r0xh, off, npts, dx, gcos, nu, delta,
                                fn, sn, ah, qh)
        # root inlet
        b = off[root]
        w = outgoing_invariant(root, False, dt, A, q, r0, a0, f, fr, r0x, off, npts, dx,
                               gcos, nu, delta)
        qi = qin[m % N]
        ab, err = solve_inlet(qi, w, A[b], f[b], a0[b])
        if err:
            info[0] = root
            info[1] = 0
            return BOUNDARY_DIVERGED
        An[b] = ab
        qn[b] = qi
        stats[3] += 0.5 * dt * (qi + q[b])
        # junctions
        for jn in range(nj):
            pv = j_par[jn]
            pb = off[pv] + npts[pv] - 1
            wp = outgoing_invariant(pv, True, dt, A, q, r0, a0, f, fr, r0x, off, npts, dx,
                                    gcos, nu, delta)
            k0 = j_ptr[jn]
            nd = j_ptr[jn + 1] - k0
            for i in range(nd):
                dv = j_dau[k0 + i]
                db = off[dv]
                ad[i] = A[db]
                wd[i] = outgoing_invariant(dv, False, dt, A, q, r0, a0, f, fr, r0x, off,
                                           npts, dx, gcos, nu, delta)
                fd[i] = f[db]
                a0d[i] = a0[db]
            apn, res, err = solve_junction(A[pb], wp, f[pb], a0[pb], ad[:nd], wd[:nd],
                                           fd[:nd], a0d[:nd])
            if err:
                info[0] = pv
                info[1] = jn
                return JUNCTION_DIVERGED
            cp = wave_speed(apn, f[pb], a0[pb])
            qp = apn * (wp + 4.0 * cp)
            An[pb] = apn
            qn[pb] = qp
            qsum = 0.0
            pp = pressure(apn, f[pb], a0[pb])
            pres = 0.0
            for i in range(nd):
                dv = j_dau[k0 + i]
                db = off[dv]
                ci = wave_speed(ad[i], fd[i], a0d[i])
                qdi = ad[i] * (wd[i] - 4.0 * ci)
                An[db] = ad[i]
                qn[db] = qdi
                qsum += qdi
                pres = max(pres, abs(pp - pressure(ad[i], fd[i], a0d[i])))
            stats[0] = max(stats[0], abs(qp - qsum))
            stats[1] = max(stats[1], pres)
        # terminals
        slot = m - m_start - 1
        for t in range(nt):
            v = t_ves[t]
            b = off[v] + npts[v] - 1
            w = outgoing_invariant(v, True, dt, A, q, r0, a0, f, fr, r0x, off, npts, dx,
                                   gcos, nu, delta)
            h = hold[t, slot]
            for u in range(slot):
                h += dtz[t, slot - u] * qblk[t, u]
            ab, err = solve_outlet(w, dtz[t, 0], h, A[b], f[b], a0[b])
            if err:
                info[0] = v
                info[1] = npts[v] - 1
                return BOUNDARY_DIVERGED
            cb = wave_speed(ab, f[b], a0[b])
            qb = ab * (w + 4.0 * cb)
            An[b] = ab
            qn[b] = qb
            qblk[t, slot] = qb
            qhist[t, m % N] = qb
            stats[4] += 0.5 * dt * (qb + q[b])
        # commit and check
        cmax = 0.0
        for v in range(nv):
            o = off[v]
            lam = dt / dx[v]
            for j in range(npts[v]):
                i = o + j
                a = An[i]
                if not (a > 0.0):
                    info[0] = v
                    info[1] = j
                    return NEGATIVE_AREA
                A[i] = a
                q[i] = qn[i]
                cfl = (abs(qn[i]) / a + wave_speed(a, f[i], a0[i])) * lam
                if cfl > cmax:
                    cmax = cfl
        stats[2] = max(stats[2], cmax)
        if cmax > 1.0:
            info[0] = -1
            info[1] = m
            return CFL_VIOLATION
        if m % rec_stride == 0:
            k = (m % N) // rec_stride
            for v in range(nv):
                for st in range(st_idx.shape[1]):
                    i = off[v] + st_idx[v, st]
                    rec[v, st, 0, k] = A[i]
                    rec[v, st, 1, k] = q[i]
    return OK
