"""Numba kernels: reflected Euler steps, fused excursion censuses and path recorders.

Reflection mirrors the overshoot of a step back into the domain along the
normal (a fold at the interval ends, a radial mirror at circles and spheres).
Mirroring keeps the transition kernel symmetric to first order, so the volume
measure stays stationary up to the boundary; a plain projection onto the
boundary would pile up occupation inside the layer.

Excursions are delimited by boundary contacts.  A contact is a step whose raw
Euler endpoint left the closed domain and was mirrored back; the contact
point is the boundary point on the same ray, timed at the end of the step.  The stretch between two consecutive
contacts is registered as an excursion when the path spent at least
``MIN_OUTSIDE`` steps outside the boundary layer and the two contact points are
at least ``delta_min`` apart.

Fused census kernels and the serial recorders call the same step helpers and
consume the random streams identically, so a recorded path decomposes into
exactly the records the census counted.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from .rng import path_key, u01, znorm

MIN_OUTSIDE = 2
STREAM_STEPS = 0
STREAM_INIT = 1
STREAM_AUX = 2

FLAG_UNRESOLVED = 1
FLAG_UNSTABLE = 2
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# helpers

@njit(inline="always", cache=True)
def _interval_step(x, inc, tol):
    """Fold x + inc into [0, 1]; returns (y, contact endpoint or -1, unstable)."""
    y = x + inc
    bad = y < -tol or y > 1.0 + tol
    c = -1
    while y < 0.0 or y > 1.0:
        if y < 0.0:
            y = -y
            c = 0
        else:
            y = 2.0 - y
            c = 1
    return y, c, bad


@njit(inline="always", cache=True)
def _wrap_angle(a):
    a = a - TWO_PI * math.floor(a / TWO_PI)
    if a >= TWO_PI:
        a = 0.0
    return a


@njit(inline="always", cache=True)
def _circle_cell(theta, bps):
    k = bps.size
    if k == 0:
        return 0
    j = np.searchsorted(bps, theta, side="right") - 1
    if j < 0:
        j = k - 1
    return j


@njit(inline="always", cache=True)
def _band_cell(t, zb):
    if zb.size == 0:
        return 0
    return np.searchsorted(zb, t, side="right")


@njit(inline="always", cache=True)
def _arc_dist(a, b):
    d = abs(a - b)
    if d > math.pi:
        d = TWO_PI - d
    return d


@njit(inline="always", cache=True)
def _disk_init(ikey):
    r = math.sqrt(u01(ikey, np.uint64(0)))
    th = TWO_PI * u01(ikey, np.uint64(1))
    return r * math.cos(th), r * math.sin(th)


@njit(inline="always", cache=True)
def _shell_init(ikey, R, r_cut):
    """Point with density proportional to q(x) = 1 - R/|x| on R < |x| <= r_cut (d = 3)."""
    ctr = np.uint64(0)
    top = r_cut * (r_cut - R)
    while True:
        r = R + (r_cut - R) * (1.0 - u01(ikey, ctr))
        acc = u01(ikey, ctr + np.uint64(1))
        ctr += np.uint64(2)
        if acc * top <= r * (r - R):
            break
    z = 2.0 * u01(ikey, ctr) - 1.0
    ph = TWO_PI * u01(ikey, ctr + np.uint64(1))
    s = math.sqrt(max(0.0, 1.0 - z * z))
    return r * s * math.cos(ph), r * s * math.sin(ph), r * z


@njit(inline="always", cache=True)
def _poisson_return(ak, actr, x0, x1, x2, R):
    """Hitting point on |x| = R from a point at radius rho > R, conditioned on hitting (d = 3)."""
    rho = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
    a = rho * rho + R * R
    b = 2.0 * rho * R
    u = u01(ak, actr)
    s = 1.0 / (rho + R) + u * (1.0 / (rho - R) - 1.0 / (rho + R))
    t = (a - 1.0 / (s * s)) / b
    t = min(1.0, max(-1.0, t))
    ph = TWO_PI * u01(ak, actr + np.uint64(1))
    # orthonormal frame around the radial direction
    e0 = x0 / rho
    e1 = x1 / rho
    e2 = x2 / rho
    if abs(e2) < 0.9:
        v0, v1, v2 = -e1, e0, 0.0
    else:
        v0, v1, v2 = 0.0, -e2, e1
    nv = math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    v0 /= nv
    v1 /= nv
    v2 /= nv
    w0 = e1 * v2 - e2 * v1
    w1 = e2 * v0 - e0 * v2
    w2 = e0 * v1 - e1 * v0
    st = math.sqrt(max(0.0, 1.0 - t * t))
    c = math.cos(ph)
    sn = math.sin(ph)
    p0 = R * (t * e0 + st * (c * v0 + sn * w0))
    p1 = R * (t * e1 + st * (c * v1 + sn * w1))
    p2 = R * (t * e2 + st * (c * v2 + sn * w2))
    return p0, p1, p2, actr + np.uint64(2)


@njit(inline="always", cache=True)
def _erfcinv(y):
    # Newton on erfc(x) = y from a rational start; accurate to ~1e-15 for 1e-300 < y < 2
    if y <= 0.0:
        return 1e300
    if y >= 2.0:
        return -1e300
    yy = y if y <= 1.0 else 2.0 - y
    t = math.sqrt(-2.0 * math.log(0.5 * yy))
    x = -0.70711 * ((2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t)
    for _ in range(4):
        err = math.erfc(x) - yy
        x += err / (1.12837916709551257 * math.exp(-x * x) - x * err)
    return x if y <= 1.0 else -x


# ---------------------------------------------------------------------------
# interval

@njit(parallel=True, cache=True)
def interval_census(seed, n_paths, dt, horizon, eps, cap_steps, noise, ki, wi, fi):
    """Fused interval census.

    Returns counts[p, from, to] (last column: cemetery, always 0 here),
    occ[p, endpoint] = time spent within eps of each endpoint before the
    horizon, and per-path flags.
    """
    counts = np.zeros((n_paths, 2, 3), np.int64)
    occ = np.zeros((n_paths, 2))
    flags = np.zeros(n_paths, np.int8)
    n_h = int(round(horizon / dt))
    sq = math.sqrt(dt)
    s = sq * noise
    tol = 10.0 * sq
    for p in prange(n_paths):
        key = path_key(seed, p, STREAM_STEPS)
        x = u01(path_key(seed, p, STREAM_INIT), np.uint64(0))
        ctr = np.uint64(0)
        last = -1
        i_last = 0
        out = 0
        resolved = False
        for i in range(1, n_h + cap_steps + 1):
            z, ctr = znorm(key, ctr, ki, wi, fi)
            y, c, bad = _interval_step(x, s * z, tol)
            if bad:
                flags[p] |= FLAG_UNSTABLE
            if i <= n_h:
                if y < eps:
                    occ[p, 0] += dt
                elif y > 1.0 - eps:
                    occ[p, 1] += dt
            if eps < y < 1.0 - eps:
                out += 1
            if c >= 0:
                if last >= 0 and i_last < n_h and out >= MIN_OUTSIDE and c != last:
                    counts[p, last, c] += 1
                last = c
                i_last = i
                out = 0
                if i >= n_h:
                    resolved = True
                    break
            x = y
        if not resolved and last >= 0 and i_last < n_h:
            flags[p] |= FLAG_UNRESOLVED
    return counts, occ, flags


@njit(cache=True)
def interval_record(seed, path, x0, dt, horizon, cap_steps, noise, ki, wi, fi):
    """Record one interval path (sampling x0 from the init stream when x0 < 0).

    Runs past the horizon until the first contact (or the cap).  Returns
    positions and contact endpoints (-1 where none).
    """
    n_h = int(round(horizon / dt))
    n_max = n_h + cap_steps
    pos = np.empty(n_max + 1)
    contact = np.full(n_max + 1, -1, np.int8)
    sq = math.sqrt(dt)
    s = sq * noise
    tol = 10.0 * sq
    key = path_key(seed, path, STREAM_STEPS)
    x = x0 if x0 >= 0.0 else u01(path_key(seed, path, STREAM_INIT), np.uint64(0))
    pos[0] = x
    ctr = np.uint64(0)
    unstable = False
    n = n_max
    for i in range(1, n_max + 1):
        z, ctr = znorm(key, ctr, ki, wi, fi)
        y, c, bad = _interval_step(x, s * z, tol)
        unstable |= bad
        pos[i] = y
        contact[i] = c
        x = y
        if c >= 0 and i >= n_h:
            n = i
            break
    return pos[:n + 1], contact[:n + 1], unstable


@njit(parallel=True, cache=True)
def interval_coupled(seed, n_paths, dt_fine, ratios, horizon, eps_c, cap_steps, ki, wi, fi):
    """Interval censuses at several step sizes driven by the same Brownian increments.

    Level l steps with dt = ratios[l] * dt_fine using the sum of ratios[l]
    fine normals.  Returns counts[p, l, 0] (0 -> 1) and counts[p, l, 1] (1 -> 0),
    plus flags[p, l].
    """
    L = ratios.size
    counts = np.zeros((n_paths, L, 2), np.int64)
    flags = np.zeros((n_paths, L), np.int8)
    n_h = int(round(horizon / dt_fine))
    rmax = 0
    for l in range(L):
        rmax = max(rmax, ratios[l])
    n_max = n_h + cap_steps * rmax
    sq_f = math.sqrt(dt_fine)
    for p in prange(n_paths):
        key = path_key(seed, p, STREAM_STEPS)
        x0 = u01(path_key(seed, p, STREAM_INIT), np.uint64(0))
        x = np.full(L, x0)
        acc = np.zeros(L)
        last = np.full(L, -1)
        j_last = np.zeros(L, np.int64)
        out = np.zeros(L, np.int64)
        done = np.zeros(L, np.bool_)
        eps = np.empty(L)
        tol = np.empty(L)
        for l in range(L):
            eps[l] = eps_c * math.sqrt(ratios[l] * dt_fine)
            tol[l] = 10.0 * math.sqrt(ratios[l] * dt_fine)
        n_done = 0
        ctr = np.uint64(0)
        for j in range(1, n_max + 1):
            z, ctr = znorm(key, ctr, ki, wi, fi)
            for l in range(L):
                if done[l]:
                    continue
                acc[l] += z
                if j % ratios[l] != 0:
                    continue
                y, c, bad = _interval_step(x[l], sq_f * acc[l], tol[l])
                acc[l] = 0.0
                if bad:
                    flags[p, l] |= FLAG_UNSTABLE
                if eps[l] < y < 1.0 - eps[l]:
                    out[l] += 1
                if c >= 0:
                    if last[l] >= 0 and j_last[l] < n_h and out[l] >= MIN_OUTSIDE and c != last[l]:
                        counts[p, l, last[l]] += 1
                    last[l] = c
                    j_last[l] = j
                    out[l] = 0
                    if j >= n_h:
                        done[l] = True
                        n_done += 1
                x[l] = y
            if n_done == L:
                break
        for l in range(L):
            if not done[l] and last[l] >= 0 and j_last[l] < n_h:
                flags[p, l] |= FLAG_UNRESOLVED
    return counts, flags


# ---------------------------------------------------------------------------
# disk

@njit(inline="always", cache=True)
def _disk_step(x0, x1, i0, i1, tol):
    y0 = x0 + i0
    y1 = x1 + i1
    r2 = y0 * y0 + y1 * y1
    contact = False
    bad = False
    if r2 > 1.0:
        # mirror the overshoot through the circle along the radius
        r = math.sqrt(r2)
        bad = r > 1.0 + tol
        f = max(2.0 - r, 0.0) / r
        y0 *= f
        y1 *= f
        contact = True
    return y0, y1, contact, bad


@njit(parallel=True, cache=True)
def disk_census(seed, n_paths, dt, horizon, eps, cap_steps, noise, delta_min, bps, ki, wi, fi):
    """Fused disk census over the circle cells defined by sorted breakpoints ``bps``.

    Returns counts[p, from, to] with a final cemetery column (structurally
    zero), occ[p, cell] layer time before the horizon, and flags.
    """
    nc = max(1, bps.size)
    counts = np.zeros((n_paths, nc, nc + 1), np.int64)
    occ = np.zeros((n_paths, nc))
    flags = np.zeros(n_paths, np.int8)
    n_h = int(round(horizon / dt))
    sq = math.sqrt(dt)
    s = sq * noise
    tol = 10.0 * sq
    rin2 = (1.0 - eps) ** 2
    for p in prange(n_paths):
        key = path_key(seed, p, STREAM_STEPS)
        x0, x1 = _disk_init(path_key(seed, p, STREAM_INIT))
        ctr = np.uint64(0)
        last_th = -1.0
        last_cell = -1
        i_last = 0
        out = 0
        resolved = False
        for i in range(1, n_h + cap_steps + 1):
            z0, ctr = znorm(key, ctr, ki, wi, fi)
            z1, ctr = znorm(key, ctr, ki, wi, fi)
            x0, x1, c, bad = _disk_step(x0, x1, s * z0, s * z1, tol)
            if bad:
                flags[p] |= FLAG_UNSTABLE
            r2 = x0 * x0 + x1 * x1
            if r2 <= rin2:
                out += 1
            elif i <= n_h:
                occ[p, _circle_cell(_wrap_angle(math.atan2(x1, x0)), bps)] += dt
            if c:
                th = _wrap_angle(math.atan2(x1, x0))
                cell = _circle_cell(th, bps)
                if (last_cell >= 0 and i_last < n_h and out >= MIN_OUTSIDE
                        and _arc_dist(th, last_th) >= delta_min):
                    counts[p, last_cell, cell] += 1
                last_th = th
                last_cell = cell
                i_last = i
                out = 0
                if i >= n_h:
                    resolved = True
                    break
        if not resolved and last_cell >= 0 and i_last < n_h:
            flags[p] |= FLAG_UNRESOLVED
    return counts, occ, flags


@njit(cache=True)
def disk_record(seed, path, x0, x1, dt, horizon, cap_steps, noise, ki, wi, fi):
    """Record one disk path (init stream when x0 is NaN); contact angles NaN where none."""
    n_h = int(round(horizon / dt))
    n_max = n_h + cap_steps
    pos = np.empty((n_max + 1, 2))
    contact = np.full(n_max + 1, np.nan)
    sq = math.sqrt(dt)
    s = sq * noise
    tol = 10.0 * sq
    key = path_key(seed, path, STREAM_STEPS)
    if math.isnan(x0):
        x0, x1 = _disk_init(path_key(seed, path, STREAM_INIT))
    pos[0, 0] = x0
    pos[0, 1] = x1
    ctr = np.uint64(0)
    unstable = False
    n = n_max
    for i in range(1, n_max + 1):
        z0, ctr = znorm(key, ctr, ki, wi, fi)
        z1, ctr = znorm(key, ctr, ki, wi, fi)
        x0, x1, c, bad = _disk_step(x0, x1, s * z0, s * z1, tol)
        unstable |= bad
        pos[i, 0] = x0
        pos[i, 1] = x1
        if c:
            contact[i] = _wrap_angle(math.atan2(x1, x0))
            if i >= n_h:
                n = i
                break
    return pos[:n + 1], contact[:n + 1], unstable


# ---------------------------------------------------------------------------
# exterior of the sphere |x| = R in R^3

@njit(inline="always", cache=True)
def _bridge_hit(ak, actr, d0, d1, dt):
    """Did the continuous path cross the sphere between two outside points? (half-space bridge)."""
    p = math.exp(-2.0 * d0 * d1 / dt)
    return u01(ak, actr) < p, actr + np.uint64(1)


@njit(parallel=True, cache=True)
def exterior_window(seed, n_paths, dt, t_win, R, r_cut, r_esc, zb, noise, ki, wi, fi):
    """First hits of the sphere within a time window, from points drawn from q m on the shell.

    Returns hit_cell[p] (z-band index of the hit point, -1 if no hit within
    the window) and hit_time[p].
    """
    hit_cell = np.full(n_paths, -1, np.int64)
    hit_time = np.full(n_paths, np.nan)
    n_w = int(round(t_win / dt))
    s = math.sqrt(dt) * noise
    for p in prange(n_paths):
        key = path_key(seed, p, STREAM_STEPS)
        ak = path_key(seed, p, STREAM_AUX)
        actr = np.uint64(0)
        x0, x1, x2 = _shell_init(path_key(seed, p, STREAM_INIT), R, r_cut)
        rx = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
        ctr = np.uint64(0)
        for i in range(1, n_w + 1):
            # cannot reach the sphere in the remaining time (probability < 1e-15)
            if rx - R > 8.0 * math.sqrt((n_w - i + 1) * dt) + 8.0 * s:
                break
            z0, ctr = znorm(key, ctr, ki, wi, fi)
            z1, ctr = znorm(key, ctr, ki, wi, fi)
            z2, ctr = znorm(key, ctr, ki, wi, fi)
            y0 = x0 + s * z0
            y1 = x1 + s * z1
            y2 = x2 + s * z2
            ry = math.sqrt(y0 * y0 + y1 * y1 + y2 * y2)
            hit = ry <= R
            if not hit:
                hit, actr = _bridge_hit(ak, actr, rx - R, ry - R, dt * noise * noise + 1e-300)
                if hit:
                    y0 = 0.5 * (x0 + y0)
                    y1 = 0.5 * (x1 + y1)
                    y2 = 0.5 * (x2 + y2)
                    ry = math.sqrt(y0 * y0 + y1 * y1 + y2 * y2)
            if hit:
                hit_cell[p] = _band_cell(y2 / ry, zb)
                hit_time[p] = i * dt
                break
            if ry >= r_esc:
                break
            x0, x1, x2, rx = y0, y1, y2, ry
    return hit_cell, hit_time


@njit(parallel=True, cache=True)
def exterior_ever_hit(seed, n_paths, dt, R, r0, r_esc, max_steps, noise, ki, wi, fi):
    """Whether paths from (0, 0, r0) ever hit the sphere: 1 hit, 0 escape, -1 unresolved.

    On reaching r_esc the remaining hitting probability R/rho is applied exactly.
    """
    out = np.full(n_paths, -1, np.int8)
    s = math.sqrt(dt) * noise
    for p in prange(n_paths):
        key = path_key(seed, p, STREAM_STEPS)
        ak = path_key(seed, p, STREAM_AUX)
        actr = np.uint64(0)
        x0, x1, x2 = 0.0, 0.0, r0
        rx = r0
        ctr = np.uint64(0)
        for i in range(max_steps):
            z0, ctr = znorm(key, ctr, ki, wi, fi)
            z1, ctr = znorm(key, ctr, ki, wi, fi)
            z2, ctr = znorm(key, ctr, ki, wi, fi)
            y0 = x0 + s * z0
            y1 = x1 + s * z1
            y2 = x2 + s * z2
            ry = math.sqrt(y0 * y0 + y1 * y1 + y2 * y2)
            hit = ry <= R
            if not hit:
                hit, actr = _bridge_hit(ak, actr, rx - R, ry - R, dt * noise * noise + 1e-300)
            if hit:
                out[p] = 1
                break
            if ry >= r_esc:
                out[p] = 1 if u01(ak, actr) < R / ry else 0
                break
            x0, x1, x2, rx = y0, y1, y2, ry
    return out


@njit(cache=True)
def exterior_record(seed, path, x0, x1, x2, dt, horizon, R, r_cut, r_esc, noise, ki, wi, fi):
    """Record one reflected exterior path with the escape protocol.

    Steps landing inside the ball are mirrored back out (contacts).  On
    reaching r_esc the path escapes with probability 1 - R/rho; otherwise it
    re-enters at a point drawn from the exterior Poisson kernel.  The elapsed
    time is drawn from the one-dimensional first-passage law over the gap
    rho - R, an approximation that only shifts later contact times.  Returns times, positions,
    contact flags and whether the path escaped.
    """
    n_max = int(round(horizon / dt))
    times = np.empty(n_max + 1)
    pos = np.empty((n_max + 1, 3))
    contact = np.zeros(n_max + 1, np.bool_)
    key = path_key(seed, path, STREAM_STEPS)
    ak = path_key(seed, path, STREAM_AUX)
    actr = np.uint64(0)
    if math.isnan(x0):
        x0, x1, x2 = _shell_init(path_key(seed, path, STREAM_INIT), R, r_cut)
    s = math.sqrt(dt) * noise
    t = 0.0
    times[0] = 0.0
    pos[0, 0], pos[0, 1], pos[0, 2] = x0, x1, x2
    ctr = np.uint64(0)
    escaped = False
    n = n_max
    for i in range(1, n_max + 1):
        z0, ctr = znorm(key, ctr, ki, wi, fi)
        z1, ctr = znorm(key, ctr, ki, wi, fi)
        z2, ctr = znorm(key, ctr, ki, wi, fi)
        x0 += s * z0
        x1 += s * z1
        x2 += s * z2
        t += dt
        r = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
        if r < R:
            f = (2.0 * R - r) / r
            x0, x1, x2 = f * x0, f * x1, f * x2
            contact[i] = True
        elif r >= r_esc:
            if u01(ak, actr) >= R / r:
                escaped = True
                times[i] = t
                pos[i, 0], pos[i, 1], pos[i, 2] = x0, x1, x2
                n = i
                break
            actr += np.uint64(1)
            g = _erfcinv(max(u01(ak, actr), 1e-300))
            actr += np.uint64(1)
            t += ((r - R) / (math.sqrt(2.0) * g)) ** 2
            x0, x1, x2, actr = _poisson_return(ak, actr, x0, x1, x2, R)
            contact[i] = True
        times[i] = t
        pos[i, 0], pos[i, 1], pos[i, 2] = x0, x1, x2
        if t >= horizon:
            n = i
            break
    return times[:n + 1], pos[:n + 1], contact[:n + 1], escaped
