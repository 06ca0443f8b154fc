"""Counter-based random streams for numba kernels.

Each path owns a 64-bit key derived from (seed, path index, stream id); the
n-th draw is a splitmix64 hash of ``key + n * GAMMA``.  Path i therefore sees
the same numbers regardless of thread count or execution order.  Normals use
a 256-layer ziggurat.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

GAMMA = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
INV53 = 1.1102230246251565e-16
ZIG_R = 3.6541528853610088


@njit(inline="always", cache=True)
def mix(z):
    z = (z ^ (z >> np.uint64(30))) * M1
    z = (z ^ (z >> np.uint64(27))) * M2
    return z ^ (z >> np.uint64(31))


@njit(inline="always", cache=True)
def path_key(seed, path, stream):
    k = mix(np.uint64(seed) + GAMMA)
    k = mix(k ^ mix(np.uint64(path) * GAMMA + np.uint64(stream)))
    return k


@njit(inline="always", cache=True)
def u01(key, ctr):
    """Uniform in [0, 1) from draw number ``ctr``."""
    return float(mix(key + ctr * GAMMA) >> np.uint64(11)) * INV53


def ziggurat_tables():
    dn = ZIG_R
    tn = dn
    vn = 0.00492867323399
    m = 2.0 ** 52
    ki = np.zeros(256, np.uint64)
    wi = np.zeros(256)
    fi = np.zeros(256)
    q = vn / math.exp(-0.5 * dn * dn)
    ki[0] = np.uint64(int((dn / q) * m))
    ki[1] = 0
    wi[0] = q / m
    wi[255] = dn / m
    fi[0] = 1.0
    fi[255] = math.exp(-0.5 * dn * dn)
    for i in range(254, 0, -1):
        dn = math.sqrt(-2.0 * math.log(vn / dn + math.exp(-0.5 * dn * dn)))
        ki[i + 1] = np.uint64(int((dn / tn) * m))
        tn = dn
        fi[i] = math.exp(-0.5 * dn * dn)
        wi[i] = dn / m
    return ki, wi, fi


ZIG_KI, ZIG_WI, ZIG_FI = ziggurat_tables()


@njit(inline="always", cache=True)
def znorm(key, ctr, ki, wi, fi):
    """Standard normal; returns (value, next counter)."""
    while True:
        r = mix(key + ctr * GAMMA)
        ctr += np.uint64(1)
        idx = int(r & np.uint64(0xFF))
        r >>= np.uint64(8)
        sign = r & np.uint64(1)
        rabs = (r >> np.uint64(1)) & np.uint64(0x000FFFFFFFFFFFFF)
        x = float(rabs) * wi[idx]
        if sign:
            x = -x
        if rabs < ki[idx]:
            return x, ctr
        if idx == 0:
            while True:
                xx = -math.log1p(-u01(key, ctr)) / ZIG_R
                ctr += np.uint64(1)
                yy = -math.log1p(-u01(key, ctr))
                ctr += np.uint64(1)
                if yy + yy > xx * xx:
                    if (rabs >> np.uint64(8)) & np.uint64(1):
                        return -(ZIG_R + xx), ctr
                    return ZIG_R + xx, ctr
        else:
            if (fi[idx - 1] - fi[idx]) * u01(key, ctr) + fi[idx] < math.exp(-0.5 * x * x):
                return x, ctr + np.uint64(1)
            ctr += np.uint64(1)


@njit(cache=True)
def normals(seed, path, stream, n):
    """First n normals of a stream; used to test the generator."""
    key = path_key(seed, path, stream)
    out = np.empty(n)
    ctr = np.uint64(0)
    for i in range(n):
        out[i], ctr = znorm(key, ctr, ZIG_KI, ZIG_WI, ZIG_FI)
    return out


@njit(cache=True)
def uniforms(seed, path, stream, n):
    key = path_key(seed, path, stream)
    out = np.empty(n)
    for i in range(n):
        out[i] = u01(key, np.uint64(i))
    return out
