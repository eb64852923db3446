"""Compiled semi-Lagrangian sweeps for the affine-quadratic model family.

One sweep maps a batch of node fields ``phi[b, :]`` to

    out[b, i] = sign * min_z  sign * K_sign(z, I[phi_b](z), x_i)

where ``I`` is periodic linear interpolation, ``K_+`` is the forward one-step
kernel and ``K_-`` its inverse in the value argument (the dual sweep).  The
departure point ``z = x_i + t dx`` is searched by a coarse scan over node
offsets ``t in [-win, win]`` followed by golden-section refinement on
``[t_best - 1, t_best + 1]``.
"""

from __future__ import annotations

from math import cos, floor, sin

import numba as nb
import numpy as np

_GOLD = 0.6180339887498949


@nb.njit(cache=True, fastmath=True, inline="always")
def _trig(a0, ca, sa, om, x):
    K = ca.shape[0]
    if K == 0:
        return a0
    s1 = sin(om * x)
    c1 = cos(om * x)
    ck = c1
    sk = s1
    val = a0
    for k in range(K):
        val += ca[k] * ck + sa[k] * sk
        ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
    return val


@nb.njit(cache=True, fastmath=True, inline="always")
def _objective(phi, n, i, t, dx, dt, sign, ca0, cca, csa, com, va0, vca, vsa, vom):
    q = i + t
    k = int(floor(q))
    f = q - k
    k0 = k % n
    k1 = (k + 1) % n
    w = (1.0 - f) * phi[k0] + f * phi[k1]
    m = (i + 0.5 * t) * dx
    cm = _trig(ca0, cca, csa, com, m)
    vm = _trig(va0, vca, vsa, vom, m)
    h = 0.5 * dt
    d = -sign * t * dx / dt - vm
    return (sign * w * (1.0 - sign * h * cm) + h * d * d) / (1.0 + sign * h * cm)


@nb.njit(cache=True, fastmath=True)
def sweep_affine(prev, out, disp, dx, dt, win, niter, sign, ca0, cca, csa, com, va0, vca, vsa, vom):
    B, n = prev.shape
    for b in range(B):
        phi = prev[b]
        for i in range(n):
            best = 1e308
            jb = 0
            for j in range(-win, win + 1):
                val = _objective(phi, n, i, float(j), dx, dt, sign, ca0, cca, csa, com, va0, vca, vsa, vom)
                if val < best:
                    best = val
                    jb = j
            lo = jb - 1.0
            hi = jb + 1.0
            ta = hi - _GOLD * (hi - lo)
            tb = lo + _GOLD * (hi - lo)
            fa = _objective(phi, n, i, ta, dx, dt, sign, ca0, cca, csa, com, va0, vca, vsa, vom)
            fb = _objective(phi, n, i, tb, dx, dt, sign, ca0, cca, csa, com, va0, vca, vsa, vom)
            for _ in range(niter):
                if fa < fb:
                    hi = tb
                    tb = ta
                    fb = fa
                    ta = hi - _GOLD * (hi - lo)
                    fa = _objective(phi, n, i, ta, dx, dt, sign, ca0, cca, csa, com, va0, vca, vsa, vom)
                else:
                    lo = ta
                    ta = tb
                    fa = fb
                    tb = lo + _GOLD * (hi - lo)
                    fb = _objective(phi, n, i, tb, dx, dt, sign, ca0, cca, csa, com, va0, vca, vsa, vom)
            tbest = float(jb)
            if fa < best:
                best = fa
                tbest = ta
            if fb < best:
                best = fb
                tbest = tb
            out[b, i] = sign * best
            disp[b, i] = tbest * dx


def warmup() -> None:
    """Trigger compilation on tiny inputs."""
    prev = np.zeros((1, 16))
    out = np.empty_like(prev)
    disp = np.empty_like(prev)
    e = np.zeros(0)
    one = np.ones(1)
    for s in (1.0, -1.0):
        sweep_affine(prev, out, disp, 0.1, 0.1, 1, 2, s, 0.0, e, e, 1.0, 0.0, e, one, 1.0)
