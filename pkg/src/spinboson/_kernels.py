"""Compiled inner loops shared by the solvers.

A 2x2 complex matrix is carried as a 4-tuple in row-major order so the hot
loops never allocate. Grid bookkeeping follows ``contour``: positions
``0 .. 2N+1`` with ``N`` holding the left limit at the measurement time and
``N + 1`` the right limit.
"""
from __future__ import annotations

import numpy as np
from numba import njit

ERR_SWEEP = 1

ZERO = (0j, 0j, 0j, 0j)
ID = (1 + 0j, 0j, 0j, 1 + 0j)


@njit(cache=True)
def to_tuple(a):
    return (a[0, 0], a[0, 1], a[1, 0], a[1, 1])


@njit(cache=True)
def mm(a, b):
    return (
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    )


@njit(cache=True)
def madd(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3])


@njit(cache=True)
def mscale(a, c):
    return (a[0] * c, a[1] * c, a[2] * c, a[3] * c)


@njit(cache=True)
def load(G, j, k):
    return (G[j, k, 0, 0], G[j, k, 0, 1], G[j, k, 1, 0], G[j, k, 1, 1])


@njit(cache=True)
def store(G, j, k, a):
    G[j, k, 0, 0] = a[0]
    G[j, k, 0, 1] = a[1]
    G[j, k, 1, 0] = a[2]
    G[j, k, 1, 1] = a[3]


# ---------------------------------------------------------------- grid


@njit(cache=True)
def node_of(p, N):
    return p if p <= N else p - 1


@njit(cache=True)
def cell_lo(c, N):
    # position of the lower node of cell c (node N resolves to the right limit)
    return c if c < N else c + 1


@njit(cache=True)
def cell_hi(c, N):
    # position of the upper node of cell c (node N resolves to the left limit)
    return c + 1 if c + 1 <= N else c + 2


@njit(cache=True)
def coord(s, dt, N):
    q = s / dt
    a = int(np.floor(q))
    if a > 2 * N - 1:
        a = 2 * N - 1
    elif a < 0:
        a = 0
    return a, q - a


@njit(cache=True)
def head_coord(p, N):
    """Row coordinate of a grid head; the right limit at ``t`` is reported
    through the flag and evaluated as ``O`` times the left-limit value."""
    if p == N + 1:
        return N - 1, 1.0, True
    return node_of(p, N) - 1, 1.0, False


@njit(cache=True)
def base_coord(p, N):
    if p == N:
        return N - 1, 1.0
    return node_of(p, N), 0.0


@njit(cache=True)
def interp(G, filled, N, a, y, b, x, err):
    """Piecewise-linear value at row coordinate (cell a, frac y) and column
    coordinate (cell b, frac x). Each square cell is split along the diagonal
    through its lower-left and upper-right corners."""
    rlo = cell_lo(a, N)
    rhi = cell_hi(a, N)
    clo = cell_lo(b, N)
    chi = cell_hi(b, N)
    if y >= x:
        w0 = 1.0 - y
        w1 = y - x
        r1 = rhi
        c1 = clo
    else:
        w0 = 1.0 - x
        w1 = x - y
        r1 = rlo
        c1 = chi
    w2 = x if y >= x else y
    acc = ZERO
    if w0 != 0.0:
        if not filled[rlo, clo]:
            err[0] = ERR_SWEEP
        acc = madd(acc, mscale(load(G, rlo, clo), w0))
    if w1 != 0.0:
        if not filled[r1, c1]:
            err[0] = ERR_SWEEP
        acc = madd(acc, mscale(load(G, r1, c1), w1))
    if w2 != 0.0:
        if not filled[rhi, chi]:
            err[0] = ERR_SWEEP
        acc = madd(acc, mscale(load(G, rhi, chi), w2))
    return acc


# ---------------------------------------------------------------- bath


@njit(cache=True)
def corr(values, n_max, step, s):
    x = s / step + n_max
    if x < 0.0:
        x = 0.0
    elif x > 2 * n_max:
        x = 2.0 * n_max
    i = int(np.floor(x))
    if i >= 2 * n_max:
        i = 2 * n_max - 1
    fr = x - i
    return (1.0 - fr) * values[i] + fr * values[i + 1]


@njit(cache=True)
def pair_B(values, n_max, step, t, t1, t2, literal):
    """Contraction of contour times ``t1 <= t2``."""
    if literal:
        return corr(values, n_max, step, t2 - t1)
    u1 = t1 if t1 < t else 2 * t - t1
    u2 = t2 if t2 < t else 2 * t - t2
    return corr(values, n_max, step, u2 - u1)


# ---------------------------------------------------------------- inchworm


@njit(cache=True)
def det_connected(G, filled, N, dt, hp, kp, W, O, bvals, bn, bstep, literal, err):
    """Composite midpoint rule for the first-order connected term on the
    window from position ``kp`` to head position ``hp``."""
    t = N * dt
    ha, hy, hplus = head_coord(hp, N)
    ba, bx = base_coord(kp, N)
    tf = node_of(hp, N) * dt
    acc = ZERO
    for i in range(node_of(kp, N), node_of(hp, N)):
        mid = (i + 0.5) * dt
        A = interp(G, filled, N, ha, hy, i, 0.5, err)
        if hplus:
            A = mm(O, A)
        C = interp(G, filled, N, i, 0.5, ba, bx, err)
        sgn = -1.0 if mid < t else 1.0
        c = -sgn * pair_B(bvals, bn, bstep, t, mid, tf, literal) * dt
        acc = madd(acc, mscale(mm(mm(W, A), mm(W, C)), c))
    return acc


@njit(cache=True)
def _sort_small(v):
    for i in range(1, v.shape[0]):
        x = v[i]
        j = i - 1
        while j >= 0 and v[j] > x:
            v[j + 1] = v[j]
            j -= 1
        v[j + 1] = x


@njit(cache=True)
def mc_connected(G, filled, N, dt, hp, kp, m, U, choice, pairs, weight,
                 W, O, bvals, bn, bstep, literal, err):
    """Order-``m`` connected term sampled at ``U.shape[0]`` points.

    ``U`` holds uniforms on (0, 1) that are mapped into the window and sorted;
    ``choice`` indexes ``pairs``. Returns the sample mean and the sample
    variance of each matrix entry.
    """
    t = N * dt
    ha, hy, hplus = head_coord(hp, N)
    ba, bx = base_coord(kp, N)
    tk = node_of(kp, N) * dt
    tf = node_of(hp, N) * dt
    coef = weight * (1.0 if ((m + 1) // 2) % 2 == 0 else -1.0)
    n = U.shape[0]
    s = np.empty(m)
    rows = np.empty(m, dtype=np.int64)
    fracs = np.empty(m)
    mean = np.zeros(4, dtype=np.complex128)
    m2 = np.zeros(4)
    for n_i in range(n):
        for i in range(m):
            s[i] = tk + (tf - tk) * U[n_i, i]
        _sort_small(s)
        sgn = 1.0
        for i in range(m):
            rows[i], fracs[i] = coord(s[i], dt, N)
            if s[i] < t:
                sgn = -sgn
        bprod = 1.0 + 0j
        q = pairs[choice[n_i]]
        for p in range(q.shape[0]):
            ia = q[p, 0]
            ib = q[p, 1]
            ta = s[ia] if ia < m else tf
            tb = s[ib] if ib < m else tf
            bprod *= pair_B(bvals, bn, bstep, t, ta, tb, literal)
        A = interp(G, filled, N, ha, hy, rows[m - 1], fracs[m - 1], err)
        if hplus:
            A = mm(O, A)
        P = mm(W, A)
        for i in range(m - 1, 0, -1):
            P = mm(P, mm(W, interp(G, filled, N, rows[i], fracs[i], rows[i - 1], fracs[i - 1], err)))
        P = mm(P, mm(W, interp(G, filled, N, rows[0], fracs[0], ba, bx, err)))
        v = mscale(P, coef * sgn * bprod)
        # Welford update, stable when the samples are nearly constant
        for e in range(4):
            d = v[e] - mean[e]
            mean[e] += d / (n_i + 1)
            d2 = v[e] - mean[e]
            m2[e] += d.real * d2.real + d.imag * d2.imag
    var = np.zeros(4)
    if n > 1:
        for e in range(4):
            var[e] = m2[e] / (n - 1)
    return mean, var


@njit(cache=True)
def sweep_deterministic(G, filled, order, N, dt, H, O, W, E_minus, E_plus,
                        exponential, diagrams, bvals, bn, bstep, literal, err):
    """Fill the whole table with first-order diagrams in sweep order."""
    P = 2 * N + 2
    iH = mscale(H, 1j)
    counter = 0
    for j in range(P):
        sig = -1.0 if j <= N else 1.0
        E = E_minus if j <= N else E_plus
        for k in range(j, -1, -1):
            if k == j:
                val = ID
            elif j == N + 1:
                if not filled[N, k]:
                    err[0] = ERR_SWEEP
                val = mm(O, load(G, N, k))
            elif k == N and j > N:
                if not filled[j, N + 1]:
                    err[0] = ERR_SWEEP
                val = mm(load(G, j, N + 1), O)
            else:
                Gp = load(G, j - 1, k)
                if not filled[j - 1, k]:
                    err[0] = ERR_SWEEP
                S1 = ZERO
                if diagrams:
                    S1 = det_connected(G, filled, N, dt, j - 1, k, W, O, bvals, bn, bstep, literal, err)
                if exponential:
                    Gs = madd(mm(E, Gp), mscale(S1, sig * dt))
                else:
                    Gs = madd(Gp, mscale(madd(mm(iH, Gp), S1), sig * dt))
                store(G, j, k, Gs)
                filled[j, k] = True
                S2 = ZERO
                if diagrams:
                    S2 = det_connected(G, filled, N, dt, j, k, W, O, bvals, bn, bstep, literal, err)
                if exponential:
                    val = madd(mm(E, Gp), mscale(madd(mm(E, S1), S2), 0.5 * sig * dt))
                else:
                    val = madd(mscale(madd(Gp, Gs), 0.5), mscale(madd(mm(iH, Gs), S2), 0.5 * sig * dt))
            store(G, j, k, val)
            filled[j, k] = True
            order[j, k] = counter
            counter += 1


# ---------------------------------------------------------------- bare series


@njit(cache=True)
def _evolve(a0, bnorm, nsig, theta):
    ph = np.exp(-1j * theta * a0)
    c = np.cos(theta * bnorm) * ph
    sn = -1j * np.sin(theta * bnorm) * ph
    return (c + sn * nsig[0], sn * nsig[1], sn * nsig[2], c + sn * nsig[3])


@njit(cache=True)
def _bare(a0, bnorm, nsig, O, t, Sf, Si):
    if Sf < t:
        return _evolve(a0, bnorm, nsig, Sf - Si)
    if Si >= t:
        return _evolve(a0, bnorm, nsig, Si - Sf)
    return mm(_evolve(a0, bnorm, nsig, t - Sf), mm(O, _evolve(a0, bnorm, nsig, t - Si)))


@njit(cache=True)
def bare_samples(tau, m, U, choice, pairs, a0, bnorm, nsig, O, W, rho,
                 bvals, bn, bstep, literal, out):
    """Per-sample values of the order-``m`` bare term for ``<O(tau)>``,
    without the volume and multiplicity weights."""
    n = U.shape[0]
    s = np.empty(m)
    im = 1.0 + 0j
    for _ in range(m):
        im *= 1j
    for n_i in range(n):
        for i in range(m):
            s[i] = 2 * tau * U[n_i, i]
        _sort_small(s)
        sgn = 1.0
        for i in range(m):
            if s[i] < tau:
                sgn = -sgn
        P = _bare(a0, bnorm, nsig, O, tau, 2 * tau, s[m - 1])
        for i in range(m - 1, 0, -1):
            P = mm(P, mm(W, _bare(a0, bnorm, nsig, O, tau, s[i], s[i - 1])))
        P = mm(P, mm(W, _bare(a0, bnorm, nsig, O, tau, s[0], 0.0)))
        R = mm(rho, P)
        tr = R[0] + R[3]
        bprod = 1.0 + 0j
        q = pairs[choice[n_i]]
        for p in range(q.shape[0]):
            bprod *= pair_B(bvals, bn, bstep, tau, s[q[p, 0]], s[q[p, 1]], literal)
        out[n_i] = im * sgn * tr * bprod
