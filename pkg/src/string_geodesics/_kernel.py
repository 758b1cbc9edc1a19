"""Compiled stepping kernel for the string geodesic flow.

An embedded 8(5,3) Runge-Kutta pair (the Dormand-Prince DOP853 tableau) with
PI step-size control, advancing Hamilton's equations in one of three chart
kinds until the span ends, a chart switch is due, or a buffer fills.  Event
crossings are refined inside the kernel by Illinois regula falsi on the
step fraction.
"""
import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

KIND_EF = 0  # (u or v, w, U or V, W)
KIND_X = 1  # (u or v, x, U or V, X)
KIND_KS = 2  # (p, q, P, Q)

EV_HORIZON = 0
EV_SCRI = 1
EV_SINGULARITY = 2
EV_TURNING = 3

STATUS_DONE = 1
STATUS_SWITCH = 2
STATUS_FULL = 3
STATUS_UNDERFLOW = 4
STATUS_MAXSTEPS = 5
STATUS_NONFINITE = 6

N_STAGES = _dop.N_STAGES
A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES])
B = np.ascontiguousarray(_dop.B)
C = np.ascontiguousarray(_dop.C[:N_STAGES])
E3 = np.ascontiguousarray(_dop.E3)
E5 = np.ascontiguousarray(_dop.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 6.0
PI_BETA = 0.04
PI_ALPHA = 1.0 / 8.0 - 0.75 * PI_BETA

# params layout
P_X_IN, P_X_OUT, P_KS_IN, P_KS_OUT, P_SWAP, P_HMAX = range(6)


@njit(cache=True)
def lambertw0(z):
    if z == 0.0:
        return 0.0
    p2 = 2.0 * (math.e * z + 1.0)
    if p2 <= 0.0:
        return -1.0
    if z < -0.25:
        p = math.sqrt(p2)
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    elif z < 3.0:
        w = math.log1p(z)
    else:
        l1 = math.log(z)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(60):
        ew = math.exp(w)
        f = w * ew - z
        if f == 0.0 or w == -1.0:
            break
        wp1 = w + 1.0
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 4e-16 * (1.0 + abs(w)):
            break
    return w


@njit(cache=True)
def _Q(w):
    return 0.5 * w * w * w - w / 6.0 - 1.0 / 27.0


@njit(cache=True)
def _dQ(w):
    return 1.5 * w * w - 1.0 / 6.0


@njit(cache=True)
def rhs(kind, y, out):
    if kind == KIND_EF:
        w = y[1]
        U = y[2]
        Om = y[3]
        out[0] = Om
        out[1] = U + 2.0 * _Q(w) * Om
        out[2] = 0.0
        out[3] = -_dQ(w) * Om * Om
    elif kind == KIND_X:
        x = y[1]
        U = y[2]
        X = y[3]
        x3 = x * x * x
        out[0] = -x3 * X / 2.0
        out[1] = (1.0 - x * x) * X / 4.0 - x3 * U / 2.0
        out[2] = 0.0
        out[3] = x * X * X / 4.0 + 1.5 * x * x * U * X
    else:
        p = y[0]
        q = y[1]
        P = y[2]
        Qm = y[3]
        r = 1.0 + lambertw0(p * q)
        f = r * r * r * math.exp(r - 1.0)
        k = P * Qm * r * (r + 3.0) / 2.0
        out[0] = -f * Qm / 2.0
        out[1] = -f * P / 2.0
        out[2] = k * q
        out[3] = k * p


@njit(cache=True)
def hamiltonian(kind, y):
    if kind == KIND_EF:
        return y[3] * (y[2] + _Q(y[1]) * y[3])
    elif kind == KIND_X:
        x = y[1]
        return (1.0 - x * x) * y[3] * y[3] / 8.0 - x * x * x * y[2] * y[3] / 2.0
    r = 1.0 + lambertw0(y[0] * y[1])
    return -r * r * r * math.exp(r - 1.0) * y[2] * y[3] / 2.0


@njit(cache=True)
def radius(kind, y):
    if kind == KIND_EF:
        a = y[1] + 1.0 / 3.0
        if a == 0.0:
            return np.inf
        return 1.0 / a
    elif kind == KIND_X:
        return y[1] * y[1]
    return 1.0 + lambertw0(y[0] * y[1])


@njit(cache=True)
def events(kind, y, out):
    f = np.empty(4)
    rhs(kind, y, f)
    if kind == KIND_EF:
        out[0] = y[1] - 2.0 / 3.0
        out[1] = y[1] + 1.0 / 3.0
        out[2] = f[1]
        out[3] = 1.0  # unused
    elif kind == KIND_X:
        out[0] = y[1] * y[1] - 1.0
        out[1] = y[1]
        out[2] = f[1]
        out[3] = 1.0
    else:
        out[0] = y[0]
        out[1] = y[1]
        out[2] = f[0] * y[1] + y[0] * f[1]
        out[3] = 1.0


@njit(cache=True)
def event_code(kind, idx):
    if kind == KIND_EF:
        if idx == 0:
            return EV_HORIZON
        if idx == 1:
            return EV_SCRI
        return EV_TURNING
    if kind == KIND_X:
        if idx == 0:
            return EV_HORIZON
        if idx == 1:
            return EV_SINGULARITY
        return EV_TURNING
    if idx <= 1:
        return EV_HORIZON
    return EV_TURNING


@njit(cache=True)
def other_family_momentum(y):
    """W in the other EF chart of a (u, w, U, W) state (v = 2 r*(w) - u, V = -U)."""
    a = y[1] + 1.0 / 3.0
    if a == 0.0:
        return np.inf
    r = 1.0 / a
    if r == 1.0:
        return np.inf
    return y[3] - 2.0 * y[2] * r * r * r / (r - 1.0)


@njit(cache=True)
def switch_due(kind, y, params):
    r = radius(kind, y)
    if kind == KIND_EF:
        if 0.0 < r < params[P_X_IN]:
            return True
        if abs(r - 1.0) < params[P_KS_IN]:
            return True
        other = other_family_momentum(y)
        return abs(other) < params[P_SWAP] * abs(y[3])
    if kind == KIND_X:
        return r > params[P_X_OUT]
    return abs(r - 1.0) > params[P_KS_OUT]


@njit(cache=True)
def rk_step(kind, y, h, K, ynew):
    """One DOP853 step; fills K (13 x n) and ynew, returns the error numerator."""
    n = y.shape[0]
    tmp = np.empty(n)
    f = np.empty(n)
    rhs(kind, y, f)
    for j in range(n):
        K[0, j] = f[j]
    for s in range(1, N_STAGES):
        for j in range(n):
            acc = 0.0
            for m in range(s):
                acc += A[s, m] * K[m, j]
            tmp[j] = y[j] + h * acc
        rhs(kind, tmp, f)
        for j in range(n):
            K[s, j] = f[j]
    for j in range(n):
        acc = 0.0
        for m in range(N_STAGES):
            acc += B[m] * K[m, j]
        ynew[j] = y[j] + h * acc
    rhs(kind, ynew, f)
    for j in range(n):
        K[N_STAGES, j] = f[j]


@njit(cache=True)
def error_norm(K, h, y, ynew, rtol, atol):
    n = y.shape[0]
    e5 = 0.0
    e3 = 0.0
    for j in range(n):
        sc = atol + rtol * max(abs(y[j]), abs(ynew[j]))
        a5 = 0.0
        a3 = 0.0
        for m in range(N_STAGES + 1):
            a5 += E5[m] * K[m, j]
            a3 += E3[m] * K[m, j]
        e5 += (a5 / sc) ** 2
        e3 += (a3 / sc) ** 2
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * n)


@njit(cache=True)
def _refine(kind, y, h, idx, g0, g1):
    """Fraction theta of the step at which event idx vanishes; also returns the state."""
    n = y.shape[0]
    K = np.empty((N_STAGES + 1, n))
    yt = np.empty(n)
    gv = np.empty(4)
    lo, hi = 0.0, 1.0
    glo, ghi = g0, g1
    theta = 1.0
    side = 0
    for _ in range(100):
        theta = (lo * ghi - hi * glo) / (ghi - glo)
        if not (lo < theta < hi):
            theta = 0.5 * (lo + hi)
        rk_step(kind, y, theta * h, K, yt)
        events(kind, yt, gv)
        g = gv[idx]
        if g == 0.0:
            break
        if (g > 0.0) == (glo > 0.0):
            lo, glo = theta, g
            if side == -1:
                ghi *= 0.5
            side = -1
        else:
            hi, ghi = theta, g
            if side == 1:
                glo *= 0.5
            side = 1
        if (hi - lo) * abs(h) < 1e-14 * (1.0 + abs(h)):
            break
    rk_step(kind, y, theta * h, K, yt)
    return theta, yt


@njit(cache=True)
def advance(
    kind, y0, s0, s_end, h0, rtol, atol, params,
    samp_s, samp_y, n_samp, ev_s, ev_code, ev_y, n_ev, max_steps,
):
    n = y0.shape[0]
    y = y0.copy()
    s = s0
    direction = 1.0 if s_end >= s0 else -1.0
    h = abs(h0) * direction
    hmax = params[P_HMAX]
    K = np.empty((N_STAGES + 1, n))
    ynew = np.empty(n)
    g_old = np.empty(4)
    g_new = np.empty(4)
    events(kind, y, g_old)
    err_prev = 1e-4
    steps = 0
    while True:
        if (s_end - s) * direction <= 0.0:
            return STATUS_DONE, s, y, h, n_samp, n_ev
        if n_samp >= samp_s.shape[0] or n_ev + 3 >= ev_s.shape[0]:
            return STATUS_FULL, s, y, h, n_samp, n_ev
        if steps >= max_steps:
            return STATUS_MAXSTEPS, s, y, h, n_samp, n_ev
        if abs(h) > hmax:
            h = hmax * direction
        last = False
        if (s + h - s_end) * direction >= 0.0:
            h = s_end - s
            last = True
        if abs(h) < 1e-14 * (1.0 + abs(s)):
            return STATUS_UNDERFLOW, s, y, h, n_samp, n_ev
        rk_step(kind, y, h, K, ynew)
        finite = True
        for j in range(n):
            if not np.isfinite(ynew[j]):
                finite = False
        err = error_norm(K, h, y, ynew, rtol, atol) if finite else 1e10
        steps += 1
        if err > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err ** (-1.0 / 8.0))
            continue
        # accepted
        events(kind, ynew, g_new)
        for idx in range(3):
            a = g_old[idx]
            b = g_new[idx]
            if a != 0.0 and (a * b < 0.0 or b == 0.0):
                theta, yt = _refine(kind, y, h, idx, a, b)
                ev_s[n_ev] = s + theta * h
                ev_code[n_ev] = event_code(kind, idx)
                for j in range(n):
                    ev_y[n_ev, j] = yt[j]
                n_ev += 1
        s = s_end if last else s + h
        for j in range(n):
            y[j] = ynew[j]
        for j in range(4):
            g_old[j] = g_new[j]
        samp_s[n_samp] = s
        for j in range(n):
            samp_y[n_samp, j] = y[j]
        n_samp += 1
        if err == 0.0:
            factor = MAX_FACTOR
        else:
            factor = SAFETY * err ** (-PI_ALPHA) * err_prev**PI_BETA
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
        err_prev = max(err, 1e-4)
        h *= factor
        if switch_due(kind, y, params):
            return STATUS_SWITCH, s, y, h, n_samp, n_ev


@njit(cache=True)
def eval_samples(kinds, Y, out_h, out_w):
    """Hamiltonian and w = 1/r - 1/3 at every sample."""
    for i in range(Y.shape[0]):
        k = kinds[i]
        out_h[i] = hamiltonian(k, Y[i])
        if k == KIND_EF:
            out_w[i] = Y[i, 1]
        else:
            r = radius(k, Y[i])
            out_w[i] = np.inf if r == 0.0 else 1.0 / r - 1.0 / 3.0
