"""Compiled numerical core: coefficient lookup, right-hand sides, DOP853 stepping.

Everything here works on packed float arrays so that numba can compile it in
nopython mode. The public, typed API lives in :mod:`seasonal_sit.model` and
:mod:`seasonal_sit.integrator`.

Packed seasonal function layout::

    [kind, period, mean, amplitude, phase, n, b_0 .. b_{n-1}, v_0 .. v_{n-1}]

Packed model parameters layout::

    [variant, g0, T_bar, T, s_h, b, alpha]
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

KIND_CONSTANT = 0
KIND_PIECEWISE = 1
KIND_COSINE = 2

BASE = 0
COMPETITION_SURVIVAL = 1
IMPERFECT_CI = 2
SATURATED_RELEASE = 3
ALLEE = 4

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_UNDERFLOW = 2
STATUS_REJECTIONS = 3
STATUS_CAPACITY = 5

# Populations below this are numerically extinct.
W_TINY = 1e-280

_N_STAGES = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_N_STAGES, :_N_STAGES])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_N_STAGES])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ERR_EXP = -1.0 / 8.0
_MAX_CONSECUTIVE_REJECTS = 60


@njit(cache=True, error_model="numpy")
def coef(spec, t, tmid):
    """Evaluate a packed seasonal function.

    Piecewise-constant profiles are looked up at ``tmid`` (a point strictly
    inside the current mesh segment), smooth ones at ``t``.
    """
    kind = int(spec[0])
    if kind == KIND_CONSTANT:
        return spec[2]
    period = spec[1]
    if kind == KIND_COSINE:
        return spec[2] + spec[3] * math.cos(2.0 * math.pi * (t - spec[4]) / period)
    x = tmid - math.floor(tmid / period) * period
    n = int(spec[5])
    val = spec[6 + n]
    for j in range(1, n):
        if x >= spec[6 + j]:
            val = spec[6 + n + j]
        else:
            break
    return val


@njit(cache=True, error_model="numpy")
def rhs(prm, coefs, t, tmid, on, w):
    """Return ``(F, dF/dw, d2F/dw2, d3F/dw3)`` at ``(t, w)``.

    ``on`` is 1 inside a release window and 0 outside.
    """
    variant = int(prm[0])
    a = coef(coefs[0], t, tmid)
    mu = coef(coefs[1], t, tmid)
    xi = coef(coefs[2], t, tmid)

    if variant == BASE or variant == ALLEE:
        if variant == BASE:
            aa = a
            g = prm[1] if on == 1 else 0.0
            shift = xi * g
        else:
            alpha = prm[6]
            if on == 1:
                aa = a / (1.0 + alpha)
                g = 1.0 / (1.0 + alpha)
            else:
                aa = a
                g = 1.0
            shift = 0.0
        if g > 0.0:
            u = w + g
            gg = g * g
            F = w * (aa * w / u - mu - xi * w - shift)
            F1 = aa * (1.0 - gg / (u * u)) - mu - shift - 2.0 * xi * w
            F2 = 2.0 * aa * gg / (u * u * u) - 2.0 * xi
            F3 = -6.0 * aa * gg / (u * u * u * u)
        else:
            F = w * (aa - mu - xi * w)
            F1 = aa - mu - 2.0 * xi * w
            F2 = -2.0 * xi
            F3 = 0.0
        return F, F1, F2, F3

    if variant == COMPETITION_SURVIVAL:
        eta = coef(coefs[3], t, tmid)
        g = prm[1] if on == 1 else 0.0
        if g > 0.0:
            u = w + g
            gg = g * g
            h = w * w / u
            h1 = 1.0 - gg / (u * u)
            h2 = 2.0 * gg / (u * u * u)
            h3 = -6.0 * gg / (u * u * u * u)
        else:
            h = w
            h1 = 1.0
            h2 = 0.0
            h3 = 0.0
        ae = a * eta
        F = a * h - ae * h * h - mu * w
        F1 = a * h1 - 2.0 * ae * h * h1 - mu
        F2 = a * h2 - ae * (2.0 * h1 * h1 + 2.0 * h * h2)
        F3 = a * h3 - ae * (6.0 * h1 * h2 + 2.0 * h * h3)
        return F, F1, F2, F3

    if variant == IMPERFECT_CI:
        s = prm[4]
        g = prm[1] if on == 1 else 0.0
        if g > 0.0:
            u = w + 2.0 * g
            gg = g * g
            F = w * (a * (w + 2.0 * (1.0 - s) * g) / (2.0 * u) - mu - xi * (w + g))
            F1 = 0.5 * a * (1.0 - 4.0 * s * gg / (u * u)) - mu - xi * g - 2.0 * xi * w
            F2 = 4.0 * a * s * gg / (u * u * u) - 2.0 * xi
            F3 = -12.0 * a * s * gg / (u * u * u * u)
        else:
            F = w * (0.5 * a - mu - xi * w)
            F1 = 0.5 * a - mu - 2.0 * xi * w
            F2 = -2.0 * xi
            F3 = 0.0
        return F, F1, F2, F3

    # SATURATED_RELEASE
    if on == 1:
        b = prm[5]
        c = b * (b + 1.0)
        u = w + 1.0 + b
        F = a * w * (w + 1.0) / u - mu * w - xi * w * w
        F1 = a * (1.0 - c / (u * u)) - mu - 2.0 * xi * w
        F2 = 2.0 * a * c / (u * u * u) - 2.0 * xi
        F3 = -6.0 * a * c / (u * u * u * u)
    else:
        F = w * (a - mu - xi * w)
        F1 = a - mu - 2.0 * xi * w
        F2 = -2.0 * xi
        F3 = 0.0
    return F, F1, F2, F3


@njit(cache=True, error_model="numpy")
def _deriv(prm, coefs, t, tmid, on, y, lloyd, out):
    F, F1, F2, F3 = rhs(prm, coefs, t, tmid, on, y[0])
    out[0] = F
    if lloyd:
        e1 = math.exp(y[1])
        out[1] = F1
        out[2] = F2 * e1
        out[3] = F3 * e1 * e1


@njit(cache=True, error_model="numpy")
def _weight(i, size, rtol, atol):
    """Error scale of component ``i`` at magnitude ``size``.

    For the state the absolute part fades out below 1: tiny populations are
    resolved to relative accuracy, since off-window growth can amplify them
    by many orders of magnitude. ``W_TINY`` keeps the scale away from the
    denormal range.
    """
    if i == 0:
        return rtol * size + atol * min(1.0, size) + W_TINY
    return atol + rtol * size


@njit(cache=True, error_model="numpy")
def _rms(v, scale, n):
    s = 0.0
    for i in range(n):
        if scale[i] > 0.0:
            r = v[i] / scale[i]
        elif v[i] == 0.0:
            r = 0.0
        else:
            r = math.inf
        s += r * r
    return s


@njit(cache=True, error_model="numpy")
def solve(prm, coefs, mesh, on, y0, lloyd, rtol, atol, wmax, h_min, record, out_t, out_w):
    """Integrate across ``mesh`` (monotone, either direction), restarting at every node.

    ``y0`` holds ``[w, A1, A2, A3]``; the accumulators are only advanced when
    ``lloyd`` is true. Returns ``(status, t_reached, y, n_rec, n_steps, n_rejected)``.
    Recording stores every accepted step end point into ``out_t``/``out_w``.
    """
    n = 4 if lloyd else 1
    y = y0.copy()
    y_new = np.empty(4)
    y_stage = np.empty(4)
    K = np.zeros((_N_STAGES + 1, 4))
    scale = np.empty(4)
    err3 = np.empty(4)
    err5 = np.empty(4)
    f0 = np.empty(4)
    f1 = np.empty(4)

    n_rec = 0
    n_steps = 0
    n_rej = 0
    cap = out_t.shape[0]
    if record:
        if cap < 1:
            return STATUS_CAPACITY, mesh[0], y, n_rec, n_steps, n_rej
        out_t[0] = mesh[0]
        out_w[0] = y[0]
        n_rec = 1

    h_abs = 0.0
    t = mesh[0]
    for k in range(mesh.shape[0] - 1):
        t_start = mesh[k]
        t_end = mesh[k + 1]
        seg = t_end - t_start
        if seg == 0.0:
            continue
        direction = 1.0 if seg > 0.0 else -1.0
        tmid = 0.5 * (t_start + t_end)
        flag = on[k]
        t = t_start

        if y[0] == 0.0 and not lloyd and not record:
            # the origin is invariant; nothing to integrate
            continue

        _deriv(prm, coefs, t, tmid, flag, y, lloyd, f0)
        if h_abs == 0.0:
            # Hairer-Wanner starting step
            d0 = 0.0
            d1 = 0.0
            for i in range(n):
                sc = _weight(i, abs(y[i]), rtol, atol)
                if sc == 0.0:
                    continue
                d0 += (y[i] / sc) ** 2
                d1 += (f0[i] / sc) ** 2
            d0 = math.sqrt(d0 / n)
            d1 = math.sqrt(d1 / n)
            if d0 < 1e-5 or d1 < 1e-5:
                h0 = 1e-6
            else:
                h0 = 0.01 * d0 / d1
            h0 = min(h0, abs(seg))
            if not h0 > 0.0:
                h0 = 1e-6 * abs(seg)
            for i in range(4):
                y_stage[i] = y[i] + direction * h0 * f0[i]
            _deriv(prm, coefs, t + direction * h0, tmid, flag, y_stage, lloyd, f1)
            d2 = 0.0
            for i in range(n):
                sc = _weight(i, abs(y[i]), rtol, atol)
                if sc == 0.0:
                    continue
                d2 += ((f1[i] - f0[i]) / sc) ** 2
            d2 = math.sqrt(d2 / n) / h0
            if d1 <= 1e-15 and d2 <= 1e-15:
                h1 = max(1e-6, h0 * 1e-3)
            else:
                h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
            h_abs = min(100.0 * h0, h1)
        h_abs = min(h_abs, abs(seg))

        consecutive = 0
        while direction * (t_end - t) > 0.0:
            if h_abs < h_min:
                return STATUS_UNDERFLOW, t, y, n_rec, n_steps, n_rej
            h = direction * h_abs
            last = False
            if direction * (t + h - t_end) >= 0.0:
                h = t_end - t
                last = True
            for i in range(4):
                K[0, i] = f0[i]
            for s in range(1, _N_STAGES):
                for i in range(4):
                    acc = 0.0
                    for j in range(s):
                        acc += _A[s, j] * K[j, i]
                    y_stage[i] = y[i] + h * acc
                _deriv(prm, coefs, t + _C[s] * h, tmid, flag, y_stage, lloyd, f1)
                for i in range(4):
                    K[s, i] = f1[i]
            for i in range(4):
                acc = 0.0
                for j in range(_N_STAGES):
                    acc += _B[j] * K[j, i]
                y_new[i] = y[i] + h * acc
            t_new = t_end if last else t + h
            _deriv(prm, coefs, t_new, tmid, flag, y_new, lloyd, f1)
            for i in range(4):
                K[_N_STAGES, i] = f1[i]

            for i in range(n):
                scale[i] = _weight(i, max(abs(y[i]), abs(y_new[i])), rtol, atol)
                a3 = 0.0
                a5 = 0.0
                for j in range(_N_STAGES + 1):
                    a3 += _E3[j] * K[j, i]
                    a5 += _E5[j] * K[j, i]
                err3[i] = a3
                err5[i] = a5
            e5 = _rms(err5, scale, n)
            e3 = _rms(err3, scale, n)
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * n)

            # An overshoot below zero is treated like an error-test failure.
            positive = y_new[0] >= -W_TINY
            if err < 1.0 and math.isfinite(y_new[0]) and positive:
                if err == 0.0:
                    factor = _MAX_FACTOR
                else:
                    factor = min(_MAX_FACTOR, _SAFETY * err ** _ERR_EXP)
                n_steps += 1
                consecutive = 0
                t = t_new
                for i in range(4):
                    y[i] = y_new[i]
                    f0[i] = f1[i]
                if y[0] < 0.0:
                    y[0] = 0.0
                if record:
                    if n_rec >= cap:
                        return STATUS_CAPACITY, t, y, n_rec, n_steps, n_rej
                    out_t[n_rec] = t
                    out_w[n_rec] = y[0]
                    n_rec += 1
                if y[0] > wmax:
                    return STATUS_BLOWUP, t, y, n_rec, n_steps, n_rej
                if not last:
                    h_abs = h_abs * factor
            else:
                n_rej += 1
                consecutive += 1
                if consecutive > _MAX_CONSECUTIVE_REJECTS:
                    return STATUS_REJECTIONS, t, y, n_rec, n_steps, n_rej
                if not positive and err < 1.0:
                    h_abs = h_abs * 0.5
                elif math.isfinite(err):
                    h_abs = h_abs * max(_MIN_FACTOR, _SAFETY * err ** _ERR_EXP)
                else:
                    h_abs = h_abs * _MIN_FACTOR
    return STATUS_OK, t, y, n_rec, n_steps, n_rej


@njit(cache=True, error_model="numpy")
def poincare_batch(prm, coefs, mesh, on, w0s, rtol, atol, wmax, h_min):
    """Terminal values ``w(mesh[-1]; w0)`` for many starting values.

    Entries whose integration fails are returned as NaN.
    """
    out = np.empty(w0s.shape[0])
    dummy_t = np.empty(0)
    dummy_w = np.empty(0)
    y0 = np.zeros(4)
    for i in range(w0s.shape[0]):
        y0[0] = w0s[i]
        status, _, y, _, _, _ = solve(
            prm, coefs, mesh, on, y0, False, rtol, atol, wmax, h_min, False, dummy_t, dummy_w
        )
        out[i] = y[0] if status == STATUS_OK else np.nan
    return out
