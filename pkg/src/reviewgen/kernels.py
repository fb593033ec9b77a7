"""Hot inner kernels for the guided-LSTM recurrence.

One forward and one backward kernel cover a single cell step; everything
above them (sequence loops, loss, search) is plain Python over numpy.
Both kernels exist twice: a numba ``@njit`` version and a pure-numpy
twin with identical semantics.  The active pair is chosen at import
time from the ``REVIEWGEN_BACKEND`` environment variable:

    REVIEWGEN_BACKEND=numpy   force the pure-numpy path
    REVIEWGEN_BACKEND=numba   require numba (error if unavailable)
    unset                     numba when importable, else numpy

The two backends agree to ~1 ulp per elementary operation (libm vs
numpy SIMD transcendentals), not bit-for-bit; within one backend all
kernels are bit-deterministic.

Weights arrive packed: the four gates' weights are stacked row-wise in
gate order [input, forget, output, candidate], so ``Wx`` is (4H, Dx),
``Wm`` is (4H, H), ``Wq`` is (4H, Dg) and ``b`` is (4H,).

``cell_clip > 0`` clamps the memory cell to [-cell_clip, cell_clip]
after the update (the backward pass zeroes the gradient through
saturated elements); ``cell_clip = 0`` disables clipping.
``output_tanh`` switches the hidden-state read from m = o * c to the
conventional m = o * tanh(c).
"""

from __future__ import annotations

import os

import numpy as np

from .numerics import sigmoid as _sigmoid_np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def glstm_step_forward_numpy(Wx, Wm, Wq, b, x, g, m_prev, c_prev,
                             cell_clip, output_tanh):
    """One cell step; returns (i, f, o, u, c_raw, c, m)."""
    H = m_prev.shape[0]
    a = Wx @ x + Wm @ m_prev + Wq @ g + b
    i = _sigmoid_np(a[:H])
    f = _sigmoid_np(a[H:2 * H])
    o = _sigmoid_np(a[2 * H:3 * H])
    u = np.tanh(a[3 * H:])
    c_raw = f * c_prev + i * u
    c = np.clip(c_raw, -cell_clip, cell_clip) if cell_clip > 0.0 else c_raw
    m = o * (np.tanh(c) if output_tanh else c)
    return i, f, o, u, c_raw, c, m


def glstm_step_backward_numpy(Wx, Wm, Wq, x, g, m_prev, c_prev,
                              i, f, o, u, c_raw, c, d_m, d_c,
                              cell_clip, output_tanh):
    """Adjoint of one cell step.

    Returns (dWx, dWm, dWq, db, dx, dg, dm_prev, dc_prev) for upstream
    gradients d_m (w.r.t. the emitted hidden state) and d_c (w.r.t. the
    threaded post-clip cell).
    """
    if output_tanh:
        tc = np.tanh(c)
        d_o = d_m * tc
        dc_tot = d_c + d_m * o * (1.0 - tc * tc)
    else:
        d_o = d_m * c
        dc_tot = d_c + d_m * o
    if cell_clip > 0.0:
        dc_tot = dc_tot * (np.abs(c_raw) < cell_clip)
    d_i = dc_tot * u
    d_f = dc_tot * c_prev
    d_u = dc_tot * i
    dc_prev = dc_tot * f
    da = np.concatenate([
        d_i * i * (1.0 - i),
        d_f * f * (1.0 - f),
        d_o * o * (1.0 - o),
        d_u * (1.0 - u * u),
    ])
    dWx = np.outer(da, x)
    dWm = np.outer(da, m_prev)
    dWq = np.outer(da, g)
    dx = da @ Wx
    dm_prev = da @ Wm
    dg = da @ Wq
    return dWx, dWm, dWq, da, dx, dg, dm_prev, dc_prev


if HAVE_NUMBA:

    @njit(cache=True)
    def _sigmoid_scalar(z):
        if z >= 0.0:
            return 1.0 / (1.0 + np.exp(-z))
        ez = np.exp(z)
        return ez / (1.0 + ez)

    @njit(cache=True)
    def glstm_step_forward_numba(Wx, Wm, Wq, b, x, g, m_prev, c_prev,
                                 cell_clip, output_tanh):
        H = m_prev.shape[0]
        a = np.dot(Wx, x) + np.dot(Wm, m_prev) + np.dot(Wq, g) + b
        i = np.empty(H)
        f = np.empty(H)
        o = np.empty(H)
        u = np.empty(H)
        for k in range(H):
            i[k] = _sigmoid_scalar(a[k])
            f[k] = _sigmoid_scalar(a[H + k])
            o[k] = _sigmoid_scalar(a[2 * H + k])
            u[k] = np.tanh(a[3 * H + k])
        c_raw = f * c_prev + i * u
        if cell_clip > 0.0:
            c = np.empty(H)
            for k in range(H):
                v = c_raw[k]
                if v > cell_clip:
                    v = cell_clip
                elif v < -cell_clip:
                    v = -cell_clip
                c[k] = v
        else:
            c = c_raw.copy()
        if output_tanh:
            m = o * np.tanh(c)
        else:
            m = o * c
        return i, f, o, u, c_raw, c, m

    @njit(cache=True)
    def glstm_step_backward_numba(Wx, Wm, Wq, x, g, m_prev, c_prev,
                                  i, f, o, u, c_raw, c, d_m, d_c,
                                  cell_clip, output_tanh):
        H = m_prev.shape[0]
        d_o = np.empty(H)
        dc_tot = np.empty(H)
        if output_tanh:
            for k in range(H):
                tc = np.tanh(c[k])
                d_o[k] = d_m[k] * tc
                dc_tot[k] = d_c[k] + d_m[k] * o[k] * (1.0 - tc * tc)
        else:
            for k in range(H):
                d_o[k] = d_m[k] * c[k]
                dc_tot[k] = d_c[k] + d_m[k] * o[k]
        if cell_clip > 0.0:
            for k in range(H):
                if c_raw[k] >= cell_clip or c_raw[k] <= -cell_clip:
                    dc_tot[k] = 0.0
        da = np.empty(4 * H)
        dc_prev = np.empty(H)
        for k in range(H):
            d_i = dc_tot[k] * u[k]
            d_f = dc_tot[k] * c_prev[k]
            d_u = dc_tot[k] * i[k]
            dc_prev[k] = dc_tot[k] * f[k]
            da[k] = d_i * i[k] * (1.0 - i[k])
            da[H + k] = d_f * f[k] * (1.0 - f[k])
            da[2 * H + k] = d_o[k] * o[k] * (1.0 - o[k])
            da[3 * H + k] = d_u * (1.0 - u[k] * u[k])
        dWx = np.outer(da, x)
        dWm = np.outer(da, m_prev)
        dWq = np.outer(da, g)
        dx = np.dot(da, Wx)
        dm_prev = np.dot(da, Wm)
        dg = np.dot(da, Wq)
        return dWx, dWm, dWq, da, dx, dg, dm_prev, dc_prev


def _pick_backend() -> str:
    choice = os.environ.get("REVIEWGEN_BACKEND", "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(
            f"REVIEWGEN_BACKEND must be 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    if not HAVE_NUMBA:
        if choice == "numba":
            raise RuntimeError("REVIEWGEN_BACKEND=numba but numba is not importable")
        return "numpy"
    return "numba"


BACKEND = _pick_backend()

if BACKEND == "numba":
    glstm_step_forward = glstm_step_forward_numba
    glstm_step_backward = glstm_step_backward_numba
else:
    glstm_step_forward = glstm_step_forward_numpy
    glstm_step_backward = glstm_step_backward_numpy
