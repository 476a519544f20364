"""Hot inner-loop kernels with a numba backend and a pure-numpy fallback.

The backend is picked once at import from the CGADAM_BACKEND environment
variable ("numba" or "numpy"; default numba when importable) and can be
switched at runtime with set_backend(). Both backends expose the same two
functions:

conj_dots(g, g_prev, d_prev) -> (gy, dy, gg, pp, yy, gd)
    The six inner products needed by every conjugate-coefficient formula,
    with y = g - g_prev.

fused_step(x, m, v, vmax, d, beta1t, beta2, bc1, bc2, alpha, eps,
           correct_first, correct_second, use_max, m_hat, v_hat, update)
    One elementwise moment/update pass. Mutates x, m, v, vmax in place and
    fills m_hat, v_hat, update. bc1/bc2 are the bias-correction divisors
    (1 - beta11**t, 1 - beta2**t); the correct_* flags select whether they
    are applied, use_max selects the running-max denominator.
"""

import math
import os
import types

import numpy as np


def _np_conj_dots(g, g_prev, d_prev):
    y = g - g_prev
    return (float(g @ y), float(d_prev @ y), float(g @ g),
            float(g_prev @ g_prev), float(y @ y), float(g @ d_prev))


def _np_fused_step(x, m, v, vmax, d, beta1t, beta2, bc1, bc2, alpha, eps,
                   correct_first, correct_second, use_max,
                   m_hat, v_hat, update):
    m *= beta1t
    m += (1.0 - beta1t) * d
    v *= beta2
    v += (1.0 - beta2) * (d * d)
    np.divide(m, bc1 if correct_first else 1.0, out=m_hat)
    np.divide(v, bc2 if correct_second else 1.0, out=v_hat)
    if use_max:
        np.maximum(vmax, v_hat, out=vmax)
        denom = vmax
    else:
        denom = v_hat
    np.divide(m_hat, np.sqrt(denom + eps), out=update)
    update *= -alpha
    x += update


_numpy_backend = types.SimpleNamespace(
    name="numpy", conj_dots=_np_conj_dots, fused_step=_np_fused_step)


def _build_numba_backend():
    from numba import njit

    @njit(cache=True)
    def conj_dots(g, g_prev, d_prev):
        gy = 0.0
        dy = 0.0
        gg = 0.0
        pp = 0.0
        yy = 0.0
        gd = 0.0
        for i in range(g.shape[0]):
            y = g[i] - g_prev[i]
            gy += g[i] * y
            dy += d_prev[i] * y
            gg += g[i] * g[i]
            pp += g_prev[i] * g_prev[i]
            yy += y * y
            gd += g[i] * d_prev[i]
        return gy, dy, gg, pp, yy, gd

    @njit(cache=True)
    def fused_step(x, m, v, vmax, d, beta1t, beta2, bc1, bc2, alpha, eps,
                   correct_first, correct_second, use_max,
                   m_hat, v_hat, update):
        c1 = bc1 if correct_first else 1.0
        c2 = bc2 if correct_second else 1.0
        for i in range(x.shape[0]):
            m[i] = beta1t * m[i] + (1.0 - beta1t) * d[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * d[i] * d[i]
            m_hat[i] = m[i] / c1
            v_hat[i] = v[i] / c2
            if use_max:
                if v_hat[i] > vmax[i]:
                    vmax[i] = v_hat[i]
                denom = vmax[i]
            else:
                denom = v_hat[i]
            update[i] = -alpha * m_hat[i] / math.sqrt(denom + eps)
            x[i] += update[i]

    return types.SimpleNamespace(
        name="numba", conj_dots=conj_dots, fused_step=fused_step)


def get_backend(name):
    if name == "numpy":
        return _numpy_backend
    if name == "numba":
        return _build_numba_backend()
    raise ValueError(f"unknown backend {name!r}")


def _default_name():
    name = os.environ.get("CGADAM_BACKEND", "").strip().lower()
    if name in ("numpy", "numba"):
        return name
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        return "numpy"


ACTIVE = get_backend(_default_name())


def set_backend(name):
    """Switch the active backend; returns the previous one."""
    global ACTIVE
    previous = ACTIVE
    ACTIVE = get_backend(name)
    return previous


def warmup():
    """Trigger JIT compilation so timed sections see steady-state cost."""
    z = np.zeros(2)
    o = np.ones(2)
    ACTIVE.conj_dots(o, z, z)
    ACTIVE.fused_step(z.copy(), z.copy(), z.copy(), z.copy(), o,
                      0.9, 0.999, 0.1, 0.001, 0.1, 1e-8,
                      True, True, True, np.empty(2), np.empty(2), np.empty(2))
