"""Straight-line reference implementation of the CG-like-Adam update loop.

Pure Python lists and math only, written independently of the package
internals. Tests compare package trajectories against this; keep it dumb
and literal, do not "optimize" it or share code with src/.
"""

import math


def conj_coeff(method, g, g_prev, d_prev, lam=2.0, guard=1e-12):
    if method == "none":
        return 0.0
    y = [gi - pi for gi, pi in zip(g, g_prev)]
    gy = sum(gi * yi for gi, yi in zip(g, y))
    dy = sum(di * yi for di, yi in zip(d_prev, y))
    gg = sum(gi * gi for gi in g)
    pp = sum(pi * pi for pi in g_prev)
    yy = sum(yi * yi for yi in y)
    gd = sum(gi * di for gi, di in zip(g, d_prev))
    if method == "hs":
        return 0.0 if abs(dy) < guard else gy / dy
    if method == "fr":
        return 0.0 if abs(pp) < guard else gg / pp
    if method == "prp":
        return 0.0 if abs(pp) < guard else gy / pp
    if method == "dy":
        return 0.0 if abs(dy) < guard else gg / dy
    if method == "hz":
        if abs(dy) < guard:
            return 0.0
        return gy / dy - lam * yy * gd / (dy * dy)
    raise ValueError(method)


def run_reference(x0, grad_fn, iters, alpha0, b=0.0, beta1=0.9, beta2=0.999,
                  a=1.0 + 1e-5, eps=1e-8, method="fr", lam=2.0,
                  rectify=True, record=None):
    """Run the update loop; grad_fn(x, t) -> gradient list.

    Returns the final x. If `record` is a list, a dict per step is appended
    with the intermediate quantities.
    """
    d = len(x0)
    x = list(x0)
    m = [0.0] * d
    v = [0.0] * d
    vmax = [0.0] * d
    d_prev = [0.0] * d
    g_prev = [0.0] * d
    for t in range(1, iters + 1):
        g = list(grad_fn(x, t))
        if t == 1:
            gamma = 0.0
        else:
            gamma = conj_coeff(method, g, g_prev, d_prev, lam)
        coef = gamma if not rectify else gamma / (t ** a)
        dt = [gi - coef * di for gi, di in zip(g, d_prev)]
        m = [beta1 * mi + (1.0 - beta1) * di for mi, di in zip(m, dt)]
        m_hat = [mi / (1.0 - beta1 ** t) for mi in m]
        v = [beta2 * vi + (1.0 - beta2) * di * di for vi, di in zip(v, dt)]
        v_hat = [vi / (1.0 - beta2 ** t) for vi in v]
        vmax = [max(a_, b_) for a_, b_ in zip(vmax, v_hat)]
        alpha_t = alpha0 / (t ** b) if b else alpha0
        x = [xi - alpha_t * mh / math.sqrt(vm + eps)
             for xi, mh, vm in zip(x, m_hat, vmax)]
        if record is not None:
            record.append({
                "t": t, "gamma": gamma, "d": dt, "m_hat": m_hat,
                "v_hat": v_hat, "vmax": list(vmax), "x": list(x),
            })
        g_prev = g
        d_prev = dt
    return x
