"""Shared accelerated projected-gradient driver.

Nesterov momentum with two safeguards: a function restart when the
momentum overshoots, and a plain-step verification before stopping.  The
relative-decrease test alone can fire on a momentum plateau; a proximal
step from the candidate either confirms near-stationarity (a fixed point
of the plain step is optimal for a convex objective) or supplies the
strict descent the plateau was hiding.
"""

from __future__ import annotations

import math

import numpy as np

_FLOOR = 1e-30


def minimize(f, grad, project, x0, step, tol, max_iter, abs_stop=None):
    """Minimize a smooth convex ``f`` over the set encoded by ``project``.

    ``step`` must be a valid ``1/L`` step for the gradient.  Returns
    ``(x, f(x), iterations)``.
    """
    x = project(x0)
    y = x
    t = 1.0
    f_cur = f(x)
    it = 0
    if step <= 0.0:
        return x, f_cur, it
    while it < max_iter:
        it += 1
        x_new = project(y - step * grad(y))
        f_new = f(x_new)
        if f_new > f_cur:
            # momentum overshoot: plain step from the last monotone point
            y, t = x, 1.0
            x_new = project(y - step * grad(y))
            f_new = f(x_new)
        if f_cur - f_new <= tol * max(f_cur, _FLOOR):
            probe = project(x_new - step * grad(x_new))
            f_probe = f(probe)
            if f_new - f_probe <= tol * max(f_new, _FLOOR):
                x, f_cur = x_new, f_new
                break
            # the plateau was a momentum artifact; adopt the plain step
            x, y, t, f_cur = probe, probe, 1.0, f_probe
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_next) * (x_new - x)
            x, t, f_cur = x_new, t_next, f_new
        if abs_stop is not None and f_cur <= abs_stop:
            break
    return x, f_cur, it
