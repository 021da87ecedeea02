"""Fixed-step RK4 for (possibly time-dependent) matrix-valued ODEs.

A hand-rolled classical Runge-Kutta step is used instead of an adaptive
library integrator on purpose: the run artifacts are required to be
byte-identical across reruns, and adaptive step control makes the sampled
times (and the rounding of every arithmetic operation feeding them)
depend on tolerances and library version. Fixed-step RK4 at the step
sizes used here is well inside its stability region for every generator
in this package and its O(h^4) error is validated against exact oracles
in the tests.
"""

import numpy as np

from .errors import InvalidParameterError, NumericalError


def rk4(rhs, y0, t0, t1, n_steps, observer=None, observe_stride=1):
    """Integrate y' = rhs(t, y) from t0 to t1 in n_steps equal steps.

    observer(t, y), when given, is called at t0 and then after every
    observe_stride-th step; observe_stride must divide n_steps. The state
    is checked for overflow/NaN at every observation point (and at the
    end), raising NumericalError so a runaway integration never produces
    silently corrupt output.
    """
    if n_steps <= 0:
        raise InvalidParameterError("n_steps must be positive")
    if n_steps % observe_stride != 0:
        raise InvalidParameterError(
            f"observe_stride {observe_stride} must divide n_steps {n_steps}")
    y = np.array(y0, dtype=complex)
    h = (t1 - t0) / n_steps
    if observer is not None:
        observer(t0, y)
    for k in range(n_steps):
        t = t0 + k * h
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + (h / 2) * k1)
        k3 = rhs(t + h / 2, y + (h / 2) * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (k + 1) % observe_stride == 0:
            if not np.all(np.isfinite(y)):
                raise NumericalError(
                    f"non-finite state at t = {t0 + (k + 1) * h}")
            if observer is not None:
                observer(t0 + (k + 1) * h, y)
    if not np.all(np.isfinite(y)):
        raise NumericalError(f"non-finite state at t = {t1}")
    return y


def sample_times(t0, t1, n_steps, observe_stride):
    """The observation times rk4 will report for the same arguments."""
    h = (t1 - t0) / n_steps
    return np.array([t0 + k * h
                     for k in range(0, n_steps + 1, observe_stride)])
