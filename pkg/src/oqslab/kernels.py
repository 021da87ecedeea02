"""Vacuum two-point kernels of the radiation field, regulated at short times.

The electromagnetic vacuum enters the reduced dynamics of a slow charge
through two retarded kernels: a noise kernel

    N0(tau) = (4 alpha hbar / pi c^2) Re (tau + i eps)^-4

and a dissipation kernel proportional to the third derivative of the
regulating Lorentzian

    delta_eps(tau) = eps / (pi (tau^2 + eps^2)),

where eps > 0 is the inverse frequency cutoff. All the long-time physics
(decoherence rate, friction, frequency shift) comes out of three hard
integrals of these kernels against trigonometric test functions; this
module computes them both by deterministic panel quadrature and by their
closed small-eps forms so each can check the other.

Conventions: integrals run over tau >= 0 (retarded), theta(0) = 1.
"""

import math
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import InvalidParameterError, RegimeError, ToleranceError
from dataclasses import dataclass

GAMMA_E = 0.5772156649015329  # Euler-Mascheroni


@dataclass(frozen=True)
class KernelParams:
    alpha: float = 1.0 / 137.0
    eps: float = 0.01
    hbar: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.eps <= 0 or self.hbar <= 0 or self.c <= 0:
            raise InvalidParameterError(
                "alpha, eps, hbar, c must all be positive")

    def advisories(self, omega=None):
        """Soft regime warnings (returned, never raised)."""
        out = []
        if omega is not None and self.eps * omega >= 1.0:
            out.append(f"eps*omega = {self.eps * omega:.3g} >= 1: the "
                       "cutoff is not well separated from the probe "
                       "frequency; closed small-eps forms degrade")
        return out


def delta_eps(tau, eps, order=0):
    """Regulating Lorentzian and its first three derivatives.

    order 0:  eps / (pi (tau^2 + eps^2))
    order 1: -2 eps tau / (pi (tau^2 + eps^2)^2)
    order 2:  2 eps (3 tau^2 - eps^2) / (pi (tau^2 + eps^2)^3)
    order 3: -24 eps tau (tau^2 - eps^2) / (pi (tau^2 + eps^2)^4)
    """
    if eps <= 0:
        raise InvalidParameterError("eps must be positive")
    t = np.asarray(tau, dtype=float)
    s = t * t + eps * eps
    if order == 0:
        out = eps / (np.pi * s)
    elif order == 1:
        out = -2.0 * eps * t / (np.pi * s**2)
    elif order == 2:
        out = 2.0 * eps * (3.0 * t * t - eps * eps) / (np.pi * s**3)
    elif order == 3:
        out = -24.0 * eps * t * (t * t - eps * eps) / (np.pi * s**4)
    else:
        raise InvalidParameterError("order must be 0..3")
    return out if out.shape else float(out)


def noise_kernel_vac(tau, params: KernelParams):
    """N0(tau): real part of the quartic pole, i.e.
    (4 alpha hbar / pi c^2) (tau^4 - 6 tau^2 eps^2 + eps^4)/(tau^2+eps^2)^4.

    Positive at tau = 0 (value 4 alpha hbar / pi c^2 eps^4), crosses zero
    at tau = (sqrt(2) -+ 1) eps, and decays like tau^-4.
    """
    e = params.eps
    t = np.asarray(tau, dtype=float)
    s = t * t + e * e
    out = (4.0 * params.alpha * params.hbar / (np.pi * params.c**2)
           * (t**4 - 6.0 * t * t * e * e + e**4) / s**4)
    return out if out.shape else float(out)


def dissipation_kernel(tau, params: KernelParams):
    """Retarded dissipation kernel (4 hbar alpha / 3 c^2) delta_eps'''(tau)
    for tau >= 0, zero for tau < 0 (theta(0) = 1 convention)."""
    t = np.asarray(tau, dtype=float)
    out = np.where(t < 0.0, 0.0,
                   4.0 * params.hbar * params.alpha / (3.0 * params.c**2)
                   * delta_eps(np.maximum(t, 0.0), params.eps, order=3))
    return out if out.shape else float(out)


# --------------------------------------------------------------- quadrature

def _panel_quad(f, seams, rel_floor):
    """Deterministic panel quadrature: fixed seams, fsum of panel results.

    Raises ToleranceError if scipy's own error estimate on any panel (or
    their sum) is out of proportion to the result scale.
    """
    vals, errs = [], []
    with warnings.catch_warnings():
        # roundoff warnings on negligible far-tail panels are expected;
        # the aggregate error check below is the real gate
        warnings.simplefilter("ignore", IntegrationWarning)
        for a, b in zip(seams[:-1], seams[1:]):
            v, e = quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
            vals.append(v)
            errs.append(e)
    total = math.fsum(vals)
    scale = max(abs(total), max(abs(v) for v in vals))
    if math.fsum(errs) > max(1e-8 * scale, rel_floor):
        raise ToleranceError(
            f"panel quadrature did not converge: error estimate "
            f"{math.fsum(errs):.2e} vs scale {scale:.2e}")
    return total


def _kernel_seams(eps, omega, t):
    """Head panels at eps multiples through 10 eps, then half-period
    panels of the oscillating factor out to t."""
    head = [k * eps for k in range(0, 11)]
    head = [s for s in head if s < t] + [min(10.0 * eps, t)]
    seams = sorted(set(head))
    if t > seams[-1]:
        if omega > 0.0:
            k0 = int(math.floor(seams[-1] * omega / math.pi)) + 1
            kn = int(math.floor(t * omega / math.pi))
            seams += [k * math.pi / omega for k in range(k0, kn + 1)]
        else:
            # no oscillation: geometric panels are enough for the tail
            s = seams[-1]
            while s < t:
                s *= 4.0
                seams.append(min(s, t))
        seams = sorted(set(seams + [t]))
    return seams


def noise_cos_integral(omega, t, params: KernelParams):
    """integral_0^t N0(tau) cos(omega tau) dtau by panel quadrature."""
    if t <= 0:
        raise InvalidParameterError("t must be positive")
    f = lambda u: noise_kernel_vac(u, params) * math.cos(omega * u)
    scale = params.alpha * params.hbar / (params.c**2 * params.eps**3)
    return _panel_quad(f, _kernel_seams(params.eps, abs(omega), t),
                       rel_floor=1e-13 * scale)


def cos_integral_closed(omega, params: KernelParams):
    """Large-t limit of the cosine integral: alpha hbar omega^3
    exp(-eps omega) / 3 c^2 -- exact for the Lorentzian regulator."""
    if omega < 0:
        raise InvalidParameterError("omega must be non-negative")
    return (params.alpha * params.hbar * omega**3
            * math.exp(-params.eps * omega) / (3.0 * params.c**2))


def noise_sin_integral(omega, t, params: KernelParams):
    """integral_0^t N0(tau) sin(omega tau) dtau; omega = 0 is rejected
    because the closed comparison form has a log(eps omega) in it."""
    if omega <= 0:
        raise InvalidParameterError("omega must be positive")
    if t <= 0:
        raise InvalidParameterError("t must be positive")
    f = lambda u: noise_kernel_vac(u, params) * math.sin(omega * u)
    scale = params.alpha * params.hbar / (params.c**2 * params.eps**2)
    return _panel_quad(f, _kernel_seams(params.eps, omega, t),
                       rel_floor=1e-13 * scale)


def sin_integral_closed(omega, params: KernelParams):
    """Three-term small-eps form of the large-t sine integral:

    omega [ -2 alpha hbar / (3 pi c^2 eps^2)
            + (2 alpha hbar omega^2 / 3 pi c^2)(ln(eps omega) + gamma_E) ]

    The remainder is O(eps^2 ln eps) at fixed omega (the eps-linear term
    cancels), which the tests pin down by halving eps.
    """
    if omega <= 0:
        raise InvalidParameterError("omega must be positive")
    a, e, hb, c = params.alpha, params.eps, params.hbar, params.c
    return omega * (-2.0 * a * hb / (3.0 * math.pi * c**2 * e**2)
                    + 2.0 * a * hb * omega**2 / (3.0 * math.pi * c**2)
                    * (math.log(e * omega) + GAMMA_E))


def ibp_identity_check(f, f0, d2f0, d3f0, t, params: KernelParams,
                       tail_omega=1.0):
    """Check integral_0^t delta_eps'''(u) f(-u) du against its
    integration-by-parts surface form f'''(0)/2 - delta_eps(0) f''(0)
    - delta_eps''(0) f(0).

    f is a callable of the (negative) argument; f0, d2f0, d3f0 are f and
    its second/third derivatives at zero, supplied by the caller so the
    right-hand side is exact. Returns (lhs, rhs). Requires t >= 50 eps:
    below that the surface form has not converged and the comparison is
    meaningless, which is a regime error rather than a tolerance problem.
    """
    e = params.eps
    if t < 50.0 * e:
        raise RegimeError(f"t = {t} < 50 eps = {50 * e}: integration-by-"
                          "parts surface terms have not converged")
    g = lambda u: delta_eps(u, e, order=3) * f(-u)
    head = [k * e / 4.0 for k in range(0, 41)]
    head += [k * e for k in range(11, 51)]
    seams = sorted(set(head))
    lhs = _panel_quad(g, seams, rel_floor=1e-13 / e**3)
    if t > 50.0 * e:
        k0 = int(math.floor(50.0 * e * tail_omega / math.pi)) + 1
        kn = int(math.floor(t * tail_omega / math.pi))
        tail_seams = ([50.0 * e]
                      + [k * math.pi / tail_omega for k in range(k0, kn + 1)]
                      + [t])
        lhs += _panel_quad(g, sorted(set(tail_seams)),
                           rel_floor=1e-13 / e**3)
    rhs = (d3f0 / 2.0 - delta_eps(0.0, e, order=0) * d2f0
           - delta_eps(0.0, e, order=2) * f0)
    return lhs, rhs
