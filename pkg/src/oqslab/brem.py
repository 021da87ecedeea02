"""Radiating harmonic oscillator: late-time reduced dynamics of a charge.

After the vacuum kernels' transients die out (times long against the
cutoff eps but short against the radiative lifetime), the reduced motion
of a harmonically bound charge obeys a constant-coefficient master
equation with four structural pieces:

    drho/dt = -(i/hbar) [H, rho]
              - (i fr / hbar) [x, {p, rho}]        (radiation friction)
              - lam [x, [x, rho]]                  (position localization)
              - cxp [x, [p, rho]]                  (log-dressed cross term)

    fr  = alpha hbar Omega^2 / (3 m c^2)
    lam = alpha Omega^3 / (3 c^2)
    cxp = -(2 alpha Omega^2 / (3 pi m c^2)) (gamma_E + ln(hbar Omega/m c^2))

This is the same operator skeleton as the standard high-temperature
quantum Brownian motion (Caldeira-Leggett) generator; only the
coefficients differ, with the vacuum playing the bath. The second moments
close on a linear system whose fixed point is computed here exactly, and
which doubles as the oracle for the dense integrations.
"""

from dataclasses import dataclass

import math

import numpy as np
from scipy.linalg import expm

from .errors import InvalidParameterError, RegimeError
from .hilbert import OperatorSet, anticommutator, commutator
from .kernels import GAMMA_E


@dataclass(frozen=True)
class BremParams:
    alpha: float = 1.0 / 137.0
    omega: float = 1.0          # trap frequency entering H
    mass: float = 1.0
    hbar: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if min(self.alpha, self.omega, self.mass, self.hbar, self.c) <= 0:
            raise InvalidParameterError(
                "alpha, omega, mass, hbar, c must all be positive")

    @property
    def lambda_tilde(self):
        """Position-localization coefficient alpha Omega^3 / 3 c^2."""
        return self.alpha * self.omega**3 / (3.0 * self.c**2)

    @property
    def friction(self):
        """Coefficient of -(i/hbar)[x,{p,rho}]."""
        return (self.alpha * self.hbar * self.omega**2
                / (3.0 * self.mass * self.c**2))

    @property
    def gamma_p(self):
        """Momentum damping rate 2 alpha hbar Omega^2 / 3 m c^2."""
        return 2.0 * self.friction

    @property
    def cross_coefficient(self):
        """Coefficient of -[x,[p,rho]] (the log-dressed correction)."""
        r = self.hbar * self.omega / (self.mass * self.c**2)
        return (-2.0 * self.alpha * self.omega**2
                / (3.0 * math.pi * self.mass * self.c**2)
                * (GAMMA_E + math.log(r)))

    def advisories(self):
        out = []
        r = self.hbar * self.omega / (self.mass * self.c**2)
        if r >= 1.0:
            out.append(f"hbar Omega / m c^2 = {r:.3g} >= 1: the particle "
                       "is relativistic; the derivation assumes slow motion")
        return out


@dataclass(frozen=True)
class BremFlags:
    """Term toggles. decoherence-only (friction=False, cross=False) is the
    pure-localization channel; cross requires friction since the dressed
    cross term arises at the same order as the friction it corrects."""

    friction: bool = True
    decoherence: bool = True
    cross: bool = True

    def __post_init__(self):
        if self.cross and not self.friction:
            raise InvalidParameterError(
                "the cross term is a dressing of friction; enable friction")


def renormalized_frequency(params: BremParams, omega_max):
    """Omega sqrt(1 - 4 alpha hbar omega_max / 3 pi m c^2): the trap
    frequency after absorbing the cutoff-dependent mass shift."""
    if omega_max <= 0:
        raise InvalidParameterError("omega_max must be positive")
    radicand = 1.0 - (4.0 * params.alpha * params.hbar * omega_max
                      / (3.0 * math.pi * params.mass * params.c**2))
    if radicand <= 0.0:
        raise RegimeError(
            f"cutoff omega_max = {omega_max} drives the squared frequency "
            "negative; the harmonic description has broken down")
    return params.omega * math.sqrt(radicand)


def decoherence_rate(params: BremParams, dx):
    """Superposition decay rate lam * dx^2 for two packets dx apart."""
    return params.lambda_tilde * dx**2


# ------------------------------------------------------------ dense master

def brem_master_rhs(rho, t, ops: OperatorSet, params: BremParams,
                    flags: BremFlags = BremFlags()):
    """Reference implementation of the late-time generator (see module
    docstring). t is accepted for integrator compatibility; the
    coefficients are constants."""
    if t < 0:
        raise InvalidParameterError("the generator is derived for t >= 0")
    x, p = ops.x, ops.p
    m, w, hb = params.mass, params.omega, params.hbar
    H = p @ p / (2 * m) + 0.5 * m * w * w * (x @ x)
    out = -1j / hb * commutator(H, rho)
    if flags.friction:
        out -= 1j * params.friction / hb * commutator(
            x, anticommutator(p, rho))
    if flags.decoherence:
        out -= params.lambda_tilde * commutator(x, commutator(x, rho))
    if flags.cross:
        out -= params.cross_coefficient * commutator(x, commutator(p, rho))
    return out


def brem_generator(ops: OperatorSet, params: BremParams,
                   flags: BremFlags = BremFlags()):
    """rhs(t, rho) with the operator products precomputed."""
    x, p = ops.x, ops.p
    m, w, hb = params.mass, params.omega, params.hbar
    H = p @ p / (2 * m) + 0.5 * m * w * w * (x @ x)
    fr, lam, cxp = params.friction, params.lambda_tilde, params.cross_coefficient

    def rhs(t, r):
        out = -1j / hb * (H @ r - r @ H)
        if flags.friction:
            a = p @ r + r @ p
            out -= 1j * fr / hb * (x @ a - a @ x)
        if flags.decoherence:
            a = x @ r - r @ x
            out -= lam * (x @ a - a @ x)
        if flags.cross:
            a = p @ r - r @ p
            out -= cxp * (x @ a - a @ x)
        return out
    return rhs


# ---------------------------------------------------------------- moments

def moment_rhs(t, m, params: BremParams, flags: BremFlags = BremFlags()):
    """Flow of (mean_x, mean_p, var_x, cov_xp, var_p); closes exactly.

    cov_xp is the symmetrized covariance <{x,p}>/2 - <x><p>.
    """
    mm, w, hb = params.mass, params.omega, params.hbar
    gp = params.gamma_p if flags.friction else 0.0
    x, p, vx, c, vp = m
    dress = (-params.cross_coefficient * hb**2 if flags.cross else 0.0)
    pump = 2.0 * hb**2 * params.lambda_tilde if flags.decoherence else 0.0
    return np.array([
        p / mm,
        -mm * w * w * x - gp * p,
        2.0 * c / mm,
        vp / mm - mm * w * w * vx - gp * c + dress,
        -2.0 * mm * w * w * c - 2.0 * gp * vp + pump])


def _variance_system(params, flags):
    """M, b with d(vx, c, vp)/dt = M (vx, c, vp) + b, extracted from
    moment_rhs so the two can never drift apart."""
    zero = moment_rhs(0.0, np.zeros(5), params, flags)[2:]
    cols = []
    for k in range(3):
        e = np.zeros(5)
        e[2 + k] = 1.0
        cols.append(moment_rhs(0.0, e, params, flags)[2:] - zero)
    return np.array(cols).T, zero


def stationary_variances(params: BremParams, flags: BremFlags = BremFlags()):
    """Fixed point (var_x, cov_xp, var_p) of the variance flow.

    Requires friction and decoherence: without friction nothing relaxes,
    without the pump the only fixed point is a zero-variance artifact.
    """
    if not (flags.friction and flags.decoherence):
        raise RegimeError("a stationary state needs friction (relaxation) "
                          "and decoherence (pumping) enabled")
    M, b = _variance_system(params, flags)
    return np.linalg.solve(M, -b)


def evolve_brem_moments(m0, t, params: BremParams,
                        flags: BremFlags = BremFlags()):
    """Exact propagation of the affine moment flow by one 6x6 matrix
    exponential in homogeneous coordinates (works for any flag set,
    including non-relaxing ones)."""
    m0 = np.asarray(m0, dtype=float)
    if m0.shape != (5,):
        raise InvalidParameterError("moments are (x, p, var_x, cov, var_p)")
    zero = moment_rhs(0.0, np.zeros(5), params, flags)
    A = np.empty((5, 5))
    for k in range(5):
        e = np.zeros(5)
        e[k] = 1.0
        A[:, k] = moment_rhs(0.0, e, params, flags) - zero
    aug = np.zeros((6, 6))
    aug[:5, :5] = A * t
    aug[:5, 5] = zero * t
    return (expm(aug) @ np.append(m0, 1.0))[:5]


# -------------------------------------------------------------- structure

def term_structure(flags: BremFlags = BremFlags()):
    """Canonical skeleton tags of the generator's operator structure."""
    tags = ["unitary:[H,rho]"]
    if flags.friction:
        tags.append("friction:[x,{p,rho}]")
    if flags.decoherence:
        tags.append("decoherence:[x,[x,rho]]")
    if flags.cross:
        tags.append("cross:[x,[p,rho]]")
    return tuple(tags)


def caldeira_leggett_structure(with_cross_term=True):
    """Operator skeleton of the standard high-temperature quantum
    Brownian motion generator, for structural comparison."""
    tags = ["unitary:[H,rho]", "friction:[x,{p,rho}]",
            "decoherence:[x,[x,rho]]"]
    if with_cross_term:
        tags.append("cross:[x,[p,rho]]")
    return tuple(tags)
