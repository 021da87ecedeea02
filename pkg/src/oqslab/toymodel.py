"""Two bilinearly coupled particles: two pictures, two master equations.

The pair is described either by a Hamiltonian containing a velocity-type
coupling (the ``L`` picture, H = p1^2/2m1 + g^2 x1^2/2m2 + p2^2/2m2
- g x1 p2 / m2) or, after dropping a total time derivative from the
Lagrangian, by a position-momentum coupling in the other slot (the ``L'``
picture, H' = p1^2/2m1 + p2^2/2m2 + g^2 x2^2/2m1 + g x2 p1 / m1). The two
pictures are connected by the unitary T = exp(-i g x1 x2 / hbar):
H' = T H T+ exactly.

Tracing out particle 2 at second order in g gives *different* reduced
dynamics in the two pictures:

* L picture: position-basis localization of particle 1, with a secular
  double commutator -K (t [x,[x,rho]] - t^2/(2 m1) [x,[p,rho]]),
  K = g^2 <p2^2>_i / (hbar^2 m2^2).
* L' picture: momentum-basis localization, -Kp(t) [p,[p,rho]] with a
  cubic-in-t coefficient built from the initial moments of particle 2,
  plus a slowly shrinking effective kinetic term
  (1 - g^2 t^2 / 2 m1 m2) p^2/2m1.

Both generators are exact consequences of second-order perturbation
theory with a factorized initial state; they are inequivalent because the
factorized states of the two pictures are physically different states.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .hilbert import (DensityMatrix, OperatorSet, SpaceSpec, commutator,
                      gaussian_wavefunction, lift_first, lift_second, tensor)

PERTURBATIVE_ADVISORY = 0.5   # g^2 t^2/(m1 m2) beyond this is advisory-flagged


@dataclass(frozen=True)
class ToyParams:
    m1: float = 1.0
    m2: float = 1.0
    g: float = 0.1
    hbar: float = 1.0

    def __post_init__(self):
        if self.m1 <= 0 or self.m2 <= 0 or self.hbar <= 0:
            raise InvalidParameterError("masses and hbar must be positive")

    @property
    def omega(self):
        """Effective trap frequency of particle 1 in the L picture."""
        return abs(self.g) / np.sqrt(self.m1 * self.m2)

    def secular_parameter(self, t):
        return self.g**2 * t**2 / (self.m1 * self.m2)

    def is_perturbative(self, t):
        return self.secular_parameter(t) <= PERTURBATIVE_ADVISORY


@dataclass(frozen=True)
class EnvStats:
    """Initial second moments of particle 2 (the traced-out partner).

    Defaults are the symmetric minimum-uncertainty choice hbar/2 for both
    variances. sym_xp is the symmetrized covariance <{x2,p2}>/2... times 2:
    the full anticommutator average <{x2, p2}>.
    """

    var_p2: float | None = None
    var_x2: float | None = None
    sym_xp: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.var_p2 is None:
            object.__setattr__(self, "var_p2", self.hbar / 2)
        if self.var_x2 is None:
            object.__setattr__(self, "var_x2", self.hbar / 2)
        if self.var_p2 <= 0 or self.var_x2 <= 0:
            raise InvalidParameterError("second moments must be positive")
        bound = (self.hbar / 2) ** 2 + (self.sym_xp / 2) ** 2
        if self.var_p2 * self.var_x2 + 1e-12 * bound < bound:
            raise InvalidParameterError(
                f"var_p2*var_x2 = {self.var_p2 * self.var_x2} violates the "
                f"uncertainty bound {bound}")

    def is_pure(self, tol=1e-10):
        bound = (self.hbar / 2) ** 2 + (self.sym_xp / 2) ** 2
        return abs(self.var_p2 * self.var_x2 - bound) <= tol * max(bound, 1.0)


@dataclass(frozen=True)
class InitialStateSpec:
    """Initial product state: Gaussian (or cat) particle 1 x Gaussian env.

    width1 is the position standard deviation of each particle-1 packet.
    cat_dx, when set, splits particle 1 into an equal-weight superposition
    of packets at mean1_x -+ cat_dx/2 (numerically normalized).
    transformed=True maps the factorized state into the other picture by
    conjugating with exp(transform_sign * i g x1 x2 / hbar); +1 is the
    choice under which L-picture dynamics of the transformed state
    reproduces the primed-picture means.
    """

    mean1_x: float = 0.0
    mean1_p: float = 0.0
    width1: float = 1.0
    env: EnvStats = field(default_factory=EnvStats)
    transformed: bool = False
    transform_sign: int = +1
    cat_dx: float | None = None

    def __post_init__(self):
        if self.width1 <= 0:
            raise InvalidParameterError("width1 must be positive")
        if self.transform_sign not in (+1, -1):
            raise InvalidParameterError("transform_sign must be +1 or -1")
        if self.cat_dx is not None and self.cat_dx <= 0:
            raise InvalidParameterError("cat_dx must be positive")


# ---------------------------------------------------------------- composite

def hamiltonian_L(ops1: OperatorSet, ops2: OperatorSet, params: ToyParams):
    """Velocity-coupling picture Hamiltonian on the composite space."""
    n1, n2 = ops1.x.shape[0], ops2.x.shape[0]
    H = lift_first(ops1.p @ ops1.p, n2) / (2 * params.m1)
    H += params.g**2 * lift_first(ops1.x @ ops1.x, n2) / (2 * params.m2)
    H += lift_second(ops2.p @ ops2.p, n1) / (2 * params.m2)
    H -= params.g * tensor(ops1.x, ops2.p) / params.m2
    return H


def hamiltonian_Lprime(ops1: OperatorSet, ops2: OperatorSet, params: ToyParams):
    """Position-momentum-coupling picture Hamiltonian (primed picture)."""
    n1, n2 = ops1.x.shape[0], ops2.x.shape[0]
    H = lift_first(ops1.p @ ops1.p, n2) / (2 * params.m1)
    H += lift_second(ops2.p @ ops2.p, n1) / (2 * params.m2)
    H += params.g**2 * lift_second(ops2.x @ ops2.x, n1) / (2 * params.m1)
    H += params.g * tensor(ops1.p, ops2.x) / params.m1
    return H


def unitary_T(ops1: OperatorSet, ops2: OperatorSet, params: ToyParams):
    """T = exp(-i g x1 (x) x2 / hbar); satisfies H' = T H T+ exactly.

    Built factor-wise from the eigendecompositions of x1 and x2, which for
    grid spaces reduces to a diagonal phase.
    """
    l1, V1 = np.linalg.eigh(ops1.x)
    l2, V2 = np.linalg.eigh(ops2.x)
    phases = np.exp(-1j * params.g * np.outer(l1, l2).ravel() / params.hbar)
    V = tensor(V1, V2)
    return (V * phases) @ V.conj().T


# ------------------------------------------------------------- master parts

def _as_array(rho):
    return rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)


def master_rhs_L(rho, t, ops1: OperatorSet, params: ToyParams, env: EnvStats):
    """Reduced generator of particle 1 in the L picture at time t.

    -(i/hbar)[p^2/2m1 + g^2 x^2/2m2, rho]
    - K (t [x,[x,rho]] - t^2/(2 m1) [x,[p,rho]]),  K = g^2 var_p2/(hbar m2)^2.

    Trace-free and Hermiticity-preserving term by term. t must be >= 0.
    """
    if t < 0:
        raise InvalidParameterError("master equations are derived for t >= 0")
    r = _as_array(rho)
    x, p = ops1.x, ops1.p
    H = p @ p / (2 * params.m1) + params.g**2 * (x @ x) / (2 * params.m2)
    K = params.g**2 * env.var_p2 / (params.hbar**2 * params.m2**2)
    out = -1j / params.hbar * commutator(H, r)
    out -= K * t * commutator(x, commutator(x, r))
    out += K * t**2 / (2 * params.m1) * commutator(x, commutator(p, r))
    return out


def lprime_coefficient(t, params: ToyParams, env: EnvStats):
    """Cubic-in-t momentum-localization coefficient of the primed picture."""
    g, m1, m2 = params.g, params.m1, params.m2
    return g**2 / (params.hbar**2 * m1**2) * (
        t * env.var_x2 + t**3 * env.var_p2 / (2 * m2**2)
        + 3 * t**2 * env.sym_xp / (4 * m2))


def master_rhs_Lprime(rho, t, ops1: OperatorSet, params: ToyParams,
                      env: EnvStats):
    """Reduced generator of particle 1 in the primed picture at time t.

    -(i/hbar)(1 - g^2 t^2/2 m1 m2)[p^2/2m1, rho] - Kp(t)[p,[p,rho]], with
    Kp(t) = (g^2/hbar^2 m1^2)(t var_x2 + t^3 var_p2/2m2^2 + 3t^2 sym_xp/4m2).
    """
    if t < 0:
        raise InvalidParameterError("master equations are derived for t >= 0")
    r = _as_array(rho)
    p = ops1.p
    mu = (1.0 - params.g**2 * t**2 / (2 * params.m1 * params.m2))
    out = -1j / params.hbar * mu / (2 * params.m1) * commutator(p @ p, r)
    out -= lprime_coefficient(t, params, env) * commutator(p, commutator(p, r))
    return out


def _diag_of(M, tol=1e-14):
    """Real diagonal of M if M is (numerically) real-diagonal, else None."""
    d = np.diagonal(M)
    off = M - np.diag(d)
    scale = max(1.0, float(np.abs(d).max()))
    if np.abs(off).max() <= tol * scale and np.abs(d.imag).max() <= tol * scale:
        return d.real.copy()
    return None


def l_generator(ops1: OperatorSet, params: ToyParams, env: EnvStats):
    """rhs(t, rho) for the L-picture master equation, with a fast
    elementwise path when x is diagonal (position grids)."""
    x, p = ops1.x, ops1.p
    hbar, m1, m2, g = params.hbar, params.m1, params.m2, params.g
    H = p @ p / (2 * m1) + g**2 * (x @ x) / (2 * m2)
    K = g**2 * env.var_p2 / (hbar**2 * m2**2)
    xd = _diag_of(x)
    if xd is None:
        def rhs(t, r):
            out = -1j / hbar * (H @ r - r @ H)
            out -= K * t * commutator(x, commutator(x, r))
            out += K * t**2 / (2 * m1) * commutator(x, commutator(p, r))
            return out
        return rhs
    dx2 = (xd[:, None] - xd[None, :]) ** 2

    def rhs(t, r):
        out = -1j / hbar * (H @ r - r @ H)
        out -= (K * t) * dx2 * r
        C = p @ r - r @ p
        out += (K * t**2 / (2 * m1)) * (xd[:, None] * C - C * xd[None, :])
        return out
    return rhs


def lprime_generator(ops1: OperatorSet, params: ToyParams, env: EnvStats):
    """rhs(t, rho) for the primed-picture master equation, elementwise when
    p is diagonal (momentum representation)."""
    p = ops1.p
    hbar, m1, m2 = params.hbar, params.m1, params.m2
    g = params.g
    pd = _diag_of(p)
    if pd is None:
        P2 = p @ p

        def rhs(t, r):
            mu = 1.0 - g**2 * t**2 / (2 * m1 * m2)
            out = -1j / hbar * mu / (2 * m1) * (P2 @ r - r @ P2)
            out -= lprime_coefficient(t, params, env) * commutator(
                p, commutator(p, r))
            return out
        return rhs
    e = pd**2 / (2 * m1)
    dE = e[:, None] - e[None, :]
    dp2 = (pd[:, None] - pd[None, :]) ** 2

    def rhs(t, r):
        mu = 1.0 - g**2 * t**2 / (2 * m1 * m2)
        return (-1j / hbar * mu) * dE * r - (
            lprime_coefficient(t, params, env) * dp2) * r
    return rhs


# ------------------------------------------------------------ analytic means

def analytic_means_L(params: ToyParams, x0, p0, t):
    """Exact mean trajectory of particle 1 under the L-picture reduced
    dynamics with an unpolarized environment (<p2>_i = 0): harmonic motion
    at omega = |g|/sqrt(m1 m2), with a clean free-flight g -> 0 limit."""
    w = params.omega
    t = np.asarray(t, dtype=float)
    if w == 0.0:
        return x0 + p0 * t / params.m1, p0 * np.ones_like(t)
    x = x0 * np.cos(w * t) + p0 / (params.m1 * w) * np.sin(w * t)
    p = -params.m1 * w * x0 * np.sin(w * t) + p0 * np.cos(w * t)
    return x, p


def analytic_means_Lprime(params: ToyParams, x0, pprime0, t):
    """Mean trajectory in the primed picture: conserved momentum, cubic x."""
    t = np.asarray(t, dtype=float)
    x = x0 + pprime0 / params.m1 * (
        t - params.g**2 * t**3 / (6 * params.m1 * params.m2))
    return x, pprime0 * np.ones_like(t)


def analytic_means_L_transformed(params: ToyParams, x0, p0, t):
    """Second-order means of the transformed (picture-mapped) state under
    L-picture dynamics; identical to the primed-picture forms."""
    t = np.asarray(t, dtype=float)
    x, _ = analytic_means_Lprime(params, x0, p0, t)
    p = p0 * (1.0 - params.g**2 * t**2 / (2 * params.m1 * params.m2))
    return x, p


# ------------------------------------------------------------ initial states

def _pure_gaussian(spec: SpaceSpec, x0, p0, var_x, cov_xp=0.0):
    """Pure Gaussian wavefunction with given position variance and
    symmetrized covariance (squeezed when cov_xp != 0)."""
    xg = spec.grid_points()
    w = (1.0 - 2j * cov_xp / spec.hbar) / (4.0 * var_x)
    psi = np.exp(-w * (xg - x0) ** 2 + 1j * p0 * xg / spec.hbar)
    return psi / np.linalg.norm(psi)


def particle1_wavefunction(spec1: SpaceSpec, istate: InitialStateSpec):
    """Particle-1 packet (or two-packet cat) on its grid."""
    if istate.cat_dx is None:
        return _pure_gaussian(spec1, istate.mean1_x, istate.mean1_p,
                              istate.width1**2)
    plus = _pure_gaussian(spec1, istate.mean1_x + istate.cat_dx / 2,
                          istate.mean1_p, istate.width1**2)
    minus = _pure_gaussian(spec1, istate.mean1_x - istate.cat_dx / 2,
                           istate.mean1_p, istate.width1**2)
    psi = plus + minus
    return psi / np.linalg.norm(psi)


def env_wavefunction(spec2: SpaceSpec, env: EnvStats):
    """Pure environment Gaussian; requires env.is_pure()."""
    if not env.is_pure():
        raise InvalidParameterError(
            "environment moments describe a mixed state; use "
            "build_initial_state instead")
    return _pure_gaussian(spec2, 0.0, 0.0, env.var_x2, env.sym_xp / 2)


def transform_phase(spec1: SpaceSpec, spec2: SpaceSpec,
                    params: ToyParams, sign=+1):
    """Diagonal of exp(sign * i g x1 x2 / hbar) on the composite grid."""
    x1 = spec1.grid_points()
    x2 = spec2.grid_points()
    return np.exp(sign * 1j * params.g * np.outer(x1, x2).ravel()
                  / params.hbar)


def build_initial_wavefunction(spec1: SpaceSpec, spec2: SpaceSpec,
                               istate: InitialStateSpec, params: ToyParams):
    """Composite pure initial state as a vector (requires a pure env)."""
    psi = np.kron(particle1_wavefunction(spec1, istate),
                  env_wavefunction(spec2, istate.env))
    if istate.transformed:
        psi = transform_phase(spec1, spec2, params,
                              istate.transform_sign) * psi
    return psi


def build_initial_state(spec1: SpaceSpec, spec2: SpaceSpec,
                        istate: InitialStateSpec,
                        params: ToyParams) -> DensityMatrix:
    """Composite initial state; mixed environments are built from their
    Gaussian moments."""
    from .hilbert import gaussian_density_matrix
    n1, n2 = spec1.dim, spec2.dim
    if istate.env.is_pure():
        psi = build_initial_wavefunction(spec1, spec2, istate, params)
        return DensityMatrix.from_wavefunction(psi, (n1, n2))
    psi1 = particle1_wavefunction(spec1, istate)
    rho1 = np.outer(psi1, psi1.conj())
    env = istate.env
    rho2 = gaussian_density_matrix(
        spec2, (0.0, 0.0),
        [[env.var_x2, env.sym_xp / 2], [env.sym_xp / 2, env.var_p2]]).data
    rho = tensor(rho1, rho2)
    if istate.transformed:
        ph = transform_phase(spec1, spec2, params, istate.transform_sign)
        rho = (ph[:, None] * rho) * ph.conj()[None, :]
    return DensityMatrix(rho, (n1, n2))


# ----------------------------------------------------- structural diagnostics

def transformation_consistency(ops1: OperatorSet, ops2: OperatorSet,
                               params: ToyParams, probes=None):
    """Relative defect of H' = T H T+ in action on interior probe states.

    Entrywise comparison is meaningless on grids (the transformer phase is
    not periodic, so wrap-around rows disagree at O(1) regardless of dim);
    interior-supported states are where the identity holds. Default probe
    widths are clamped between ~1.6 grid spacings (below that the packet
    is unresolved and the spectral kinetic terms degrade) and ~1/12 of the
    extent (above that the wrap-around tail dominates).
    """
    H = hamiltonian_L(ops1, ops2, params)
    Hp = hamiltonian_Lprime(ops1, ops2, params)
    T = unitary_T(ops1, ops2, params)
    M = T @ H @ T.conj().T - Hp
    if probes is None:
        s1, s2 = ops1.space, ops2.space

        def clamp(spec, scale):
            return max(1.6 * spec.dx, scale * spec.grid_extent / 12.0)

        probes = []
        for f1, f2 in ((1.0, 1.0), (1.15, 0.85)):
            psi = np.kron(
                gaussian_wavefunction(s1, sigma=clamp(s1, f1)),
                gaussian_wavefunction(s2, sigma=clamp(s2, f2)))
            probes.append(psi)
    worst = 0.0
    for psi in probes:
        num = np.linalg.norm(M @ psi)
        den = np.linalg.norm(Hp @ psi)
        worst = max(worst, num / den)
    return worst
