"""Independent exact solutions for the coupled pair.

Everything here is derived from the *composite* dynamics, with no input
from the reduced master equations, so it can arbitrate them:

* Heisenberg drift matrices. Both pictures have quadratic Hamiltonians,
  so the Heisenberg equations for (x1, p1, x2, p2) are linear and the
  first and second moments close on themselves. Gaussian states stay
  Gaussian, mean' = A mean, cov' = A cov + cov A^T, solved exactly with
  a matrix exponential.
* Dense evolution. One eigendecomposition of the composite Hamiltonian
  gives the reduced state at any time by partial trace; a rank-1 fast
  path covers pure initial states.
* Trace distance between density matrices, the comparison metric used to
  decide how far a master-equation solution sits from the exact reduced
  state.
* Ehrenfest moment flows of the two reduced master equations themselves
  (means and 2x2 covariance of particle 1). These close exactly because
  both generators are quadratic; they are the cheap cross-check for the
  dense integrations.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import InvalidParameterError
from .hilbert import (DensityMatrix, SpaceSpec, UnitaryPropagator,
                      partial_trace_second_data)
from .toymodel import (EnvStats, InitialStateSpec, ToyParams, hamiltonian_L,
                       hamiltonian_Lprime, build_initial_state,
                       build_initial_wavefunction, lprime_coefficient)
from .hilbert import make_operator_set

_SYMPLECTIC_4 = np.array([[0.0, 1.0, 0.0, 0.0],
                          [-1.0, 0.0, 0.0, 0.0],
                          [0.0, 0.0, 0.0, 1.0],
                          [0.0, 0.0, -1.0, 0.0]])


@dataclass(frozen=True)
class PairMoments:
    """First and second moments of the pair, ordered (x1, p1, x2, p2).

    cov is the symmetrized covariance matrix. Physicality (cov + i hbar
    Omega / 2 >= 0) is monitored via quantum_defect(), never enforced, so
    downstream code can decide what to do with marginal states.
    """

    mean: np.ndarray
    cov: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (4,) or cov.shape != (4, 4):
            raise InvalidParameterError("mean must be (4,), cov (4, 4)")
        if np.abs(cov - cov.T).max() > 1e-10 * max(1.0, np.abs(cov).max()):
            raise InvalidParameterError("cov must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    def quantum_defect(self):
        """Most negative eigenvalue of cov + i hbar Omega/2 (>= ~0 if
        physical)."""
        m = self.cov + 0.5j * self.hbar * _SYMPLECTIC_4
        return float(np.linalg.eigvalsh(m).min())

    def particle1(self):
        """(mean, cov) of the first particle's marginal."""
        return self.mean[:2].copy(), self.cov[:2, :2].copy()

    def particle2(self):
        return self.mean[2:].copy(), self.cov[2:, 2:].copy()


def moments_from_initial_state(istate: InitialStateSpec,
                               params: ToyParams) -> PairMoments:
    """Moments of the factorized initial state (cat states not supported:
    they are not Gaussian)."""
    if istate.cat_dx is not None:
        raise InvalidParameterError("cat states have no Gaussian moments")
    env = istate.env
    var_x1 = istate.width1**2
    var_p1 = params.hbar**2 / (4 * var_x1)
    mean = np.array([istate.mean1_x, istate.mean1_p, 0.0, 0.0])
    cov = np.diag([var_x1, var_p1, env.var_x2, env.var_p2])
    cov[2, 3] = cov[3, 2] = env.sym_xp / 2
    if istate.transformed:
        # conjugating the state by exp(s i g x1 x2 / hbar) shifts the
        # momentum moments: p1 -> p1 + s g x2, p2 -> p2 + s g x1,
        # positions untouched
        s = istate.transform_sign
        S = np.eye(4)
        S[1, 2] = s * params.g
        S[3, 0] = s * params.g
        mean = S @ mean
        cov = S @ cov @ S.T
    return PairMoments(mean, cov, params.hbar)


def heisenberg_drift_L(params: ToyParams):
    """A with d<r>/dt = A <r> for r = (x1, p1, x2, p2) in the L picture."""
    g, m1, m2 = params.g, params.m1, params.m2
    return np.array([
        [0.0, 1.0 / m1, 0.0, 0.0],
        [-g**2 / m2, 0.0, 0.0, g / m2],
        [-g / m2, 0.0, 0.0, 1.0 / m2],
        [0.0, 0.0, 0.0, 0.0]])


def heisenberg_drift_Lprime(params: ToyParams):
    """Drift in the primed picture; the primed momentum p1 is conserved."""
    g, m1, m2 = params.g, params.m1, params.m2
    return np.array([
        [0.0, 1.0 / m1, g / m1, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0 / m2],
        [0.0, -g / m1, -g**2 / m1, 0.0]])


def evolve_moments(moments: PairMoments, drift, t) -> PairMoments:
    """Exact propagation of Gaussian moments under a linear drift."""
    S = expm(np.asarray(drift) * float(t))
    return PairMoments(S @ moments.mean, S @ moments.cov @ S.T, moments.hbar)


# ----------------------------------------------------------- dense evolution

class ExactReducedEvolution:
    """Reduced state of particle 1 from dense composite diagonalization.

    One eigh of the composite Hamiltonian up front; each requested time
    is then a phase rotation plus partial trace. Pure initial states use
    a rank-1 path (reshape + one small GEMM per time) which is what makes
    mid-size composites practical.
    """

    def __init__(self, spec1: SpaceSpec, spec2: SpaceSpec,
                 istate: InitialStateSpec, params: ToyParams, picture: str):
        if picture not in ("L", "Lprime"):
            raise InvalidParameterError(f"unknown picture {picture!r}")
        self.spec1, self.spec2 = spec1, spec2
        self.n1, self.n2 = spec1.dim, spec2.dim
        ops1 = make_operator_set(spec1)
        ops2 = make_operator_set(spec2)
        build = hamiltonian_L if picture == "L" else hamiltonian_Lprime
        H = build(ops1, ops2, params)
        self._prop = UnitaryPropagator(H, hbar=params.hbar)
        self._pure = istate.env.is_pure()
        if self._pure:
            self._psi0 = build_initial_wavefunction(spec1, spec2, istate,
                                                    params)
        else:
            self._rho0 = build_initial_state(spec1, spec2, istate,
                                             params).data

    def reduced_at(self, t) -> DensityMatrix:
        if self._pure:
            psi = self._prop.evolve_vector(self._psi0, t)
            M = psi.reshape(self.n1, self.n2)
            rho1 = M @ M.conj().T
            rho1 = 0.5 * (rho1 + rho1.conj().T)
            return DensityMatrix(rho1, (self.n1,))
        rho = self._prop.evolve_raw(self._rho0, t)
        rho1 = partial_trace_second_data(rho, self.n1, self.n2)
        return DensityMatrix(0.5 * (rho1 + rho1.conj().T), (self.n1,))


def trace_distance(a, b):
    """(1/2) || a - b ||_1 for Hermitian matrices (or DensityMatrix)."""
    da = a.data if isinstance(a, DensityMatrix) else np.asarray(a)
    db = b.data if isinstance(b, DensityMatrix) else np.asarray(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(da - db)).sum())


# ------------------------------------------- reduced master-equation moments

def master_moment_rhs_L(t, m, params: ToyParams, env: EnvStats):
    """Ehrenfest flow (x, p, var_x, cov_xp, var_p) of the L-picture master
    equation. The double commutators feed the variances: t [x,[x,.]] pumps
    var_p at rate 2 hbar^2 K t, and the t^2 [x,[p,.]] cross term adds
    hbar^2 K t^2 / m1 to var_x's source."""
    g, m1, m2, hbar = params.g, params.m1, params.m2, params.hbar
    K = g**2 * env.var_p2 / (hbar**2 * m2**2)
    w2 = g**2 / (m1 * m2)
    x, p, vx, c, vp = m
    return np.array([
        p / m1,
        -m1 * w2 * x,
        2 * c / m1,
        vp / m1 - m1 * w2 * vx + hbar**2 * K * t**2 / (2 * m1),
        -2 * m1 * w2 * c + 2 * hbar**2 * K * t])


def master_moment_rhs_Lprime(t, m, params: ToyParams, env: EnvStats):
    """Ehrenfest flow of the primed-picture master equation: momentum
    moments frozen, var_x driven by 2 hbar^2 Kp(t)."""
    m1 = params.m1
    mu = (1.0 - params.g**2 * t**2 / (2 * params.m1 * params.m2)) / m1
    x, p, vx, c, vp = m
    kp = lprime_coefficient(t, params, env)
    return np.array([mu * p, 0.0,
                     2 * mu * c + 2 * params.hbar**2 * kp,
                     mu * vp, 0.0])


def integrate_master_moments(rhs, m0, t1, n_steps, params: ToyParams,
                             env: EnvStats):
    """RK4 for the 5-component reduced moment flows (cheap, exact family)."""
    m = np.asarray(m0, dtype=float).copy()
    h = t1 / n_steps
    for k in range(n_steps):
        t = k * h
        k1 = rhs(t, m, params, env)
        k2 = rhs(t + h / 2, m + h / 2 * k1, params, env)
        k3 = rhs(t + h / 2, m + h / 2 * k2, params, env)
        k4 = rhs(t + h, m + h * k3, params, env)
        m = m + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return m
