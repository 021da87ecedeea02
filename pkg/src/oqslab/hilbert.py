"""Finite-dimensional single-particle spaces and composite-system helpers.

Two truncation schemes are supported:

* ``fock``: harmonic-oscillator ladder basis with a reference frequency.
  The commutator [x, p] equals i*hbar*(1 - dim|dim-1><dim-1|) exactly, so
  canonical behaviour holds on the span of the lowest dim-2 states.
* ``grid``: uniform position grid x_k = -extent + k*dx, dx = 2*extent/dim,
  with the momentum operator built spectrally (DFT). Canonical behaviour
  holds in action on states supported away from the grid edges.

Density matrices are validated for Hermiticity and unit trace at
construction; positivity is monitored (reported), never clipped.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

HERM_TOL_OP = 1e-12     # operator Hermiticity
HERM_TOL_RHO = 1e-10    # density-matrix Hermiticity
TRACE_TOL = 1e-10
POSITIVITY_FLOOR = -1e-8   # monitored, not enforced


@dataclass(frozen=True)
class SpaceSpec:
    """Description of one truncated single-particle space.

    Parameters
    ----------
    kind : {'fock', 'grid'}
    dim : int, >= 2
    mass : float, > 0
    omega_ref : float, > 0, required for kind='fock'
    grid_extent : float, > 0, required for kind='grid'
    hbar : float, > 0
    """

    kind: str
    dim: int
    mass: float = 1.0
    omega_ref: float | None = None
    grid_extent: float | None = None
    hbar: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fock", "grid"):
            raise InvalidParameterError(f"unknown space kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidParameterError("dim must be an integer >= 2")
        if self.mass <= 0 or self.hbar <= 0:
            raise InvalidParameterError("mass and hbar must be positive")
        if self.kind == "fock":
            if self.omega_ref is None or self.omega_ref <= 0:
                raise InvalidParameterError("fock space needs omega_ref > 0")
        else:
            if self.grid_extent is None or self.grid_extent <= 0:
                raise InvalidParameterError("grid space needs grid_extent > 0")

    @property
    def dx(self):
        if self.kind != "grid":
            raise InvalidParameterError("dx is defined for grid spaces only")
        return 2.0 * self.grid_extent / self.dim

    def grid_points(self):
        if self.kind != "grid":
            raise InvalidParameterError("grid_points on a non-grid space")
        return -self.grid_extent + self.dx * np.arange(self.dim)


@dataclass(frozen=True)
class OperatorSet:
    """Position, momentum and identity matrices on one space."""

    x: np.ndarray
    p: np.ndarray
    id: np.ndarray
    space: SpaceSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        for name, op in (("x", self.x), ("p", self.p)):
            if herm_defect(op) > HERM_TOL_OP:
                raise InvalidParameterError(
                    f"operator {name} is not Hermitian within {HERM_TOL_OP}")


def herm_defect(a):
    """Max-entry deviation of a from its own adjoint."""
    return float(np.abs(a - a.conj().T).max())


def make_operator_set(spec: SpaceSpec) -> OperatorSet:
    """Build (x, p, id) for a space.

    fock: x = sqrt(hbar/2m*omega) (a + a+), p = i sqrt(hbar m omega/2)(a+ - a).
    grid: x diagonal on the grid, p = F+ diag(hbar k) F (unitary DFT).
    """
    n = spec.dim
    if spec.kind == "fock":
        low = np.diag(np.sqrt(np.arange(1, n)), 1)  # annihilation
        raise_ = low.conj().T
        xs = np.sqrt(spec.hbar / (2 * spec.mass * spec.omega_ref))
        ps = np.sqrt(spec.hbar * spec.mass * spec.omega_ref / 2)
        x = xs * (low + raise_)
        p = 1j * ps * (raise_ - low)
    else:
        x = np.diag(spec.grid_points().astype(complex))
        k = 2 * np.pi * np.fft.fftfreq(n, d=spec.dx)
        F = np.fft.fft(np.eye(n), axis=0, norm="ortho")
        p = F.conj().T @ (spec.hbar * k[:, None] * F)
        p = 0.5 * (p + p.conj().T)  # scrub rounding asymmetry
    return OperatorSet(x=x.astype(complex), p=p.astype(complex),
                       id=np.eye(n, dtype=complex), space=spec)


def momentum_representation(ops: OperatorSet) -> OperatorSet:
    """Reinterpret a grid operator set with the roles of x and p swapped.

    For a grid space read as a momentum grid, p is diagonal (the grid
    points) and x acts as +i*hbar * d/dp, i.e. minus the spectral matrix:
    [x, p] = [-P_spec, X_diag] = +i*hbar on interior states.
    """
    return OperatorSet(x=-ops.p, p=ops.x, id=ops.id, space=ops.space)


@dataclass
class DensityMatrix:
    """A density matrix together with its subsystem dimensions.

    ``dims`` is a tuple of the tensor factors' dimensions; a single-particle
    state has dims=(n,). Hermiticity and unit trace are enforced at
    construction; the minimum eigenvalue is available for monitoring and is
    deliberately never clipped.
    """

    data: np.ndarray
    dims: tuple

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        self.dims = tuple(int(d) for d in self.dims)
        n = int(np.prod(self.dims))
        if self.data.shape != (n, n):
            raise InvalidParameterError(
                f"shape {self.data.shape} does not match dims {self.dims}")
        if herm_defect(self.data) > HERM_TOL_RHO:
            raise InvalidParameterError(
                f"density matrix not Hermitian within {HERM_TOL_RHO}")
        tr = complex(np.trace(self.data))
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidParameterError(
                f"trace {tr} differs from 1 beyond {TRACE_TOL}")

    @classmethod
    def from_wavefunction(cls, psi, dims):
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), tuple(dims))

    def purity(self):
        return float(np.real(np.vdot(self.data, self.data)))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.data)[0])

    def positivity_report(self):
        """Monitored positivity: (min eigenvalue, below-floor flag)."""
        m = self.min_eigenvalue()
        return m, m < POSITIVITY_FLOOR


def tensor(a, b):
    """Kronecker product; subsystem 1 varies slowly (kron convention)."""
    return np.kron(a, b)


def lift_first(op, n2):
    """op acting on subsystem 1 of a two-particle space."""
    return np.kron(op, np.eye(n2, dtype=complex))


def lift_second(op, n1):
    """op acting on subsystem 2 of a two-particle space."""
    return np.kron(np.eye(n1, dtype=complex), op)


def partial_trace_second(rho: DensityMatrix) -> DensityMatrix:
    """Trace out the second tensor factor of a bipartite state."""
    if len(rho.dims) != 2:
        raise InvalidParameterError("partial_trace_second needs dims=(n1, n2)")
    n1, n2 = rho.dims
    red = rho.data.reshape(n1, n2, n1, n2)
    return DensityMatrix(np.einsum("ijkj->ik", red), (n1,))


def partial_trace_second_data(rho_data, n1, n2):
    """Raw-array variant of partial_trace_second (no validation)."""
    return np.einsum("ijkj->ik", rho_data.reshape(n1, n2, n1, n2))


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def expectation(op, rho):
    """<op> = Tr(op rho) for Hermitian op; returns the real part."""
    r = rho.data if isinstance(rho, DensityMatrix) else rho
    return float(np.einsum("ij,ji->", op, r).real)


def variance(op, rho):
    m = expectation(op, rho)
    return expectation(op @ op, rho) - m * m


def evolve_unitary(rho: DensityMatrix, H, t, hbar=1.0) -> DensityMatrix:
    """Exact evolution rho -> U rho U+ with U = exp(-i H t / hbar).

    H must be Hermitian within 1e-10 (max entry); evolution goes through a
    full eigendecomposition, so repeated times with the same H should reuse
    ``UnitaryPropagator`` instead.
    """
    return UnitaryPropagator(H, hbar).evolve(rho, t)


class UnitaryPropagator:
    """Eigendecomposition of a Hamiltonian, reusable for many times/states."""

    def __init__(self, H, hbar=1.0):
        H = np.asarray(H, dtype=complex)
        if herm_defect(H) > 1e-10:
            raise InvalidParameterError(
                "Hamiltonian is not Hermitian within 1e-10")
        self.hbar = float(hbar)
        self.evals, self.evecs = np.linalg.eigh(H)

    def unitary(self, t):
        phase = np.exp(-1j * self.evals * t / self.hbar)
        return (self.evecs * phase) @ self.evecs.conj().T

    def evolve(self, rho: DensityMatrix, t) -> DensityMatrix:
        return DensityMatrix(self.evolve_raw(rho.data, t), rho.dims)

    def evolve_raw(self, rho, t):
        """U rho U+ on a raw array, reusing the stored eigenbasis."""
        phase = np.exp(-1j * self.evals * t / self.hbar)
        B = self.evecs.conj().T @ rho @ self.evecs
        return (self.evecs * phase) @ B @ (self.evecs * phase).conj().T

    def evolve_vector(self, psi, t):
        amps = self.evecs.conj().T @ psi
        return self.evecs @ (np.exp(-1j * self.evals * t / self.hbar) * amps)


def interior_projector(spec: SpaceSpec):
    """Projector onto the subspace where canonical behaviour is exact.

    fock: drops the top two ladder states (the commutator defect lives in
    the highest state). grid: identity -- canonical checks on grids are done
    in action on interior-supported probe states, not entrywise.
    """
    d = np.ones(spec.dim)
    if spec.kind == "fock":
        d[-2:] = 0.0
    return np.diag(d.astype(complex))


def gaussian_wavefunction(spec: SpaceSpec, x0=0.0, p0=0.0, sigma=1.0):
    """Normalized Gaussian on a grid space: exp(-(x-x0)^2/4 sigma^2 + i p0 x/hbar)."""
    if spec.kind != "grid":
        raise InvalidParameterError("gaussian_wavefunction needs a grid space")
    xg = spec.grid_points()
    psi = np.exp(-((xg - x0) ** 2) / (4.0 * sigma**2)
                 + 1j * p0 * xg / spec.hbar)
    return psi / np.linalg.norm(psi)


def gaussian_density_matrix(spec: SpaceSpec, mean, cov):
    """General (possibly mixed) Gaussian state on a grid space.

    mean = (<x>, <p>); cov = [[var_x, c], [c, var_p]] symmetric-ordered.
    Built from the standard position-representation kernel of a Gaussian
    Wigner function; normalized on the grid.
    """
    if spec.kind != "grid":
        raise InvalidParameterError("gaussian_density_matrix needs a grid space")
    xbar, pbar = mean
    a = cov[0][0]
    c = cov[0][1]
    b = cov[1][1]
    if a <= 0 or b <= 0:
        raise InvalidParameterError("variances must be positive")
    het = b - c * c / a   # conditional momentum variance
    min_unc = (spec.hbar / 2) ** 2 + (c) ** 2  # (hbar/2)^2 + (sym/2)^2 with sym=2c
    if a * b + 1e-12 * max(1.0, a * b) < (spec.hbar / 2) ** 2 + c**2:
        raise InvalidParameterError(
            f"covariance violates the uncertainty bound: var_x*var_p = {a*b}"
            f" < (hbar/2)^2 + c^2 = {min_unc}")
    xg = spec.grid_points()
    X = xg[:, None]
    Xp = xg[None, :]
    u = 0.5 * (X + Xp)
    v = X - Xp
    rho = np.exp(-((u - xbar) ** 2) / (2 * a)
                 - het * v**2 / (2 * spec.hbar**2)
                 + 1j * (pbar + (c / a) * (u - xbar)) * v / spec.hbar)
    rho *= spec.dx / np.sqrt(2 * np.pi * a)
    rho /= np.trace(rho).real
    return DensityMatrix(rho, (spec.dim,))


def ccr_defect(ops: OperatorSet, probes=None):
    """Canonical-commutator defect of an operator set.

    fock: max entry of the interior-projected [x,p] - i*hbar (exact check).
    grid: max over probe states psi of ||([x,p] - i*hbar) psi|| / (hbar ||psi||);
    default probes are centered Gaussians at a few widths. The grid statement
    needs real interior support: the position sawtooth's wrap-around jump
    amplifies edge tails by ~dim*pi/dx, so probes keep >= 10 sigma padding.
    """
    spec = ops.space
    hbar = spec.hbar if spec is not None else 1.0
    comm = commutator(ops.x, ops.p)
    if spec is not None and spec.kind == "fock":
        P = interior_projector(spec)
        return float(np.abs(P @ (comm - 1j * hbar * ops.id) @ P).max()) / hbar
    if probes is None:
        ext = spec.grid_extent
        probes = [gaussian_wavefunction(spec, sigma=s * ext)
                  for s in (0.05, 0.08, 0.10)]
    worst = 0.0
    for psi in probes:
        d = np.linalg.norm((comm - 1j * hbar * ops.id) @ psi)
        worst = max(worst, d / (hbar * np.linalg.norm(psi)))
    return worst
