import numpy as np
import pytest

from oqslab.errors import InvalidParameterError, RegimeError
from oqslab.evolve import rk4
from oqslab.hilbert import SpaceSpec, anticommutator, expectation, make_operator_set
from oqslab import brem


ALPHA = 1.0 / 137.0


def test_params_validation_and_advisories():
    with pytest.raises(InvalidParameterError):
        brem.BremParams(omega=0.0)
    with pytest.raises(InvalidParameterError):
        brem.BremParams(mass=-1.0)
    assert brem.BremParams(alpha=ALPHA, omega=0.5).advisories() == []
    assert len(brem.BremParams(alpha=ALPHA, omega=2.0).advisories()) == 1


def test_flags_cross_requires_friction():
    with pytest.raises(InvalidParameterError):
        brem.BremFlags(friction=False, cross=True)
    f = brem.BremFlags(friction=False, decoherence=True, cross=False)
    assert not f.friction and f.decoherence


def test_renormalized_frequency():
    p = brem.BremParams(alpha=ALPHA, omega=0.1)
    assert brem.renormalized_frequency(p, 10.0) == pytest.approx(
        0.0984388, rel=1e-5)
    assert brem.renormalized_frequency(p, 0.1) == pytest.approx(
        0.09998450927, rel=1e-9)
    with pytest.raises(RegimeError):
        brem.renormalized_frequency(p, 400.0)   # radicand goes negative
    with pytest.raises(InvalidParameterError):
        brem.renormalized_frequency(p, 0.0)


def test_decoherence_rate_values():
    p1 = brem.BremParams(alpha=ALPHA, omega=1.0)
    assert brem.decoherence_rate(p1, 1.0) == pytest.approx(2.4331e-3,
                                                           rel=1e-4)
    assert brem.decoherence_rate(p1, 1.0) == pytest.approx(ALPHA / 3.0,
                                                           rel=1e-14)
    p2 = brem.BremParams(alpha=ALPHA, omega=0.1)
    assert p2.lambda_tilde == pytest.approx(2.433090024e-6, rel=1e-9)
    assert brem.decoherence_rate(p2, 2.0) == pytest.approx(
        4 * 2.433090024e-6, rel=1e-9)


def test_coefficient_values():
    p = brem.BremParams(alpha=ALPHA, omega=0.1)
    assert p.gamma_p == pytest.approx(4.866180049e-5, rel=1e-9)
    # the cross term's contribution to d<{x,p}>/dt, frozen independently
    assert -2.0 * p.cross_coefficient == pytest.approx(-5.345033054e-5,
                                                       rel=1e-8)


def test_stationary_variances_frozen():
    p = brem.BremParams(alpha=ALPHA, omega=0.1)
    vx, c, vp = brem.stationary_variances(p, brem.BremFlags())
    assert vp == pytest.approx(0.05, rel=1e-12)          # m hbar Omega / 2
    assert c == pytest.approx(0.0, abs=1e-15)
    assert vx == pytest.approx(4.99732748347, rel=1e-10)
    # without the cross term the fixed point is the bare hbar/(2 m Omega)
    vx0, c0, vp0 = brem.stationary_variances(
        p, brem.BremFlags(cross=False))
    assert vx0 == pytest.approx(5.0, rel=1e-12)
    assert vp0 == pytest.approx(0.05, rel=1e-12)
    assert c0 == pytest.approx(0.0, abs=1e-15)
    # pp*/2m = hbar Omega / 4 in both flag settings
    for v in (vp, vp0):
        assert v / (2 * p.mass) == pytest.approx(p.hbar * p.omega / 4,
                                                 rel=1e-12)
    with pytest.raises(RegimeError):
        brem.stationary_variances(
            p, brem.BremFlags(friction=False, cross=False))


def _centered_moments(ops, rho):
    x = expectation(ops.x, rho)
    p = expectation(ops.p, rho)
    return np.array([
        x, p,
        expectation(ops.x @ ops.x, rho) - x * x,
        0.5 * expectation(anticommutator(ops.x, ops.p), rho) - x * p,
        expectation(ops.p @ ops.p, rho) - p * p])


@pytest.mark.parametrize("flags", [
    brem.BremFlags(),
    brem.BremFlags(cross=False),
    brem.BremFlags(friction=False, cross=False),
    brem.BremFlags(friction=True, decoherence=False, cross=True),
])
def test_moment_rhs_consistent_with_master(flags):
    # embed a random low-ladder state in a taller fock space so the
    # truncated commutator defect cannot touch the expectation values
    spec = SpaceSpec("fock", 25, omega_ref=0.3)
    ops = make_operator_set(spec)
    rng = np.random.default_rng(5)
    a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    blk = a @ a.conj().T
    rho = np.zeros((25, 25), dtype=complex)
    rho[:12, :12] = blk / np.trace(blk).real
    pars = brem.BremParams(alpha=ALPHA, omega=0.3)
    G = brem.brem_master_rhs(rho, 0.0, ops, pars, flags)
    x = expectation(ops.x, rho)
    p = expectation(ops.p, rho)
    lhs = np.array([
        expectation(ops.x, G),
        expectation(ops.p, G),
        expectation(ops.x @ ops.x, G) - 2 * x * expectation(ops.x, G),
        0.5 * expectation(anticommutator(ops.x, ops.p), G)
        - x * expectation(ops.p, G) - p * expectation(ops.x, G),
        expectation(ops.p @ ops.p, G) - 2 * p * expectation(ops.p, G)])
    rhs = brem.moment_rhs(0.0, _centered_moments(ops, rho), pars, flags)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_generator_matches_reference():
    spec = SpaceSpec("fock", 18, omega_ref=0.3)
    ops = make_operator_set(spec)
    rng = np.random.default_rng(9)
    a = rng.normal(size=(18, 18)) + 1j * rng.normal(size=(18, 18))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    pars = brem.BremParams(alpha=ALPHA, omega=0.3)
    for flags in (brem.BremFlags(), brem.BremFlags(friction=False,
                                                   cross=False)):
        d1 = brem.brem_generator(ops, pars, flags)(0.0, rho)
        d2 = brem.brem_master_rhs(rho, 0.0, ops, pars, flags)
        assert np.abs(d1 - d2).max() < 1e-15
    with pytest.raises(InvalidParameterError):
        brem.brem_master_rhs(rho, -1.0, ops, pars)


def _fock_cat(dim, beta):
    cs = np.zeros(dim)
    cs[0] = 1.0
    for n in range(1, dim):
        cs[n] = cs[n - 1] * beta / np.sqrt(n)
    plus = cs.copy()
    minus = cs * (-1.0) ** np.arange(dim)
    psi = plus + minus
    return psi / np.linalg.norm(psi)


def test_purity_non_increasing_decoherence_only():
    spec = SpaceSpec("fock", 30, omega_ref=0.3)
    ops = make_operator_set(spec)
    pars = brem.BremParams(alpha=ALPHA, omega=0.3)
    flags = brem.BremFlags(friction=False, cross=False)
    psi = _fock_cat(30, 1.2)
    rho = np.outer(psi, psi.conj()).astype(complex)
    gen = brem.brem_generator(ops, pars, flags)
    # generator-level: d(purity)/dt = 2 Tr(rho G(rho)) <= 0 along the run
    purities = []

    def watch(t, r):
        dp = 2.0 * np.einsum("ij,ji->", r, gen(t, r)).real
        assert dp <= 1e-12
        purities.append(np.einsum("ij,ji->", r, r).real)

    rk4(gen, rho, 0.0, 2.0, 100, observer=watch, observe_stride=10)
    # integrated decay must dominate integrator noise
    assert purities[-1] < purities[0] - 1e-6
    assert all(b <= a + 1e-9 for a, b in zip(purities, purities[1:]))


def test_moment_relaxation_reaches_fixed_point():
    pars = brem.BremParams(alpha=ALPHA, omega=0.1)
    flags = brem.BremFlags()
    target = brem.stationary_variances(pars, flags)
    t_relax = 50.0 / (pars.alpha * pars.hbar * pars.omega**2
                      / (pars.mass * pars.c**2))
    m0 = np.array([2.0, 0.0, 3.0, 0.5, 0.2])
    mt = brem.evolve_brem_moments(m0, t_relax, pars, flags)
    assert np.abs(mt[2:] - target).max() < 1e-6
    assert np.abs(mt[:2]).max() < 1e-6


def test_exact_moment_propagation_matches_rk4():
    pars = brem.BremParams(alpha=ALPHA, omega=0.3)
    flags = brem.BremFlags()
    m0 = np.array([1.0, -0.4, 0.8, 0.1, 0.6])
    exact = brem.evolve_brem_moments(m0, 5.0, pars, flags)
    m = m0.astype(float)
    n, h = 2000, 5.0 / 2000
    for k in range(n):
        t = k * h
        k1 = brem.moment_rhs(t, m, pars, flags)
        k2 = brem.moment_rhs(t + h / 2, m + h / 2 * k1, pars, flags)
        k3 = brem.moment_rhs(t + h / 2, m + h / 2 * k2, pars, flags)
        k4 = brem.moment_rhs(t + h, m + h * k3, pars, flags)
        m = m + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert np.abs(exact - m).max() < 1e-9
    with pytest.raises(InvalidParameterError):
        brem.evolve_brem_moments(np.zeros(3), 1.0, pars, flags)


def test_structure_matches_quantum_brownian_motion():
    assert brem.term_structure() == brem.caldeira_leggett_structure()
    assert brem.term_structure(
        brem.BremFlags(cross=False)) == brem.caldeira_leggett_structure(
        with_cross_term=False)
    dec_only = brem.term_structure(
        brem.BremFlags(friction=False, cross=False))
    assert dec_only == ("unitary:[H,rho]", "decoherence:[x,[x,rho]]")
    full = set(brem.caldeira_leggett_structure())
    assert set(dec_only).issubset(full)
