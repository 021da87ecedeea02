import numpy as np
import pytest
from scipy.linalg import svdvals

from oqslab.errors import InvalidParameterError
from oqslab.evolve import rk4
from oqslab.hilbert import (SpaceSpec, anticommutator, expectation,
                            make_operator_set, momentum_representation)
from oqslab import oracle as orc
from oqslab import toymodel as tm


def test_pair_moments_validation():
    with pytest.raises(InvalidParameterError):
        orc.PairMoments(np.zeros(3), np.eye(4))
    bad = np.eye(4)
    bad[0, 1] = 0.3   # asymmetric
    with pytest.raises(InvalidParameterError):
        orc.PairMoments(np.zeros(4), bad)
    vac = orc.PairMoments(np.zeros(4), 0.5 * np.eye(4))
    assert vac.quantum_defect() > -1e-12
    squeezed_bad = orc.PairMoments(np.zeros(4), 0.1 * np.eye(4))
    assert squeezed_bad.quantum_defect() < -0.3


def test_initial_moments_plain_and_transformed():
    pars = tm.ToyParams(g=0.1)
    ist = tm.InitialStateSpec(mean1_x=1.0, mean1_p=0.5, width1=2.0)
    m = orc.moments_from_initial_state(ist, pars)
    assert np.allclose(m.mean, [1.0, 0.5, 0.0, 0.0])
    assert m.cov[0, 0] == pytest.approx(4.0)
    assert m.cov[1, 1] == pytest.approx(1.0 / 16.0)
    ist_t = tm.InitialStateSpec(mean1_x=1.0, mean1_p=0.5, width1=2.0,
                                transformed=True)
    mt = orc.moments_from_initial_state(ist_t, pars)
    assert mt.mean[3] == pytest.approx(0.1, abs=1e-15)   # <p2> = g <x1>
    assert mt.mean[1] == pytest.approx(0.5, abs=1e-15)   # <x2> = 0 initially
    # the map is symplectic: the state stays exactly physical
    assert mt.quantum_defect() > -1e-12
    with pytest.raises(InvalidParameterError):
        orc.moments_from_initial_state(
            tm.InitialStateSpec(cat_dx=2.0), pars)


def test_drift_conservation_laws():
    pars = tm.ToyParams(g=0.37, m1=1.7, m2=0.6)
    A = orc.heisenberg_drift_L(pars)
    assert np.all(A[3] == 0.0)           # p2 conserved in the L picture
    Ap = orc.heisenberg_drift_Lprime(pars)
    assert np.all(Ap[1] == 0.0)          # p1 conserved in the primed picture


def test_moment_evolution_matches_harmonic_solution():
    pars = tm.ToyParams(g=0.1)
    ist = tm.InitialStateSpec(mean1_x=1.0, mean1_p=0.0, width1=1.0)
    m0 = orc.moments_from_initial_state(ist, pars)
    for t in (0.7, 3.0, 11.0):
        mt = orc.evolve_moments(m0, orc.heisenberg_drift_L(pars), t)
        xa, pa = tm.analytic_means_L(pars, 1.0, 0.0, t)
        assert mt.mean[0] == pytest.approx(xa, abs=1e-12)
        assert mt.mean[1] == pytest.approx(pa, abs=1e-12)


def test_transformed_mean_is_exact_cosine():
    # under the L drift the transformed state's <p1> is an exact cosine;
    # the second-order closed form is its small-g truncation
    pars = tm.ToyParams(g=0.1)
    ist = tm.InitialStateSpec(mean1_x=0.0, mean1_p=1.0, width1=1.0,
                              transformed=True)
    m0 = orc.moments_from_initial_state(ist, pars)
    mt = orc.evolve_moments(m0, orc.heisenberg_drift_L(pars), 2.0)
    assert mt.mean[1] == pytest.approx(np.cos(0.2), abs=1e-12)
    _, p_trunc = tm.analytic_means_L_transformed(pars, 0.0, 1.0, 2.0)
    w = pars.omega
    assert abs(mt.mean[1] - p_trunc) < (w * 2.0) ** 4 / 24 * 1.01


def test_moment_evolution_is_symplectic():
    pars = tm.ToyParams(g=0.4, m1=2.0, m2=0.5)
    ist = tm.InitialStateSpec(mean1_x=1.0, width1=1.3,
                              env=tm.EnvStats(var_x2=2.0, var_p2=1.0))
    m0 = orc.moments_from_initial_state(ist, pars)
    for drift in (orc.heisenberg_drift_L(pars),
                  orc.heisenberg_drift_Lprime(pars)):
        mt = orc.evolve_moments(m0, drift, 7.0)
        assert np.linalg.det(mt.cov) == pytest.approx(
            np.linalg.det(m0.cov), rel=1e-10)
        assert mt.quantum_defect() > -1e-10


def _dense_vs_moments(picture, istate, pars, t, dim=32):
    # 12/sigma ~ 8.5 sigma of padding: the spectral wrap-around amplifies
    # edge tails, so the comfortable-looking 9.0 would already cost 1e-6
    s1 = SpaceSpec("grid", dim, grid_extent=12.0)
    s2 = SpaceSpec("grid", dim, grid_extent=12.0)
    ev = orc.ExactReducedEvolution(s1, s2, istate, pars, picture)
    rho1 = ev.reduced_at(t)
    o1 = make_operator_set(s1)
    drift = (orc.heisenberg_drift_L(pars) if picture == "L"
             else orc.heisenberg_drift_Lprime(pars))
    mt = orc.evolve_moments(orc.moments_from_initial_state(istate, pars),
                            drift, t)
    mean1, cov1 = mt.particle1()
    got = np.array([expectation(o1.x, rho1.data),
                    expectation(o1.p, rho1.data),
                    expectation(o1.x @ o1.x, rho1.data),
                    expectation(o1.p @ o1.p, rho1.data)])
    want = np.array([mean1[0], mean1[1],
                     cov1[0, 0] + mean1[0] ** 2,
                     cov1[1, 1] + mean1[1] ** 2])
    return got, want


@pytest.mark.parametrize("picture", ["L", "Lprime"])
def test_dense_reduced_matches_moments_pure_env(picture):
    pars = tm.ToyParams(g=0.2)
    ist = tm.InitialStateSpec(mean1_x=0.5, mean1_p=0.3, width1=1.0)
    got, want = _dense_vs_moments(picture, ist, pars, 2.0)
    assert np.abs(got - want).max() < 1e-6


def test_dense_reduced_matches_moments_mixed_env():
    pars = tm.ToyParams(g=0.2)
    ist = tm.InitialStateSpec(mean1_x=0.5, width1=1.0,
                              env=tm.EnvStats(var_x2=1.0, var_p2=1.0))
    # the momentum variance of the moment-built mixed Gaussian converges
    # slowest in dx (4.8e-7 at dim 40); tolerance sits 10x above that
    got, want = _dense_vs_moments("L", ist, pars, 2.0, dim=40)
    assert np.abs(got - want).max() < 5e-6


def test_dense_reduced_transformed_state():
    pars = tm.ToyParams(g=0.2)
    ist = tm.InitialStateSpec(mean1_x=0.5, mean1_p=0.3, width1=1.0,
                              transformed=True)
    got, want = _dense_vs_moments("L", ist, pars, 1.5)
    assert np.abs(got - want).max() < 1e-6


def test_trace_distance_basics():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    ra = a @ a.conj().T
    ra /= np.trace(ra).real
    assert orc.trace_distance(ra, ra) == 0.0
    e1 = np.zeros((4, 4)); e1[0, 0] = 1.0
    e2 = np.zeros((4, 4)); e2[1, 1] = 1.0
    assert orc.trace_distance(e1, e2) == pytest.approx(1.0, abs=1e-14)
    b = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    rb = b @ b.conj().T
    rb /= np.trace(rb).real
    # for Hermitian differences the eigenvalue form equals the nuclear norm
    assert orc.trace_distance(ra, rb) == pytest.approx(
        0.5 * svdvals(ra - rb).sum(), rel=1e-12)
    assert orc.trace_distance(ra, rb) == orc.trace_distance(rb, ra)


def _dense_master_moments(generator, ops, rho0, t1, pars, env):
    rho = rk4(generator, rho0, 0.0, t1, 200)
    x = expectation(ops.x, rho)
    p = expectation(ops.p, rho)
    return np.array([
        x, p,
        expectation(ops.x @ ops.x, rho) - x * x,
        0.5 * expectation(anticommutator(ops.x, ops.p), rho) - x * p,
        expectation(ops.p @ ops.p, rho) - p * p])


def test_master_moment_flow_L_matches_dense():
    pars = tm.ToyParams(g=0.2)
    env = tm.EnvStats()
    sg = SpaceSpec("grid", 64, grid_extent=12.0)
    og = make_operator_set(sg)
    psi = tm.particle1_wavefunction(sg, tm.InitialStateSpec(
        mean1_x=0.5, mean1_p=0.2, width1=1.0))
    dense = _dense_master_moments(tm.l_generator(og, pars, env), og,
                                  np.outer(psi, psi.conj()), 2.0, pars, env)
    m0 = np.array([0.5, 0.2, 1.0, 0.0, 0.25])
    flow = orc.integrate_master_moments(orc.master_moment_rhs_L, m0, 2.0,
                                        400, pars, env)
    assert np.abs(dense - flow).max() < 1e-7


def test_master_moment_flow_Lprime_matches_dense():
    pars = tm.ToyParams(g=0.2)
    env = tm.EnvStats(var_x2=1.5, var_p2=0.5, sym_xp=0.4)
    sg = SpaceSpec("grid", 96, grid_extent=10.0)
    om = momentum_representation(make_operator_set(sg))
    from oqslab.hilbert import gaussian_wavefunction
    psi = gaussian_wavefunction(sg, x0=0.7, p0=-0.3, sigma=0.35)
    rho0 = np.outer(psi, psi.conj())
    x = expectation(om.x, rho0)
    p = expectation(om.p, rho0)
    m0 = np.array([
        x, p,
        expectation(om.x @ om.x, rho0) - x * x,
        0.5 * expectation(anticommutator(om.x, om.p), rho0) - x * p,
        expectation(om.p @ om.p, rho0) - p * p])
    dense = _dense_master_moments(tm.lprime_generator(om, pars, env), om,
                                  rho0, 2.0, pars, env)
    flow = orc.integrate_master_moments(orc.master_moment_rhs_Lprime, m0,
                                        2.0, 400, pars, env)
    assert np.abs(dense - flow).max() < 1e-7


def test_exact_evolution_rejects_unknown_picture():
    s = SpaceSpec("grid", 8, grid_extent=4.0)
    with pytest.raises(InvalidParameterError):
        orc.ExactReducedEvolution(s, s, tm.InitialStateSpec(),
                                  tm.ToyParams(), "wrong")
