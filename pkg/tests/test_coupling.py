import math

import numpy as np
import pytest

from circlemix import (CertificateViolation, Density, certify, doubling_map,
                       fit_decay, push_sequence, run_coupled, sine_map,
                       slope3_two_branch)
from circlemix.coupling import BlockPlan
from circlemix.scenarios import Scenario, _piecewise_constants, _smooth_constants


def slope3_setup(G=4096, n=30):
    sc = Scenario(name="t", kind="fixed-map", grid=G, n_max=n, seed=1,
                  phi={"preset": "sine"}, psi={"preset": "uniform"},
                  family={"map": {"form": "slope3-two-branch"}})
    rep, cov = _piecewise_constants(sc, slope3_two_branch(), 0.0)
    return rep, cov


def smooth_setup(eps_loc=0.1):
    sc = Scenario(name="t", kind="smooth", grid=4096, n_max=40, seed=1,
                  phi={"preset": "sine"}, psi={"preset": "uniform"},
                  family={"slope": 2.0, "amp_max": 0.05}, eps_loc=eps_loc)
    return _smooth_constants(sc)


def test_identical_densities_trivial_ledger():
    rep, _ = slope3_setup()
    phi = Density.sine(4096, 1, 0.5)
    led = run_coupled([slope3_two_branch()] * 12, phi, phi, "piecewise",
                      bounds=rep)
    assert float(np.max(led.distances())) == 0.0
    assert len(led.blocks) >= 1  # matching proceeds vacuously
    rep_cert = certify(led)
    assert rep_cert.passed and rep_cert.max_ratio == 0.0


def test_smooth_doubling_fourier_annihilation():
    rep = smooth_setup()
    G = 4096
    phi = Density.sine(G, 1, 0.5)
    psi = Density.uniform(G)
    led = run_coupled([doubling_map()] * 10, phi, psi, "smooth", bounds=rep)
    d = led.distances()
    assert d[0] == pytest.approx(1 / math.pi, abs=1e-4)
    assert np.all(d[1:] <= 1e-4)


def test_piecewise_residual_telescopes():
    rep, _ = slope3_setup()
    phi = Density.sine(4096, 1, 0.5)
    psi = Density.uniform(4096)
    led = run_coupled([slope3_two_branch()] * 30, phi, psi, "piecewise",
                      bounds=rep)
    residual = 1.0
    for rec in led.blocks:
        residual *= 1.0 - rec.fraction * rec.kappa_used
        assert rec.residual_after == pytest.approx(residual, abs=1e-9)
    # per-spec identity with the constant-kappa power form
    k = len(led.blocks)
    assert led.blocks[-1].residual_after == pytest.approx(
        (1.0 - rep.kappa) ** k, abs=1e-9)


def test_raw_distances_independent_of_matching():
    # the decomposition is bookkeeping: raw pair evolves identically
    rep, _ = slope3_setup()
    G = 4096
    phi = Density.sine(G, 1, 0.5)
    psi = Density.step(G, [1.3, 0.7])
    maps = [slope3_two_branch()] * 15
    led = run_coupled(maps, phi, psi, "piecewise", bounds=rep)
    seq_phi = [phi] + push_sequence(maps, phi)
    seq_psi = [psi] + push_sequence(maps, psi)
    raw = [a.l1_distance(b) for a, b in zip(seq_phi, seq_psi)]
    assert np.array_equal(led.distances(), np.array(raw))


def test_ledger_envelope_and_distance_bound():
    rep, _ = slope3_setup()
    G = 4096
    rng = np.random.Generator(np.random.PCG64(3))
    phi = Density.random_bv(G, 4.0, rng)
    psi = Density.uniform(G)
    led = run_coupled([slope3_two_branch()] * 40, phi, psi, "piecewise",
                      bounds=rep)
    l1 = led.steps["l1_distance"]
    res = led.steps["residual_mass"]
    for rec in led.blocks:
        assert l1[rec.end] <= 2.0 * res[rec.end] + led.slack
    assert certify(led).passed


def test_positivity_failure_aborts_with_block():
    # the step density pushes to min 2.5/3 < 0.9 - slack: floor 0.9 must trip
    rep, _ = slope3_setup()
    phi = Density.sine(4096, 1, 0.5)
    psi = Density.step(4096, [1.5, 0.5])
    bad_plan = lambda n: BlockPlan(kappa=0.9, n0=1, tau=2)  # noqa: E731
    with pytest.raises(CertificateViolation) as err:
        run_coupled([slope3_two_branch()] * 10, phi, psi, "piecewise",
                    bounds=rep, plan=bad_plan)
    assert err.value.block == 1


def test_smooth_cone_and_subtraction_levels():
    rep = smooth_setup()
    G = 4096
    phi = Density.sine(G, 1, 0.5)
    psi = Density.uniform(G)
    rng = np.random.Generator(np.random.PCG64(10))
    maps = [sine_map(2.0, float(a)) for a in rng.uniform(-0.05, 0.05, 40)]
    led = run_coupled(maps, phi, psi, "smooth", bounds=rep,
                      record_snapshots=True)
    assert led.n_wait >= 0
    for snap in led.snapshots[:4]:
        pre_phi, pre_psi = snap["pre"]
        post_phi, post_psi = snap["post"]
        for d in (pre_phi, pre_psi):
            assert d.ratio_class_L(rep.eps_loc) <= rep.L_star * (1 + 1e-9)
        for d in (post_phi, post_psi):
            assert d.ratio_class_L(rep.eps_loc) <= 2 * rep.L_star * (1 + 1e-9)
    assert certify(led).passed


def test_piecewise_variation_levels_in_blocks():
    # at block starts the unmatched densities are inside the variation cone;
    # right after subtracting they are within a*(1-kappa)^-1
    rep, cov = slope3_setup()
    G = 4096
    rng = np.random.Generator(np.random.PCG64(12))
    phi = Density.random_bv(G, 40.0, rng)
    psi = Density.uniform(G)
    led = run_coupled([slope3_two_branch()] * 40, phi, psi, "piecewise",
                      bounds=rep, record_snapshots=True)
    vphi = led.steps["variation_phi"]
    assert vphi[led.n_wait] <= rep.a_star
    for snap in led.snapshots:
        post_phi, post_psi = snap["post"]
        bound = rep.a_star / (1.0 - rep.kappa)
        # the pre-subtraction density developed positivity for n0 steps and
        # its variation envelope is (2/lam)^n0 a* + A0; subtraction divides
        # by (1 - kappa)
        env = ((2.0 / rep.lambda0) ** (cov.n0) * rep.a_star
               + rep.A0 / (1 - 2.0 / rep.lambda0)) / (1.0 - rep.kappa)
        assert post_phi.variation() <= max(bound, env) * 1.02
        assert post_psi.variation() <= max(bound, env) * 1.02


def test_fit_decay_exact_geometric():
    fit = fit_decay([1.0, 0.5, 0.25, 0.125, 0.0625])
    assert fit.Lambda_emp == pytest.approx(0.5, rel=1e-12)
    assert fit.R2 == pytest.approx(1.0, abs=1e-12)


def test_fit_decay_unavailable():
    assert fit_decay([1e-13] * 10) is None
    assert fit_decay([1.0, 0.5, 0.25]) is None


def test_fit_decay_fourier_cascade():
    # dyadic mode mixture with geometrically shrinking coefficients: each
    # doubling kills the lowest mode and shifts the rest down, so the raw
    # distance halves per step until exact annihilation
    G = 4096
    xs = np.arange(G) / G
    samples = 1.0 + sum(0.4 * 2.0 ** -k * np.sin(2 * np.pi * 2 ** k * xs)
                        for k in range(7))
    phi = Density.from_samples(samples)
    psi = Density.uniform(G)
    seq = push_sequence([doubling_map()] * 10, phi)
    d = [phi.l1_distance(psi)] + [p.l1_distance(psi) for p in seq]
    fit = fit_decay(d)
    assert fit is not None
    assert fit.n_points >= 5
    assert fit.Lambda_emp <= 0.51


def test_affine_smooth_family_floors_distortion():
    # zero second derivative gives zero distortion; the cone machinery then
    # runs on the floored constant and the scheme still certifies
    sc = Scenario(name="aff", kind="smooth", grid=1024, n_max=30, seed=4,
                  phi={"preset": "sine"}, psi={"preset": "uniform"},
                  family={"slope": 2.0, "amp_max": 0.0}, eps_loc=0.1)
    rep = _smooth_constants(sc)
    assert rep.C0 == 1e-6
    assert rep.L_star == 4e-6
    phi = Density.sine(1024, 1, 0.5)
    psi = Density.uniform(1024)
    led = run_coupled([doubling_map()] * 30, phi, psi, "smooth", bounds=rep)
    assert led.n_wait > 0  # a genuine waiting period before the tiny cone
    assert len(led.blocks) >= 1
    assert certify(led).passed


def test_certify_fails_on_synthetic_violation():
    rep, _ = slope3_setup()
    phi = Density.sine(4096, 1, 0.5)
    psi = Density.uniform(4096)
    led = run_coupled([slope3_two_branch()] * 20, phi, psi, "piecewise",
                      bounds=rep)
    led.steps["l1_distance"][led.blocks[0].end] = 3.0  # impossible distance
    assert not certify(led).passed
