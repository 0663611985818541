import numpy as np
import pytest

from circlemix import (Density, analyze, backend_consistency, doubling_map,
                       push, push_sequence, push_with_factor, sine_map,
                       slope25_map, slope3_two_branch, two_slope_wrap_map,
                       ulam_matrix, ulam_push)
from circlemix.transfer import TransferError

BUILTINS = [doubling_map(), slope25_map(), slope3_two_branch(),
            two_slope_wrap_map()]


def test_doubling_uniform_invariant():
    out = push(doubling_map(), Density.uniform(4096))
    assert float(np.abs(out.samples - 1.0).max()) < 1e-14


def test_doubling_kills_first_mode():
    out = push(doubling_map(), Density.sine(4096, 1, 0.5))
    assert out.l1_distance(Density.uniform(4096)) <= 1e-4


def test_slope25_step_profile():
    G = 4096
    out = push(slope25_map(), Density.uniform(G))
    xs = np.arange(G) / G
    away = (np.abs(xs - 0.5) > 2.0 / G) & (xs > 2.0 / G) & (xs < 1.0 - 2.0 / G)
    expected = np.where(xs < 0.5, 1.2, 0.8)
    assert float(np.abs(out.samples[away] - expected[away]).max()) < 1e-9


def test_push_factor_recorded_and_tight():
    rng = np.random.Generator(np.random.PCG64(5))
    G = 2 ** 13
    for m in BUILTINS:
        phi = Density.random_bv(G, 30.0, rng)
        out, factor = push_with_factor(m, phi)
        assert abs(factor - 1.0) <= 5.0 * phi.variation() / G
        assert abs(out.integral() - 1.0) < 1e-12


def test_push_sequence_mode_cascade():
    G = 4096
    seq = push_sequence([doubling_map()] * 2, Density.sine(G, 2, 0.5))
    assert seq[0].l1_distance(Density.sine(G, 1, 0.5)) <= 1e-4
    assert seq[1].l1_distance(Density.uniform(G)) <= 1e-4


def test_push_sequence_empty_is_identity():
    phi = Density.sine(256, 1, 0.3)
    assert push_sequence([], phi) == []
    assert float(np.abs(phi.samples - Density.sine(256, 1, 0.3).samples).max()) == 0.0


def test_push_sequence_composes_single_pushes():
    phi = Density.uniform(2048)
    m = slope25_map()
    seq = push_sequence([m, m], phi)
    again = push(m, push(m, phi))
    assert float(np.abs(seq[1].samples - again.samples).max()) == 0.0


def test_ulam_doubling_b2():
    U = ulam_matrix(doubling_map(), 2)
    assert np.array_equal(U.entries, np.full((2, 2), 0.5))


def test_ulam_slope3_b3():
    U = ulam_matrix(slope3_two_branch(), 3)
    assert float(np.abs(U.entries - 1.0 / 3.0).max()) < 1e-12


@pytest.mark.parametrize("B", [8, 64])
def test_ulam_column_stochastic_all_builtins(B):
    for m in BUILTINS + [sine_map(2.0, 0.05), sine_map(3.0, 0.001)]:
        U = ulam_matrix(m, B)
        assert float(np.abs(U.entries.sum(axis=0) - 1.0).max()) < 1e-10
        masses = np.full(B, 1.0 / B)
        assert abs(ulam_push(U, masses).sum() - 1.0) < 1e-12


def test_backend_consistency_uniform_doubling():
    phi = Density.uniform(8192)
    for B in (16, 128, 512):
        assert backend_consistency(doubling_map(), phi, B) < 1e-10


LIPSCHITZ = lambda x: (1.0 + 0.25 * np.sin(2 * np.pi * x)  # noqa: E731
                       + 0.25 * np.cos(4 * np.pi * x)
                       + 0.1 * np.sin(6 * np.pi * x + 1.0))


@pytest.mark.parametrize("m", BUILTINS, ids=["doubling", "s25", "s3", "wrap"])
def test_backend_consistency_bound_and_refinement(m):
    G = 8192
    phi = Density.from_function(G, LIPSCHITZ)
    d1 = backend_consistency(m, phi, 512)
    d2 = backend_consistency(m, phi, 1024)
    assert d1 <= 4.0 / 512
    if d1 > 1e-12:
        assert d2 <= 0.75 * d1


def test_decreasing_branch_push_and_ulam():
    from circlemix import BranchSpec, PiecewiseMap

    m = PiecewiseMap((BranchSpec(0.0, 1.0, -2.0),))  # -2x mod 1
    out = push(m, Density.uniform(1024))
    assert float(np.abs(out.samples - 1.0).max()) < 1e-14
    U = ulam_matrix(m, 4)
    assert float(np.abs(U.entries.sum(axis=0) - 1.0).max()) < 1e-12
    phi = Density.sine(2048, 1, 0.4)
    assert backend_consistency(m, phi, 64) <= 4.0 / 64


def test_mass_and_column_guards():
    from circlemix.transfer import UlamMatrix

    bad = np.full((4, 4), 0.3)  # columns sum to 1.2
    with pytest.raises(TransferError):
        UlamMatrix(4, bad)
    rng = np.random.Generator(np.random.PCG64(9))
    push(two_slope_wrap_map(), Density.random_bv(1024, 10.0, rng))  # no trip


def test_duality_change_of_variables():
    # integral of h against the pushforward equals integral of h(f(x)) phi(x)
    rng = np.random.Generator(np.random.PCG64(13))
    G = 2 ** 13
    for m in BUILTINS:
        phi = Density.random_bv(G, 20.0, rng)
        xs = np.arange(G) / G
        h = np.cos(2 * np.pi * xs)
        lhs = float((h * push(m, phi).samples).mean())
        rhs = float((np.cos(2 * np.pi * m.eval_many(xs)) * phi.samples).mean())
        assert abs(lhs - rhs) <= 10.0 * phi.variation() / G


def test_variation_inequality_all_builtins():
    rng = np.random.Generator(np.random.PCG64(2))
    G = 2 ** 14
    for _ in range(10):
        phi = Density.random_bv(G, 50.0, rng)
        v0 = phi.variation()
        for m in BUILTINS:
            an = analyze(m)
            bound = 2.0 / an.lambda_min * v0 + an.A + 0.02 * (1.0 + v0)
            assert push(m, phi).variation() <= bound


def test_iterated_variation_envelope():
    # random sequences from the wrap family stay under the geometric envelope
    from circlemix.scenarios import draw_two_slope_wrap, two_slope_wrap_family_bounds

    fam = two_slope_wrap_family_bounds()
    rng = np.random.Generator(np.random.PCG64(6))
    G = 2 ** 13
    slack = 0.02
    for _ in range(5):
        phi = Density.random_bv(G, 40.0, rng)
        v0 = phi.variation()
        maps = [draw_two_slope_wrap({}, rng) for _ in range(8)]
        cur = phi
        for n, m in enumerate(maps, start=1):
            cur = push(m, cur)
            env = ((2.0 / fam.lambda0) ** n * v0
                   + fam.A0 / (1.0 - 2.0 / fam.lambda0))
            assert cur.variation() <= env * (1.0 + slack) + slack
