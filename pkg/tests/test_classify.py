import numpy as np
import pytest

from heisboundary import (
    DerivationSpec,
    LieElement,
    QuasimetricParams,
    almost_similarity_fit,
    build_isometry,
    classify,
    decompose,
    dist_A,
    distortion_probe,
    eta_envelope,
    flow,
    qi_invariants,
    verify_isometry,
)
from heisboundary.classify import apply_map, bracket_defect
from heisboundary.core import bch_mul
from heisboundary.derivation import conjugate, random_automorphism
from heisboundary.errors import NotEquivalent
from heisboundary.metric import philox, sample_box

from oracles import eta_envelope_oracle

# Frozen from oracles.eta_envelope_oracle: diag(1,2,3), identity from scale 1 to 2, 1e5 triples, seed 0.
ETA_FIRST = (0.2458308211149164, 0.5454938046526783)
ETA_MID = (1.0430372488535895, 1.2600943291990656)
ETA_LAST = (3.815099488630581, 2.4818304676942176)


def _gs(*values):
    return decompose(DerivationSpec.diag(*values))


def _conj(values, phi):
    return decompose(conjugate(DerivationSpec.diag(*values), phi))


def _battery():
    base = _gs(1, 2, 3)
    return {
        "a": base,
        "double": _gs(2, 4, 6),
        "wrong_ratio": _gs(1, 3, 4),
        "k1": _gs(1, 1, 2),
        "conj": decompose(DerivationSpec(1, matrix=[[1, 0, 0], [-1, 2, 0], [0, 0, 3]])),
    }


@pytest.mark.parametrize(
    "values, k, dims, ratios",
    [((1, 2, 3), 2, (1, 1), (1, 2)), ((2, 4, 6), 2, (1, 1), (1, 2)), ((1, 1, 2), 1, (2,), (1,))],
)
def test_invariants(values, k, dims, ratios):
    inv = qi_invariants(_gs(*values))
    assert inv.k == k and tuple(inv.dims) == dims
    np.testing.assert_allclose(inv.ratios, ratios)


def test_battery():
    b = _battery()
    v = classify(b["a"], b["double"])
    assert v.equivalent and v.lam == pytest.approx(0.5, rel=1e-12)
    assert not classify(b["a"], b["wrong_ratio"]).equivalent
    assert not classify(b["a"], b["k1"]).equivalent
    v = classify(b["a"], b["conj"])
    assert v.equivalent and v.lam == pytest.approx(1.0, rel=1e-12)


def test_middle_block_dimensions_matter():
    a = _gs(1, 3, 2, 2, 2, 2, 4)
    b = _gs(1, 3, 1, 3, 2, 2, 4)
    assert qi_invariants(a).ratios == qi_invariants(b).ratios
    assert not classify(a, b).equivalent
    assert classify(a, _gs(2, 6, 4, 4, 4, 4, 8)).equivalent


def test_classify_is_an_equivalence_relation():
    rng = np.random.default_rng(0)
    family = [_gs(1, 2, 3), _gs(2, 4, 6), _gs(0.5, 1, 1.5), _conj((1, 2, 3), random_automorphism(1, rng))]
    for a in family:
        r = classify(a, a)
        assert r.equivalent and r.lam == pytest.approx(1.0)
    for a in family:
        for b in family:
            ab, ba = classify(a, b), classify(b, a)
            assert ab.equivalent and ba.equivalent
            assert ab.lam * ba.lam == pytest.approx(1.0, rel=1e-12)
            for c in family:
                assert classify(a, c).lam == pytest.approx(ab.lam * classify(b, c).lam, rel=1e-12)


@pytest.mark.parametrize("c", [0.1, 0.5, 3.0, 17.0])
def test_scaling_gives_lambda(c):
    a = DerivationSpec.diag(1, 3, 2, 2, 4)
    r = classify(decompose(a), decompose(DerivationSpec(2, matrix=c * a.to_matrix())))
    assert r.equivalent and r.lam == pytest.approx(1.0 / c, rel=1e-12)
    r = classify(decompose(DerivationSpec(2, matrix=c * a.to_matrix())), decompose(a))
    assert r.lam == pytest.approx(c, rel=1e-12)


def test_conjugates_are_equivalent_with_unit_lambda():
    rng = np.random.default_rng(1)
    for values in [(1, 2, 3), (1, 3, 2, 2, 4)]:
        n = (len(values) - 1) // 2
        a = _gs(*values)
        for _ in range(5):
            r = classify(a, _conj(values, random_automorphism(n, rng)))
            assert r.equivalent and r.lam == pytest.approx(1.0, rel=1e-9)


def test_build_isometry_refuses_inequivalent():
    b = _battery()
    with pytest.raises(NotEquivalent):
        build_isometry(b["a"], b["wrong_ratio"])


def test_identity_isometry():
    a = _gs(1, 2, 3)
    F = build_isometry(a, a)
    np.testing.assert_array_equal(F.matrix, np.eye(3))
    assert apply_map(F, LieElement.zero(1)).allclose(LieElement.zero(1))
    assert verify_isometry(F, pairs=1000).max_relative_error == 0.0


@pytest.mark.parametrize("target", ["double", "conj"])
def test_isometry_contract(target):
    b = _battery()
    F = build_isometry(b["a"], b[target])
    check = verify_isometry(F, pairs=10_000, seed=0)
    assert check.max_relative_error <= 1e-9
    assert 1 / check.bilipschitz_bound - 1e-12 <= check.bilipschitz_low
    assert check.bilipschitz_high <= check.bilipschitz_bound + 1e-12
    assert bracket_defect(F, pairs=1000) <= 1e-10


def test_isometry_random_conjugate_pairs():
    rng = np.random.default_rng(2)
    for values in [(1, 2, 3), (1, 3, 2, 2, 4), (1, 1, 2)]:
        n = (len(values) - 1) // 2
        a = _conj(values, random_automorphism(n, rng))
        b = decompose(DerivationSpec(n, matrix=2.5 * conjugate(DerivationSpec.diag(*values), random_automorphism(n, rng)).to_matrix()))
        F = build_isometry(a, b)
        assert verify_isometry(F, pairs=2000, seed=1).max_relative_error <= 1e-9
        assert bracket_defect(F) <= 1e-10


def test_source_scale_lambda_is_the_wrong_direction():
    b = _battery()
    F = build_isometry(b["a"], b["double"])
    assert F.lam == 0.5 and F.source_scale == 2.0
    rng = philox(3)
    p, q = (sample_box(b["a"], 1000, 1.0, rng) for _ in range(2))
    dst = dist_A(QuasimetricParams(b["double"]), F(p), F(q))
    right = dist_A(QuasimetricParams(b["a"], F.source_scale), p, q)
    wrong = dist_A(QuasimetricParams(b["a"], F.lam), p, q)
    np.testing.assert_allclose(dst, right, rtol=1e-12)
    assert np.max(np.abs(dst - wrong) / dst) > 0.1


def test_map_fixes_centre_and_sends_U1_to_W1():
    rng = np.random.default_rng(4)
    for values in [(1, 2, 3), (1, 3, 2, 2, 4)]:
        n = (len(values) - 1) // 2
        a = _conj(values, random_automorphism(n, rng))
        b = _conj(values, random_automorphism(n, rng))
        F = build_isometry(a, b)
        U1, W1 = a.eigenspace_bases[0], b.eigenspace_bases[0]
        image = F.matrix @ U1
        # image lies in W1 and has the same dimension
        residual = image - W1 @ np.linalg.lstsq(W1, image, rcond=None)[0]
        assert np.abs(residual).max() <= 1e-10
        assert np.linalg.matrix_rank(image) == U1.shape[1]
        e = np.zeros(a.dim)
        e[-1] = 1.0
        np.testing.assert_allclose(F.matrix @ e, e, atol=1e-12)


def test_inverse_map_round_trips():
    b = _battery()
    F = build_isometry(b["a"], b["conj"])
    x = LieElement.of([0.3, -0.2, 0.9])
    assert F.inverse()(F(x)).allclose(x, atol=1e-14)


def test_distortion_of_flow():
    gs = _gs(1, 2, 3)
    qp = QuasimetricParams(gs)
    t = np.log(2.0)
    rep = distortion_probe(
        lambda v: flow(gs, t, v), qp, qp, LieElement.of([0.2, 0.1, -0.3]),
        samples=200, seed=0, inverse=lambda v: flow(gs, -t, v),
    )
    np.testing.assert_allclose(np.asarray(rep.upper) / np.asarray(rep.radii), 2.0, rtol=1e-9)
    np.testing.assert_allclose(np.asarray(rep.lower) / np.asarray(rep.radii), 2.0, rtol=1e-9)
    assert rep.upper_limit == pytest.approx(2.0, rel=1e-9)
    assert rep.reciprocal_product == pytest.approx(1.0, rel=1e-9)
    assert all(lo <= up for lo, up in zip(rep.lower, rep.upper))


def test_distortion_of_translation():
    gs = _gs(1, 3, 2, 2, 4)
    qp = QuasimetricParams(gs)
    g = LieElement.of([0.3, -0.5, 0.2, 0.1, 0.4])

    def left(v, sign=1.0):
        return bch_mul(LieElement(2, np.broadcast_to(sign * g.coords, v.coords.shape)), v)

    rep = distortion_probe(left, qp, qp, LieElement.zero(2), samples=200, seed=1, inverse=lambda v: left(v, -1.0))
    assert rep.upper_limit == pytest.approx(1.0, rel=1e-6)
    assert rep.lower_limit == pytest.approx(1.0, rel=1e-6)
    assert rep.reciprocal_product == pytest.approx(1.0, rel=1e-6)


def test_distortion_of_isometry():
    b = _battery()
    F = build_isometry(b["a"], b["conj"])
    src, dst = QuasimetricParams(b["a"], F.source_scale), QuasimetricParams(b["conj"])
    rep = distortion_probe(F, src, dst, LieElement.of([0.1, 0.2, 0.3]), samples=200, seed=2, inverse=F.inverse())
    assert rep.upper_limit == pytest.approx(1.0, rel=1e-6)
    assert rep.lower_limit == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("kind", ["isometry", "flow", "translation"])
def test_almost_similarity(kind):
    b = _battery()
    gs = b["a"]
    qp = QuasimetricParams(gs)
    if kind == "isometry":
        F = build_isometry(gs, b["conj"])
        fmap, dst, L_expected = F, QuasimetricParams(b["conj"]), 1.0
    elif kind == "flow":
        fmap, dst, L_expected = (lambda v: flow(gs, np.log(2.0), v)), qp, 2.0
    else:
        g = LieElement.of([0.5, 0.5, 0.5])
        fmap, dst, L_expected = (lambda v: bch_mul(LieElement(1, np.broadcast_to(g.coords, v.coords.shape)), v)), qp, 1.0
    L, C, rms = almost_similarity_fit(fmap, qp, dst, pairs=5000, seed=0)
    assert L == pytest.approx(L_expected, rel=1e-12)
    assert C <= 1e-12 and rms <= C


def test_eta_envelope_isometry_and_flow():
    b = _battery()
    F = build_isometry(b["a"], b["conj"])
    env = eta_envelope(F, QuasimetricParams(b["a"]), QuasimetricParams(b["conj"]), triples=20_000, seed=0)
    np.testing.assert_allclose(env.rho, env.t, rtol=1e-9)
    gs = b["a"]
    qp = QuasimetricParams(gs)
    env = eta_envelope(lambda v: flow(gs, 0.7, v), qp, qp, triples=20_000, seed=0)
    np.testing.assert_allclose(env.rho, env.t, rtol=1e-9)
    np.testing.assert_allclose(env.eta1(np.asarray(env.t[1:-1])), env.t[1:-1], rtol=1e-9)


def test_eta_envelope_rescaling_bound():
    gs = _gs(1, 2, 3)
    env = eta_envelope(lambda v: v, QuasimetricParams(gs, 1.0), QuasimetricParams(gs, 2.0), triples=100_000, seed=0)
    t, rho = np.asarray(env.t), np.asarray(env.rho)
    bound = np.sqrt(gs.k + 1)
    assert np.all(rho <= bound * np.sqrt(t) * (1 + 1e-12))
    assert np.all(rho >= np.sqrt(t) / bound * (1 - 1e-12))
    assert (env.t[0], env.rho[0]) == ETA_FIRST
    assert (env.t[20], env.rho[20]) == ETA_MID
    assert (env.t[-1], env.rho[-1]) == ETA_LAST


def test_eta_envelope_matches_oracle():
    gs = _gs(1, 2, 3)
    env = eta_envelope(lambda v: v, QuasimetricParams(gs, 1.0), QuasimetricParams(gs, 2.0), triples=30_000, seed=5)
    ref = eta_envelope_oracle([([0], 1.0), ([1], 2.0), ([2], 3.0)], 3, 1.0, 2.0, 30_000, 5)
    np.testing.assert_allclose(np.column_stack([env.t, env.rho]), np.array(ref), rtol=1e-12)


def test_eta_envelope_is_monotone_gauge():
    gs = _gs(1, 2, 3)
    env = eta_envelope(lambda v: v, QuasimetricParams(gs, 1.0), QuasimetricParams(gs, 2.0), triples=20_000, seed=1)
    ts = np.geomspace(env.t[0], env.t[-1], 50)
    assert np.all(np.diff(env.eta(ts)) >= 0)
    assert np.all(np.diff(env.eta1(ts[5:-5])) >= 0)
