import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gesverify.linalg import LinearDependenceError, eig_hermitian, kron, proj, same_ray
from gesverify.subspace2 import (
    Subspace2,
    Verdict,
    amplitude_matrix,
    build_strategy,
    classification_report,
    classify,
    concurrence,
    find_product_states,
    sample_complexity_verifiable,
    spectral_gap2,
)

from oracles import haar_unitary, product_states_by_search

S2 = math.sqrt(2)
Z, O = np.array([1, 0], complex), np.array([0, 1], complex)


def k(*amps):
    v = np.array(amps, dtype=complex)
    return v / np.linalg.norm(v)


def sub(a, b):
    return Subspace2.from_vectors([a, b])


VERIFIABLE = sub(k(1, 0, 0, 0), k(1, 1, 1, 1))
PERFECT = sub(k(1, 0, 0, 1), k(1, 0, 0, -1))
UNVERIFIABLE = sub(k(1, 0, 0, 1), k(0, 1, 0, 0))


def haar_subspace(rng):
    u = haar_unitary(4, rng)
    return Subspace2((u[:, 0], u[:, 1]))


def local_image(v: Subspace2, rng) -> Subspace2:
    w = kron(haar_unitary(2, rng), haar_unitary(2, rng))
    return Subspace2((w @ v.basis[0], w @ v.basis[1]))


def random_subspace(rng):
    """Mostly Haar, with local-unitary images of the degenerate classes mixed in."""
    r = rng.random()
    if r < 0.7:
        return haar_subspace(rng)
    seed = [UNVERIFIABLE, PERFECT, sub(k(1, 0, 0, 0), k(0, 1, 0, 0))][int(rng.integers(3))]
    return local_image(seed, rng)


def check_operator(op, v, tol=1e-10):
    e = eig_hermitian(op.omega).values
    assert e.min() > -tol and e.max() < 1 + tol
    for b in v.basis:
        assert np.max(np.abs(op.omega @ b - b)) < tol


class TestAmplitudeMatrix:
    def test_bell(self):
        b = k(1, 0, 0, 1)
        assert_allclose(amplitude_matrix(b), np.eye(2) / S2)
        assert concurrence(b) == pytest.approx(1.0)

    def test_product(self):
        assert_allclose(amplitude_matrix(k(0, 1, 0, 0)), [[0, 1], [0, 0]])
        assert concurrence(k(0, 1, 0, 0)) == 0

    def test_w_like(self):
        v = k(1, 1, 1, 0)
        assert_allclose(amplitude_matrix(v), np.array([[1, 1], [1, 0]]) / math.sqrt(3))
        assert concurrence(v) == pytest.approx(2 / 3)


class TestFindProductStates:
    def test_z_plus_branch(self):
        ps = find_product_states(sub(k(1, 0, 0, 0), k(0, 1, 1, 0)))
        assert not ps.infinite and len(ps.states) == 1
        assert same_ray(ps.states[0], k(1, 0, 0, 0))

    def test_infinite(self):
        ps = find_product_states(sub(k(1, 0, 0, 0), k(0, 1, 0, 0)))
        assert ps.infinite and ps.count == float("inf")
        assert abs(np.vdot(*ps.states)) < 1e-12

    def test_x_plus_branch_against_search(self):
        v = sub(k(1, 0, 0, 1), k(1, 1, 1, 0))
        ps = find_product_states(v)
        assert len(ps.states) == 2
        alpha = math.atan((math.sqrt(5) - 1) / 2)
        xp = math.cos(alpha) * Z + math.sin(alpha) * O
        xbp = math.sin(alpha) * Z - math.cos(alpha) * O
        expect = [kron(xp, xp), kron(xbp, xbp)]
        for e in expect:
            assert any(same_ray(e, s) for s in ps.states)
        searched = product_states_by_search(v.projector)
        assert len(searched) == 2
        for e in expect:
            assert any(same_ray(e, s, 1e-5) for s in searched)
        # frozen search result: cos^2, cos*sin, sin^2 pattern
        c2, cs = math.cos(alpha) ** 2, math.cos(alpha) * math.sin(alpha)
        assert c2 == pytest.approx(0.7236068, abs=1e-7)
        assert cs == pytest.approx(0.44721359, abs=1e-7)

    def test_root_at_infinity(self):
        # beta = |01> is product and the pencil is linear
        ps = find_product_states(sub(k(1, 0, 0, 1), k(0, 1, 0, 0)))
        assert len(ps.states) == 1 and same_ray(ps.states[0], k(0, 1, 0, 0))

    def test_states_are_product_and_distinct(self, rng):
        for _ in range(300):
            ps = find_product_states(random_subspace(rng))
            for s in ps.states:
                assert concurrence(s) < 1e-7
            for i in range(len(ps.states)):
                for j in range(i):
                    assert not same_ray(ps.states[i], ps.states[j], 1e-7)


class TestClassifyExamples:
    def test_verifiable(self):
        c = classify(VERIFIABLE)
        assert c.verdict is Verdict.VERIFIABLE
        t = c.products_in_Vperp.states
        expect = [kron(O, k(1, -1)), kron(k(1, -1), O)]
        for e in expect:
            assert any(same_ray(e, s) for s in t)
        assert c.overlap == pytest.approx(0.5)
        op = build_strategy(c, VERIFIABLE)
        assert op.gap == pytest.approx(0.25, abs=1e-12)
        assert spectral_gap2(op.omega, VERIFIABLE) == pytest.approx(0.25, abs=1e-9)

    def test_perfect(self):
        c = classify(PERFECT)
        assert c.verdict is Verdict.PERFECTLY_VERIFIABLE
        for e in (k(0, 1, 0, 0), k(0, 0, 1, 0)):
            assert any(same_ray(e, s) for s in c.products_in_Vperp.states)
        op = build_strategy(c, PERFECT)
        assert op.gap == 1.0
        assert_allclose(op.omega, np.diag([1, 0, 0, 1]), atol=1e-12)
        assert spectral_gap2(op.omega, PERFECT) == pytest.approx(1.0, abs=1e-12)

    def test_unverifiable(self):
        c = classify(UNVERIFIABLE)
        assert c.verdict is Verdict.UNVERIFIABLE
        assert len(c.products_in_Vperp.states) == 1
        assert same_ray(c.products_in_Vperp.states[0], k(0, 0, 1, 0))
        op = build_strategy(c, UNVERIFIABLE)
        assert op.gap == 0.0
        assert same_ray(op.fooling_state, k(1, 0, 0, -1))
        assert spectral_gap2(op.omega, UNVERIFIABLE) == pytest.approx(0.0, abs=1e-12)

    def test_infinite_complement_is_perfect(self):
        v = sub(k(0, 0, 1, 0), k(0, 0, 0, 1))
        assert classify(v).verdict is Verdict.PERFECTLY_VERIFIABLE
        op = build_strategy(classify(v), v)
        assert_allclose(op.omega, v.projector, atol=1e-12)

    def test_x_minus_branch_is_verifiable(self):
        v = sub(k(1, 0, 0, -1), k(-1, 1, 1, 0))
        c = classify(v)
        assert c.verdict is Verdict.VERIFIABLE
        assert c.overlap == pytest.approx(0.25, abs=1e-12)
        xm = k(1, np.exp(1j * np.pi / 3))
        xmp = k(1, np.exp(-1j * np.pi / 3))
        for e in (kron(xm, xmp), kron(xmp, xm)):
            assert any(same_ray(e, s) for s in c.products_in_Vperp.states)

    def test_mismatched_class(self):
        with pytest.raises(ValueError, match="does not belong"):
            build_strategy(classify(PERFECT), UNVERIFIABLE)


class TestSpectralGap2:
    def test_projector(self):
        assert spectral_gap2(VERIFIABLE.projector, VERIFIABLE) == pytest.approx(1.0)

    def test_identity(self):
        assert spectral_gap2(np.eye(4), VERIFIABLE) == pytest.approx(0.0, abs=1e-14)

    def test_rejects_non_test(self):
        with pytest.raises(ValueError, match="test operator"):
            spectral_gap2(np.diag([0, 1, 1, 1]), PERFECT)


class TestCountsAndGaps:
    def test_product_counts_match_haar(self, rng):
        for _ in range(1000):
            c = classify(haar_subspace(rng))
            assert c.products_in_V.count == c.products_in_Vperp.count
            assert c.products_in_V.count in (1, 2, float("inf"))

    def test_product_counts_match_structured(self, rng):
        seen = set()
        for _ in range(600):
            c = classify(random_subspace(rng))
            assert c.products_in_V.count == c.products_in_Vperp.count
            assert c.products_in_V.count in (1, 2, float("inf"))
            seen.add(c.verdict)
        assert seen == set(Verdict)

    def test_two_test_gap_and_operator_validity(self, rng):
        n_ver = 0
        for _ in range(1000):
            v = random_subspace(rng)
            c = classify(v)
            op = build_strategy(c, v)
            check_operator(op, v)
            numeric = spectral_gap2(op.omega, v)
            assert abs(op.gap - numeric) < 1e-9
            if c.verdict is Verdict.VERIFIABLE:
                n_ver += 1
                assert abs(op.gap - (1 - c.overlap) / 2) < 1e-12
        assert n_ver > 500

    def test_unverifiable_is_fooled(self, rng):
        for _ in range(100):
            v = local_image(UNVERIFIABLE, rng)
            op = build_strategy(classify(v), v)
            f = op.fooling_state
            assert np.linalg.norm(v.projector @ f) < 1e-10
            assert abs(np.real(np.trace(op.omega @ proj(f))) - 1) < 1e-10

    def test_perfect_rejects_complement(self, rng):
        for _ in range(100):
            v = local_image(PERFECT, rng)
            op = build_strategy(classify(v), v)
            comp = v.complement().basis
            x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            sigma_small = x @ x.conj().T
            sigma_small /= np.trace(sigma_small)
            basis = np.stack(comp, 1)
            sigma = basis @ sigma_small @ basis.conj().T
            assert abs(np.trace(op.omega @ sigma)) < 1e-10


class TestJson:
    def test_roundtrip_pairs(self):
        data = {"basis": [[[1 / S2, 0], [0, 0], [0, 0], [1 / S2, 0]], [[0, 0], [1, 0], [0, 0], [0, 0]]]}
        v = Subspace2.from_json(json.dumps(data))
        assert not v.orthonormalized
        rep = classification_report(v)
        assert rep["verdict"] == "Unverifiable"
        assert rep["gap"] == 0.0
        json.dumps(rep)

    def test_non_orthonormal_flag(self):
        v = Subspace2.from_json({"basis": [[1, 0, 0, 0], [1, 1, 1, 1]]})
        assert v.orthonormalized
        assert classification_report(v)["verdict"] == "Verifiable"

    def test_dependent(self):
        with pytest.raises(LinearDependenceError, match="not linearly independent"):
            Subspace2.from_json({"basis": [[1, 0, 0, 0], [2, 0, 0, 0]]})

    @pytest.mark.parametrize("bad", [{}, {"basis": [[1, 0, 0]]}, {"basis": [[1, 0, 0, 0]]}, {"basis": [["x", 0, 0, 0], [0, 1, 0, 0]]}])
    def test_malformed(self, bad):
        with pytest.raises((ValueError, TypeError)):
            Subspace2.from_json(bad)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0.05, 1.5), st.floats(0, 2 * math.pi))
def test_two_test_gap_family(r, s, phi):
    # complement spanned by |00> and b (x) a, two product states differing in both factors
    a = np.array([math.cos(r), math.sin(r)])
    b = np.array([math.cos(s), math.sin(s) * np.exp(1j * phi)])
    tau2, tau3 = kron(Z, Z), kron(b, a)
    q, _ = np.linalg.qr(np.stack([tau2, tau3], 1))
    full, _ = np.linalg.qr(np.concatenate([q, np.eye(4)], 1))
    v = Subspace2((full[:, 2], full[:, 3]))
    c = classify(v)
    assert c.verdict is Verdict.VERIFIABLE
    assert c.overlap == pytest.approx(abs(math.cos(r) * math.cos(s)), abs=1e-7)
    op = build_strategy(c, v)
    assert abs(op.gap - spectral_gap2(op.omega, v)) < 1e-9


def test_sample_complexity_verifiable():
    # overlap 1/2 gives gap 1/4: 4/eps*ln(1/delta)
    assert sample_complexity_verifiable(0.5, 0.1, 0.05) == math.ceil(40 * math.log(20))
