import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conelab import linalg as la
from conelab.linalg import ChoiOperator, DimProfile, HermitianOperator, KrausSet

from conftest import random_density

seeds = st.integers(0, 2**32 - 1)


# -- DimProfile / HermitianOperator -------------------------------------------

def test_dimprofile_invariants():
    p = DimProfile((("A", 2), ("B", 3)))
    assert p.total == 6 and p.labels == ("A", "B") and p.dims == (2, 3)
    with pytest.raises(ValueError):
        DimProfile((("A", 2), ("A", 3)))
    with pytest.raises(ValueError):
        DimProfile((("A", 0),))


def test_hermitian_operator_symmetrizes_small_deviation():
    m = np.array([[1.0, 1e-13], [0.0, 1.0]])
    op = HermitianOperator(DimProfile.auto([2]), m)
    assert np.allclose(op.mat, op.mat.conj().T, atol=0)


def test_hermitian_operator_warns_on_large_deviation():
    m = np.array([[1.0, 1e-6], [0.0, 1.0]])
    with pytest.warns(RuntimeWarning):
        HermitianOperator(DimProfile.auto([2]), m)


def test_hermitian_operator_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        HermitianOperator(DimProfile.auto([2, 2]), np.eye(3))


# -- vec / Choi / Kraus -----------------------------------------------------------

@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_vec_roundtrip(seed, r, c):
    M = np.random.default_rng(seed).normal(size=(r, c)) + 1j
    assert np.array_equal(la.unvec(la.vec(M), (r, c)), M)


@given(seeds)
def test_vec_identity(seed):
    rng = np.random.default_rng(seed)
    X0, Y, X1 = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(np.kron(X1.T, X0) @ la.vec(Y), la.vec(X0 @ Y @ X1), atol=1e-10)


def test_identity_channel_choi_is_phi_plus():
    j = la.identity_choi(3)
    assert np.allclose(j.mat, la.phi_plus(3).mat)
    assert math.isclose(j.op.trace(), 3.0)


def test_completely_depolarizing_choi():
    j = la.depolarizing_choi(3)
    assert np.allclose(j.mat, np.kron(np.eye(3), np.eye(3) / 3))


def test_apply_identity_choi(rng):
    x = random_density(3, rng)
    assert np.allclose(la.apply_via_choi(la.identity_choi(3), x).mat, x, atol=1e-12)


def test_choi_kraus_consistency_100_random_maps():
    rng = np.random.default_rng(7)
    for _ in range(100):
        din, dout = rng.integers(1, 5, size=2)
        nk = int(rng.integers(1, 4))
        ks = KrausSet(tuple(rng.normal(size=(dout, din)) + 1j * rng.normal(size=(dout, din))
                            for _ in range(nk)))
        x = random_density(int(din), rng)
        assert np.allclose(la.apply_via_choi(la.vec_choi(ks), x).mat, ks.apply(x), atol=1e-10)


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError):
        la.apply_via_choi(la.identity_choi(2), np.eye(3))


# -- partial operations -----------------------------------------------------------

def test_partial_transpose_involution(rng):
    x = la.as_operator(random_density(6, rng), dims=[2, 3])
    assert np.allclose(x.ptranspose(1).ptranspose(1).mat, x.mat)
    assert math.isclose(x.ptranspose(0).trace(), x.trace(), abs_tol=1e-12)


def test_partial_transpose_of_tau2():
    w = np.linalg.eigvalsh(la.partial_transpose(la.max_entangled(2), "B").mat)
    assert np.allclose(w, [-0.5, 0.5, 0.5, 0.5])
    assert np.allclose(la.partial_transpose(la.max_entangled(3), "B").mat, la.swap_matrix(3) / 3)


def test_partial_trace_of_phi_plus():
    out = la.partial_trace(la.phi_plus(3), "A")
    assert out.dims.labels == ("B",)
    assert np.allclose(out.mat, np.eye(3))


def test_unknown_factor_label():
    with pytest.raises((KeyError, ValueError)):
        la.partial_trace(la.phi_plus(2), "C")


def test_swap_operator_is_permutation():
    F = la.swap_operator(3).mat
    a, b = np.eye(3)[0], np.eye(3)[2]
    assert np.allclose(F @ np.kron(a, b), np.kron(b, a))
    assert np.allclose(F @ F, np.eye(9))


# -- adjoint ----------------------------------------------------------------------

def test_adjoint_of_identity_channel():
    assert np.allclose(la.adjoint_choi(la.identity_choi(2)).mat, la.identity_choi(2).mat)


def test_adjoint_replacer_duality(rng):
    sigma = random_density(3, rng)
    j = la.replacer_choi(sigma, 2)
    ja = la.adjoint_choi(j)
    for _ in range(10):
        X = random_density(2, rng)
        Y = la.herm(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
        lhs = la.inner(Y, j.apply(X))
        rhs = la.inner(ja.apply(Y), X)
        assert abs(lhs - rhs) <= 1e-10
        assert np.allclose(ja.apply(Y), la.inner(sigma, Y) * np.eye(2), atol=1e-10)


def test_adjoint_of_unitary(rng):
    U = la.random_unitary(3, rng)
    assert np.allclose(la.adjoint_choi(la.unitary_choi(U)).mat, la.unitary_choi(U.conj().T).mat, atol=1e-12)


def test_adjoint_involution_and_flag_exchange(rng):
    j = la.random_channel(2, 3, rng)
    jj = la.adjoint_choi(la.adjoint_choi(j))
    assert np.allclose(jj.mat, j.mat)
    ja = la.adjoint_choi(j)
    # TP of j becomes unitality of the adjoint
    assert np.allclose(la.ptrace(ja.mat, (ja.din, ja.dout), [0]), np.eye(2), atol=1e-10)


# -- twirls / pinchings ---------------------------------------------------------------

def test_werner_twirl_fixes_swap_and_werner_states():
    F = la.swap_operator(3)
    assert np.allclose(la.werner_twirl(F).mat, F.mat)
    from conelab.werner import convert_params, werner_state
    for lam in np.linspace(0, 1, 5):
        r = werner_state(convert_params(3, lam=lam))
        assert np.allclose(la.werner_twirl(r).mat, r.mat, atol=1e-12)


@given(seeds)
def test_werner_twirl_properties(seed):
    rng = np.random.default_rng(seed)
    d = 3
    x = la.herm(rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9)))
    F = la.swap_matrix(d)
    t = la.werner_twirl_mat(x, d)
    # preserves Tr and Tr F, lies in span{I, F}, idempotent, self-adjoint
    assert math.isclose(np.trace(t).real, np.trace(x).real, abs_tol=1e-10)
    assert math.isclose(la.inner(F, t), la.inner(F, x), abs_tol=1e-10)
    coef = np.linalg.lstsq(np.stack([np.eye(9).ravel(), F.ravel()], 1), t.ravel(), rcond=None)[0]
    assert np.allclose(coef[0] * np.eye(9) + coef[1] * F, t, atol=1e-10)
    assert np.allclose(la.werner_twirl_mat(t, d), t, atol=1e-10)
    y = la.herm(rng.normal(size=(9, 9)))
    assert math.isclose(la.inner(y, t), la.inner(la.werner_twirl_mat(y, d), x), abs_tol=1e-9)
    # fixed point iff in span{I, F}
    assert not np.allclose(t, x, atol=1e-6)


def test_pinching_computational_is_dephasing(rng):
    x = random_density(4, rng)
    assert np.allclose(la.pinching_mat(x, la.computational_projectors(4)), np.diag(np.diag(x)))


def test_pinching_commutes_with_projectors(rng):
    projs = [np.diag([1, 1, 0, 0]).astype(complex), np.diag([0, 0, 1, 1]).astype(complex)]
    x = random_density(4, rng)
    p = la.pinching_mat(x, projs)
    for P in projs:
        assert np.allclose(P @ p, p @ P)
    assert np.allclose(la.pinching_mat(p, projs), p)


def test_pinching_rejects_incomplete_family():
    with pytest.raises(ValueError):
        la.pinching_mat(np.eye(2), [np.diag([1.0, 0.0])])


# -- fidelity ---------------------------------------------------------------------

def test_fidelity_examples(rng):
    r = random_density(3, rng)
    assert math.isclose(la.fidelity(r, r), 1.0, abs_tol=1e-7)
    assert la.purified_distance(r, r) <= 1e-3
    e0, e1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert la.fidelity(e0, e1) == 0.0 and la.purified_distance(e0, e1) == 1.0
    assert math.isclose(la.fidelity(np.eye(2) / 2, e0), 1 / math.sqrt(2), abs_tol=1e-12)
    assert math.isclose(la.purified_distance(np.eye(2) / 2, e0), 1 / math.sqrt(2), abs_tol=1e-12)


def test_fidelity_rejects_non_psd():
    with pytest.raises(ValueError):
        la.fidelity(np.diag([1.5, -0.5]), np.eye(2) / 2)


@given(seeds)
def test_fuchs_van_de_graaf(seed):
    rng = np.random.default_rng(seed)
    r, s = random_density(3, rng), random_density(3, rng)
    delta = la.generalized_trace_distance(r, s)
    P = la.purified_distance(r, s)
    assert delta <= P + 1e-9 and P <= math.sqrt(2 * delta) + 1e-9
    assert math.isclose(la.fidelity(r, s), la.fidelity(s, r), abs_tol=1e-9)


# -- constructors ---------------------------------------------------------------------

def test_rank_one_constructors():
    for x in (la.max_entangled(3).mat, la.max_coherent(3).mat):
        w = np.linalg.eigvalsh(x)
        assert math.isclose(w[-1], 1.0, abs_tol=1e-12) and np.allclose(w[:-1], 0, atol=1e-12)
    t = la.max_entangled(2)
    assert np.allclose(la.support_projector(t).mat, t.mat)


def test_pio_schmidt_numbers():
    d = 3
    ident = list(range(d))
    rank1 = [np.diag(np.eye(d)[i]) for i in range(d)]
    _, sn = la.pio_choi([ident] * d, [np.zeros(d)] * d, rank1)
    assert sn == 1
    j, sn = la.pio_choi([[1, 2, 0]], [np.zeros(d)], [np.eye(d)])
    assert sn == 3 and j.is_channel
    with pytest.raises(ValueError):
        la.pio_choi([ident], [np.zeros(d)], [np.diag([1.0, 1.0, 0.0])])
