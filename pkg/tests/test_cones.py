import math

import numpy as np
import pytest

from conelab import cones as C
from conelab import linalg as la
from conelab.cones import PPT, CQ, BlockDiagonal, Diagonal, Positive, SepOuterPPT
from conelab.engine import ConicProgram, solve
from conelab.linalg import DimProfile, HermitianOperator
from conelab.werner import convert_params, werner_state

AB = DimProfile((("A", 2), ("B", 2)))
BLOCK = BlockDiagonal(C.block_projectors_from_groups([[0, 1], [2, 3]], 4))
ALL_2x2 = [Positive(), PPT(), SepOuterPPT(), Diagonal(), CQ("A"), BLOCK,
           C.TwirlInvariantPositive("werner")]
# (K1, K2) with K1 contained in K2
INCLUSIONS = [(Diagonal(), Positive()), (Diagonal(), PPT()), (Diagonal(), CQ("A")),
              (CQ("A"), PPT()), (PPT(), Positive()), (Diagonal(), BLOCK), (BLOCK, Positive()),
              (C.TwirlInvariantPositive("werner"), Positive())]


def _feasible(cone, x, dual=False):
    """Solve the emitted constraint system with the operator pinned to ``x``."""
    prog = ConicProgram("min")
    X = prog.hermitian(4, "X", dims=(2, 2))
    prog.add_eq(X, x)
    if dual:
        cone.dual_constraints(prog, X, AB)
    else:
        cone.membership_constraints(prog, X, AB)
    prog.minimize(X.trace() * 0.0)
    return solve(prog).status == "optimal"


def test_unknown_variant_rejected():
    with pytest.raises(ValueError):
        C.ConeSpec("sep")
    with pytest.raises(ValueError):
        BlockDiagonal([np.diag([1.0, 0.0, 0.0, 0.0])])


def test_ppt_cut_must_be_bipartition():
    three = DimProfile((("A", 2), ("B", 2), ("C", 2)))
    with pytest.raises(ValueError):
        PPT().transposed_indices(three)
    with pytest.raises(ValueError):
        PPT(("A", "B", "C")).transposed_indices(three)
    with pytest.raises(ValueError):
        C.parse_cut("A:A", AB)


def test_dimension_mismatch():
    prog = ConicProgram()
    X = prog.hermitian(3)
    with pytest.raises(ValueError):
        Positive().membership_constraints(prog, X, AB)


@pytest.mark.parametrize("cone", ALL_2x2, ids=lambda k: k.name)
def test_scaled_identity_in_every_cone(cone):
    for a in (1e-3, 1.0, 7.5):
        assert cone.contains(a * np.eye(4), dims=AB)[0]
        assert _feasible(cone, a * np.eye(4))


def test_emission_matches_direct_check(rng):
    tau = la.max_entangled(2).mat
    dephased = np.diag(np.diag(tau))
    for cone, x, expected in [(Positive(), tau, True), (PPT(), tau, False), (PPT(), dephased, True),
                              (Diagonal(), tau, False), (Diagonal(), dephased, True),
                              (CQ("A"), tau, False), (CQ("A"), np.kron(np.diag([0.3, 0.7]), np.eye(2)), True)]:
        assert cone.contains(x, dims=AB)[0] == expected
        assert _feasible(cone, x) == expected


@pytest.mark.parametrize("d", [2, 3])
def test_tau_not_ppt_with_witness(d):
    ok, w = PPT().contains(la.max_entangled(d))
    assert not ok and math.isclose(w["eigenvalue"], -1 / d, abs_tol=1e-12)
    v = w["vector"]
    pt = la.ptranspose(la.max_entangled(d).mat, (d, d), [1])
    assert math.isclose(np.real(v.conj() @ pt @ v), -1 / d, abs_tol=1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_werner_sep_ppt_iff_half(d):
    for lam in np.linspace(0, 1, 21):
        rho = werner_state(convert_params(d, lam=lam))
        assert SepOuterPPT().contains(rho)[0] == (lam >= 0.5 - 1e-12)


def test_diagonal_dual_example():
    y = np.array([[1.0, 5.0], [5.0, 1.0]])
    one = DimProfile.auto([2])
    assert Diagonal().dual_contains(y, dims=one)
    rng = np.random.default_rng(3)
    ks = rng.uniform(0, 1, size=(10_000, 2))
    assert np.min(ks @ np.diag(y)) >= 0  # <y, diag(k)> only sees the diagonal
    assert not Positive().dual_contains(y, dims=one)


def test_dual_emission_equals_dual_cone(rng):
    for cone in (Positive(), PPT(), Diagonal(), CQ("A"), BLOCK, C.TwirlInvariantPositive("werner")):
        for _ in range(3):
            y = C.sample_dual_member(cone, AB, rng)
            assert cone.dual_contains(y, dims=AB)
            assert _feasible(cone, y, dual=True)
    # -I is in no dual cone; a PT-only operator is in PPT* but not Pos*
    assert not _feasible(PPT(), -np.eye(4), dual=True)
    F = la.swap_matrix(2)
    assert _feasible(PPT(), F, dual=True) and not _feasible(Positive(), F, dual=True)


def test_self_consistency(rng):
    for cone in ALL_2x2:
        for _ in range(10):
            x = C.sample_member(cone, AB, rng)
            y = C.sample_dual_member(cone, AB, rng)
            assert cone.contains(x, dims=AB)[0]
            assert la.inner(x, y) >= -1e-8


def test_duality_order_reversal():
    rng = np.random.default_rng(11)
    for k1, k2 in INCLUSIONS:
        for _ in range(100):
            x = C.sample_member(k1, AB, rng)
            assert k2.contains(x, dims=AB, tol=1e-7)[0]
        for _ in range(10):
            y = C.sample_dual_member(k2, AB, rng)
            assert k1.dual_contains(y, dims=AB, tol=1e-7)


@pytest.mark.parametrize("d", [2, 3])
def test_support_bounds(d):
    rng = np.random.default_rng(5)
    dims = DimProfile((("A", d), ("B", d)))
    tau, vs = la.max_entangled(d).mat, la.max_coherent(d).mat
    for _ in range(100):
        x = C.sample_member(SepOuterPPT(), dims, rng)
        assert la.inner(tau, x) <= np.trace(x).real / d + 1e-8
        x = C.sample_member(Diagonal(), DimProfile.auto([d]), rng)
        assert la.inner(vs, x) <= np.trace(x).real / d + 1e-8


def test_local_unitary_invariance(rng):
    x = np.diag([0.4, 0.1, 0.2, 0.3]).astype(complex)  # PPT and diagonal
    U = np.kron(la.random_unitary(2, rng), la.random_unitary(2, rng))
    y = U @ x @ U.conj().T
    for cone in (PPT(), SepOuterPPT()):
        assert cone.contains(y, dims=AB)[0]
    assert not Diagonal().contains(y, dims=AB)[0]  # negative test
    tau = la.max_entangled(2).mat
    assert not PPT().contains(U @ tau @ U.conj().T, dims=AB)[0]


def test_from_cli():
    assert C.from_cli("ppt", AB, "A:B") == PPT(("B",))
    assert C.from_cli("cq", AB, "B:A") == CQ("B")
    assert C.from_cli("block", AB, blocks="0,1;2,3").variant == "block"
    with pytest.raises(ValueError):
        C.from_cli("block", AB)
    with pytest.raises(ValueError):
        C.from_cli("nope", AB)


def test_incoherence_rank_cone_is_diagonal():
    assert C.incoherence_rank_cone(2) == Diagonal()
    with pytest.raises(ValueError):
        C.incoherence_rank_cone(0)
