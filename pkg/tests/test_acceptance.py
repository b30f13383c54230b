"""Acceptance criteria 1-14, each at its stated tolerance.

Every test records one ``criterion N: PASS/FAIL`` line (printed in the terminal
summary).  Criteria that fail for documented reasons are strict xfails: the
numbers are computed and reported, and the failing assertion is kept.
"""

import math

import numpy as np
import pytest

from conelab import cones as C
from conelab import linalg as la
from conelab import supermaps as S
from conelab import werner as W
from conelab.cones import CQ, PPT, BlockDiagonal, Diagonal, Positive, SepOuterPPT, TwirlInvariantPositive
from conelab.conversion import compose, preprocessing_feasible, verify_infeasibility
from conelab.entropies import (conditional_entropy, conic_norm, cv_restricted, d_max_restricted,
                               h_max_restricted, h_min_doubly_restricted, h_min_restricted,
                               hartley_cq, hypothesis_testing_restricted, smoothed,
                               umegaki_relative_entropy)
from conelab.linalg import ChoiOperator, DimProfile, HermitianOperator
from conelab.sweep import coherent_dmax_rate, singlet_hmin_rate

from conftest import random_density, random_reference

AB = DimProfile((("A", 2), ("B", 2)))
XY = DimProfile((("X", 2), ("Y", 2)))
ABC = DimProfile((("A", 2), ("B", 2), ("C", 2)))


def op(m, dims=AB):
    return HermitianOperator(dims, m)


def pi(n):
    return np.eye(n) / n


def random_cq(rng, dX=2, dB=2):
    p = rng.dirichlet(np.ones(dX))
    return sum(np.kron(np.diag(np.eye(dX)[x]) * p[x], random_density(dB, rng)) for x in range(dX))


def random_channel(din, dout, rng):
    return ChoiOperator.from_matrix(la.random_channel_choi_mat(din, dout, rng), din, dout)


def mixed_unitary(d, rng, n=3):
    w = rng.dirichlet(np.ones(n))
    return ChoiOperator.from_matrix(sum(wi * la.unitary_choi(la.random_unitary(d, rng)).mat for wi in w), d, d)


# ---------------------------------------------------------------------------


@pytest.mark.xfail(strict=True, reason=(
    "the reference k=1 single-copy Werner norm is below the separable-state value for alpha < 0 "
    "(the product state |00> already exceeds it); agreement holds for alpha >= 0 only"))
def test_c01_werner_single_copy_norm(acceptance):
    worst, worst_pos_alpha, worst_pos = 0.0, 0.0, 0.0
    for d in (2, 3, 4):
        for a in np.linspace(-1.0, 1.0, 21):
            p = W.convert_params(d, alpha=a)
            rho = W.werner_state(p)
            diff = abs(conic_norm(rho, SepOuterPPT()) - W.werner_norm_closed(p, 1))
            worst = max(worst, diff)
            if a >= 0:
                worst_pos_alpha = max(worst_pos_alpha, diff)
            worst_pos = max(worst_pos, abs(conic_norm(rho, Positive()) - W.werner_norm_closed(p, 2)))
    ok = worst <= 1e-6 and worst_pos <= 1e-10
    acceptance(1, ok, f"max|SDP - k=1 form| = {worst:.2e} (alpha >= 0: {worst_pos_alpha:.2e}); "
                      f"max|Pos - k>=2 form| = {worst_pos:.2e}")
    assert worst_pos_alpha <= 1e-6 and worst_pos <= 1e-10
    assert worst <= 1e-6


@pytest.mark.xfail(strict=True, reason=(
    "the d=3 ratio first returns to 1 at lambda = 2/7 = 0.2857 (exact LP vertex), outside 0.300 +- 0.01"))
def test_c02_figure_crossings(acceptance):
    rows = W.nonmultiplicativity_curve(3, 200)
    min_ratio = min(r[4] for r in rows)
    xs = W.ratio_crossings(3, 200)
    near = lambda target: any(abs(x - target) <= 0.01 for x in xs)
    ok = min_ratio >= 1 - 1e-9 and near(0.300) and near(0.667) and len(xs) == 2
    acceptance(2, ok, f"crossings = {[round(float(x), 4) for x in xs]} (targets 0.300, 0.667); "
                      f"min ratio = {min_ratio:.12f}")
    assert min_ratio >= 1 - 1e-9 and near(0.667)
    assert near(0.300)


def test_c03_closed_form_dmax(acceptance):
    worst, worst_u = 0.0, 0.0
    for d in (2, 3):
        ref = HermitianOperator(DimProfile((("A", d), ("B", d))), np.eye(d * d) / d)
        for lam in np.linspace(0.0, 1.0, 21):
            rho = W.werner_state(W.convert_params(d, lam=lam))
            worst = max(worst, abs(d_max_restricted(rho, ref, PPT()).value_bits
                                   - W.werner_dmax_sep_closed(d, lam)))
            worst_u = max(worst_u, abs(umegaki_relative_entropy(rho.mat, ref.mat)
                                       - (W.kappa(d, lam) + math.log2(d))))
    ok = worst <= 1e-6 and worst_u <= 1e-9
    acceptance(3, ok, f"max|SDP - closed form| = {worst:.2e}; max|D - (kappa + log2 d)| = {worst_u:.2e}")
    assert ok


def _gap_instances(rng):
    """200 (program, cone, data) triples covering every entropy program."""
    projs = C.block_projectors_from_groups([[0, 3], [1, 2]], 4)
    general = [Positive(), PPT(), SepOuterPPT(), Diagonal(), CQ("A"), BlockDiagonal(projs),
               TwirlInvariantPositive("werner")]
    physical = [Positive(), PPT(), SepOuterPPT()]

    def dmax(k):
        return d_max_restricted(op(random_density(4, rng)), op(random_reference(4, rng)), k)

    def hmin_ab(k):
        return h_min_restricted(op(random_density(4, rng)), k, "A|B")

    def hmin_ba(k):
        return h_min_restricted(op(random_density(4, rng)), k, "B|A")

    def doubly(k):
        return h_min_doubly_restricted(op(random_density(4, rng)), k)

    def dh(k):
        return hypothesis_testing_restricted(op(random_density(4, rng)), op(random_reference(4, rng)),
                                             float(rng.uniform(0.05, 0.5)), k)

    def smooth(k):
        return smoothed("dmax", op(random_density(4, rng)), float(rng.uniform(0.05, 0.3)), k,
                        Q=op(random_reference(4, rng)))

    def hmax(k):
        psi = la.random_pure_state(8, rng)
        return h_max_restricted(HermitianOperator(ABC, np.outer(psi, psi.conj())), k)

    def norm(k):
        val, rep = conic_norm(op(random_density(4, rng)), k, method="sdp", with_report=True)
        return val, rep

    programs = [("d_max", dmax, general), ("h_min A|B", hmin_ab, general),
                ("h_min B|A", hmin_ba, general), ("doubly h_min", doubly, general),
                ("D_h", dh, general), ("smoothed d_max", smooth, physical),
                ("h_max", hmax, physical), ("cone norm", norm, general)]
    for i in range(200):
        name, fn, ks = programs[i % len(programs)]
        yield name, fn, ks[(i // len(programs)) % len(ks)]


def test_c04_strong_duality(rng, acceptance):
    worst, where, n = 0.0, "", 0
    for name, fn, k in _gap_instances(rng):
        res = fn(k)
        if isinstance(res, tuple):
            val, rep = res
            assert rep.status == "optimal"
            gap = rep.gap / max(1.0, abs(val))
        else:
            assert res.report.status == "optimal"
            gap = abs(res.value_bits - res.dual_bits)
        n += 1
        if gap > worst:
            worst, where = gap, f"{name}/{k.name}"
    ok = n == 200 and worst <= 1e-6
    acceptance(4, ok, f"{n} instances, max duality gap = {worst:.2e} ({where})")
    assert ok


def test_c05_normalization_and_monotonicity(rng, acceptance):
    worst_norm = 0.0
    for _ in range(10):
        P, Q = random_density(4, rng), random_reference(4, rng)
        for k in (Positive(), PPT(), Diagonal()):
            a = d_max_restricted(op(2 * P), op(Q), k).value_bits
            b = d_max_restricted(op(P), op(Q), k).value_bits
            worst_norm = max(worst_norm, abs(a - b - 1.0))
    violations = 0
    chains = [(Diagonal(), PPT(), Positive()), (CQ("A"), PPT(), Positive()),
              (TwirlInvariantPositive("werner"), Positive()), (Diagonal(), CQ("A"), Positive())]
    for i in range(100):
        chain = chains[i % len(chains)]
        P, Q = op(random_density(4, rng)), op(random_reference(4, rng))
        d = [d_max_restricted(P, Q, k).value_bits for k in chain]
        h = [h_min_restricted(P, k).value_bits for k in chain]
        violations += sum(x > y + 1e-7 for x, y in zip(d, d[1:]))
        violations += sum(x < y - 1e-7 for x, y in zip(h, h[1:]))
    ok = worst_norm <= 1e-8 and violations == 0
    acceptance(5, ok, f"max|d(2P,Q) - d(P,Q) - 1| = {worst_norm:.2e}; "
                      f"ordering violations on 100 instances = {violations}")
    assert ok


def test_c06_pure_state_separation(rng, acceptance):
    tau = la.max_entangled(2)
    dppt = d_max_restricted(tau, op(pi(4)), PPT()).value_bits
    D = umegaki_relative_entropy(tau.mat, pi(4))
    worst = -math.inf
    for _ in range(20):
        psi = la.random_pure_state(4, rng)
        P = op(np.outer(psi, psi.conj()))
        assert not PPT().contains(P)[0]
        diff = d_max_restricted(P, op(pi(4)), PPT()).value_bits - umegaki_relative_entropy(P.mat, pi(4))
        worst = max(worst, diff)
    ok = abs(dppt - 1.0) <= 1e-6 and abs(D - 2.0) <= 1e-9 and worst < -1e-6
    acceptance(6, ok, f"d_max^PPT(tau||pi) = {dppt:.9f}, D = {D:.9f}; "
                      f"max (d_max^PPT - D) over 20 pure states = {worst:.4f}")
    assert ok


def test_c07_cq_collapse(rng, acceptance):
    worst_h, worst_dh, hartley_bad = 0.0, 0.0, 0
    for _ in range(50):
        rho = op(random_cq(rng), XY)
        worst_h = max(worst_h, abs(h_min_restricted(rho, PPT()).value_bits
                                   - h_min_restricted(rho, Positive()).value_bits))
    for _ in range(50):
        P, Q = op(random_cq(rng), XY), op(random_cq(rng), XY)
        eps = float(rng.uniform(0.0, 0.5))
        worst_dh = max(worst_dh, abs(hypothesis_testing_restricted(P, Q, eps, PPT()).value_bits
                                     - hypothesis_testing_restricted(P, Q, eps, Positive()).value_bits))
    for _ in range(50):
        dX, dY = rng.integers(2, 4, size=2)
        support = rng.random((dX, dY)) < 0.5
        support[rng.integers(dX), rng.integers(dY)] = True
        p = np.where(support, rng.random((dX, dY)) + 0.1, 0.0)
        p /= p.sum()
        rho = op(np.diag(p.reshape(-1)), DimProfile((("X", int(dX)), ("Y", int(dY)))))
        expected = math.log2(int(support.sum(axis=0).max()))  # log2 max_y |{x : p(x, y) > 0}|
        hartley_bad += hartley_cq(rho) != expected
    ok = worst_h <= 1e-6 and worst_dh <= 1e-6 and hartley_bad == 0
    acceptance(7, ok, f"max|h_min PPT - Pos| = {worst_h:.2e}; max|D_h PPT - Pos| = {worst_dh:.2e}; "
                      f"Hartley mismatches = {hartley_bad}/50")
    assert ok


def test_c08_anti_aep_gaps(acceptance):
    coh = [coherent_dmax_rate(n).value_bits for n in (1, 2, 3)]
    sing = [singlet_hmin_rate(n).value_bits for n in (1, 2)]
    D = umegaki_relative_entropy(la.max_coherent(2).mat, pi(2))
    H = conditional_entropy(la.max_entangled(2))
    ok = (max(map(abs, coh)) <= 1e-6 and max(map(abs, sing)) <= 1e-6
          and abs(D - 1.0) <= 1e-9 and abs(H + 1.0) <= 1e-9)
    acceptance(8, ok, f"(1/n) d_max^Diag = {[f'{v:.1e}' for v in coh]} vs D = {D:.6f}; "
                      f"(1/n) h_min^PPT = {[f'{v:.1e}' for v in sing]} vs H(A|B) = {H:.6f}")
    assert ok


def test_c09_hmax_hmin_duality(rng, acceptance):
    worst = 0.0
    for _ in range(20):
        psi = la.random_pure_state(8, rng)
        rho = HermitianOperator(ABC, np.outer(psi, psi.conj()))
        rab = rho.ptrace("C")
        for k in (Positive(), PPT()):
            worst = max(worst, abs(h_max_restricted(rho, k).value_bits + h_min_restricted(rab, k).value_bits))
    ok = worst <= 1e-5
    acceptance(9, ok, f"max|h_max(A|C) + h_min(A|B)| over 20 states x 2 cones = {worst:.2e}")
    assert ok


def _ppt_pair(rng):
    P = C.random_product_mixture((2, 2), rng)
    P /= np.trace(P).real
    w = rng.uniform(0.2, 0.5)
    Q = C.random_product_mixture((2, 2), rng)
    Q = (1 - w) * Q / np.trace(Q).real + w * pi(4)
    return P, Q


def test_c10_additivity(rng, acceptance):
    two = DimProfile((("A1", 2), ("B1", 2), ("A2", 2), ("B2", 2)))
    order = ["A1", "A2", "B1", "B2"]
    cut = PPT(("B1", "B2"))
    worst_ppt = 0.0
    for _ in range(20):
        (P, Q), (P2, Q2) = _ppt_pair(rng), _ppt_pair(rng)
        assert all(PPT().contains(x, dims=AB)[0] for x in (P, Q, P2, Q2))
        PP = HermitianOperator(two, np.kron(P, P2)).permute(order)
        QQ = HermitianOperator(two, np.kron(Q, Q2)).permute(order)
        joint = d_max_restricted(PP, QQ, cut).value_bits
        parts = d_max_restricted(op(P), op(Q), PPT()).value_bits + d_max_restricted(op(P2), op(Q2), PPT()).value_bits
        worst_ppt = max(worst_ppt, abs(joint - parts))
    worst_dbl = 0.0
    for _ in range(20):
        r1, r2 = random_density(4, rng), random_density(4, rng)
        joint = HermitianOperator(two, np.kron(r1, r2)).permute(order)
        both = h_min_doubly_restricted(joint, Positive(), a_labels=("A1", "A2")).value_bits
        parts = h_min_doubly_restricted(op(r1)).value_bits + h_min_doubly_restricted(op(r2)).value_bits
        worst_dbl = max(worst_dbl, abs(both - parts))
    ok = worst_ppt <= 1e-5 and worst_dbl <= 1e-5
    acceptance(10, ok, f"PPT d_max additivity max dev = {worst_ppt:.2e}; "
                       f"doubly h_min (Pos) additivity max dev = {worst_dbl:.2e}")
    assert ok


def test_c11_communication_value(acceptance):
    J_id, J_dep = la.identity_choi(2), la.depolarizing_choi(2)
    vals = {"Pos(id)": cv_restricted(J_id, Positive()), "PPT(id)": cv_restricted(J_id, PPT()),
            "Pos(dep)": cv_restricted(J_dep, Positive()), "PPT(dep)": cv_restricted(J_dep, PPT())}
    targets = {"Pos(id)": 4.0, "PPT(id)": 2.0, "Pos(dep)": 1.0, "PPT(dep)": 1.0}
    worst = max(abs(vals[k] - targets[k]) for k in vals)

    # derived optimizers: feasible (Tr_A X = I_B, X in K) and attaining the targets
    def feasible(X, k):
        return k.contains(X, dims=AB)[0] and np.allclose(la.ptrace(X, [2, 2], [0]), np.eye(2), atol=1e-12)
    phi = J_id.mat
    diag = np.diag([1.0, 0.0, 0.0, 1.0])
    flat = np.eye(4) / 2
    points = [(phi, Positive(), J_id, 4.0), (diag, PPT(), J_id, 2.0), (flat, PPT(), J_dep, 1.0)]
    derived_ok = all(feasible(X, k) and math.isclose(la.inner(J.mat, X), t, abs_tol=1e-12)
                     for X, k, J, t in points)
    ok = worst <= 1e-6 and derived_ok
    acceptance(11, ok, f"values = { {k: round(v, 9) for k, v in vals.items()} }; "
                       f"max dev = {worst:.2e}; derived optimizers feasible = {derived_ok}")
    assert ok


def test_c12_conversion(rng, acceptance):
    worst, n_feasible = 0.0, 0
    for _ in range(20):
        psi = random_channel(2, 2, rng)
        phi = compose(psi, mixed_unitary(2, rng))
        cert = preprocessing_feasible(phi, psi)
        n_feasible += cert.feasible
        worst = max(worst, cert.residual)
    n_obstructed = 0
    for _ in range(5):
        psi = mixed_unitary(2, rng)
        sigma = random_density(2, rng)  # sigma != pi: the replacer is not unital
        cert = preprocessing_feasible(la.replacer_choi(sigma, 2), psi)
        n_obstructed += (not cert.feasible) and cert.status == "infeasible" and verify_infeasibility(cert)
    ok = n_feasible == 20 and worst <= 1e-5 and n_obstructed == 5
    acceptance(12, ok, f"constructed: {n_feasible}/20 feasible, max residual = {worst:.2e}; "
                       f"unitality-obstructed: {n_obstructed}/5 infeasible with verified certificate")
    assert ok


def test_c13_extended_min_entropy(rng, acceptance):
    mono_bad, sample_bad = 0, 0
    for _ in range(10):
        ch = random_channel(4, 4, rng)
        for direction in ("B|A", "A|B"):
            pos = S.extended_min_entropy(ch, direction, Positive()).program_value
            ppt = S.extended_min_entropy(ch, direction, PPT()).program_value
            mono_bad += ppt > pos + 1e-6
        pos = S.extended_min_entropy(ch, "B|A", Positive()).program_value
        sample_bad += S.ext_sampling_lower_bound(ch, 20, rng) > pos + 1e-6
    ident = S.extended_min_entropy(la.identity_choi(4), "B|A").value_bits
    agree = abs(ident - (-3.0)) <= 1e-5
    ok = mono_bad == 0 and sample_bad == 0
    acceptance(13, ok, f"monotonicity violations = {mono_bad}/20, sampling violations = {sample_bad}/10; "
                       f"identity channel = {ident:.9f} bits vs predicted -3 "
                       f"({'agrees' if agree else 'disagreement recorded as a finding'})")
    assert ok


def test_c14_smoothing(rng, acceptance):
    worst_zero, bad = 0.0, 0
    grid = (0.0, 0.05, 0.1, 0.2, 0.3)
    for i in range(20):
        k = (Positive(), PPT())[i % 2]
        rho, q = op(random_density(4, rng)), op(random_reference(4, rng))
        worst_zero = max(worst_zero,
                         abs(smoothed("dmax", rho, 0.0, k, Q=q).value_bits - d_max_restricted(rho, q, k).value_bits),
                         abs(smoothed("hmin", rho, 0.0, k).value_bits - h_min_restricted(rho, k).value_bits))
        dm = [smoothed("dmax", rho, e, k, Q=q).value_bits for e in grid]
        hm = [smoothed("hmin", rho, e, k).value_bits for e in grid]
        bad += any(b > a + 1e-6 for a, b in zip(dm, dm[1:]))
        bad += any(b < a - 1e-6 for a, b in zip(hm, hm[1:]))
    ok = worst_zero <= 1e-6 and bad == 0
    acceptance(14, ok, f"max|eps=0 - unsmoothed| = {worst_zero:.2e}; non-monotone sequences = {bad}/40")
    assert ok
