import math

import numpy as np
import pytest

from conelab import linalg as la
from conelab import supermaps as S
from conelab.cones import PPT, Positive, SepOuterPPT


def _random_channel(din, dout, rng):
    return la.ChoiOperator.from_matrix(la.random_channel_choi_mat(din, dout, rng), din, dout)


def test_identity_supermap_action(rng):
    theta = S.identity_supermap(2, 2)
    assert S.is_superchannel(theta)
    for _ in range(5):
        ch = _random_channel(2, 2, rng)
        assert np.allclose(S.supermap_apply(theta, ch).mat, ch.mat, atol=1e-12)


def test_discard_prepare_gives_fixed_channel(rng):
    sigma = la.random_state(2, rng)
    target = la.replacer_choi(sigma, 2)
    theta = S.discard_prepare_supermap(2, 3, target)
    assert S.is_superchannel(theta)
    for _ in range(3):
        out = S.supermap_apply(theta, _random_channel(2, 3, rng))
        assert np.allclose(out.mat, target.mat, atol=1e-12)


def test_random_superchannels_are_valid_and_map_channels_to_channels(rng):
    for dims in [(2, 2, 2, 2), (2, 3, 3, 2)]:
        theta = S.random_superchannel(*dims, rng)
        assert S.is_superchannel(theta)
        assert np.linalg.eigvalsh(theta.mat)[0] >= -1e-10
        out = S.supermap_apply(theta, _random_channel(dims[0], dims[1], rng))
        assert out.is_channel


def test_apply_matches_pre_post_composition(rng):
    # Theta[Psi] = post o (Psi (x) id_E) o pre with trivial environment
    pre = la.random_unitary(2, rng)
    post = la.random_unitary(2, rng)
    theta = S.pre_post_supermap(la.unitary_choi(pre).mat, la.unitary_choi(post).mat, 2, 2, 2, 2, 1)
    U = la.random_unitary(2, rng)
    got = S.supermap_apply(theta, la.unitary_choi(U))
    assert np.allclose(got.mat, la.unitary_choi(post @ U @ pre).mat, atol=1e-10)


def test_dual_is_involution(rng):
    theta = S.random_superchannel(2, 2, 2, 2, rng)
    assert np.allclose(S.supermap_dual(S.supermap_dual(theta)).mat, theta.mat, atol=1e-12)


def test_dual_pairing(rng):
    # <J_Psi', Theta[Psi]> = <Theta*[Psi'], Psi> on Choi operators
    theta = S.random_superchannel(2, 2, 2, 2, rng)
    dual = S.supermap_dual(theta)
    for _ in range(3):
        a = _random_channel(2, 2, rng)
        b = _random_channel(2, 2, rng)
        lhs = la.inner(b.mat, S.supermap_apply(theta, a).mat)
        rhs = la.inner(S.supermap_apply(dual, b).mat, a.mat)
        assert math.isclose(lhs, rhs, abs_tol=1e-10)


def test_dual_of_superchannel_need_not_preserve_unitality():
    theta = S.classical_copy_supermap(2)
    assert S.is_superchannel(theta)
    dual = S.supermap_dual(theta)
    assert not S.is_unital_preserving(dual)
    assert max(S.unital_preserving_residuals(dual)) > 0.1


def test_superchannel_rejects_non_normalized(rng):
    theta = S.identity_supermap(2, 2)
    bad = S.SupermapChoi.from_matrix(2 * theta.mat, 2, 2, 2, 2)
    assert not S.is_superchannel(bad)


def test_keb_check(rng):
    res = S.keb_check(S.identity_supermap(2, 2))
    assert res.is_superchannel and not res.ppt and res.witness is not None
    dp = S.keb_check(S.discard_prepare_supermap(2, 2, la.depolarizing_choi(2)))
    assert dp.is_superchannel and dp.ppt and dp.witness is None


def test_bipartite_choi_dims():
    ch = la.identity_choi(4)
    J = S.bipartite_channel_choi(ch)
    assert J.dims.labels == S.SUPERMAP_LABELS and J.dims.dims == (2, 2, 2, 2)
    with pytest.raises(ValueError):
        S.bipartite_channel_choi(la.identity_choi(3))
    with pytest.raises(ValueError):
        S.bipartite_channel_choi(ch, dims=(2, 2, 3, 2))


def test_ext_min_entropy_identity_channel():
    for direction in ("B|A", "A|B"):
        res = S.extended_min_entropy(la.identity_choi(4), direction)
        assert math.isclose(res.program_value, 4.0, abs_tol=1e-6)
        assert math.isclose(res.value_bits, -1.0, abs_tol=1e-6)


def test_ext_min_entropy_replacer():
    # a fully depolarizing channel has value 1 bit: <X, I/d (x) ...> is fixed by the marginals
    res = S.extended_min_entropy(la.depolarizing_choi(4), "B|A")
    assert math.isclose(res.value_bits, 1.0, abs_tol=1e-6)


def test_ext_cone_monotone_and_sampling_bound(rng):
    for _ in range(3):
        ch = _random_channel(4, 4, rng)
        pos = S.extended_min_entropy(ch, "B|A", Positive())
        ppt = S.extended_min_entropy(ch, "B|A", PPT())
        sep = S.extended_min_entropy(ch, "B|A", SepOuterPPT())
        assert pos.program_value >= ppt.program_value - 1e-6
        assert ppt.program_value >= sep.program_value - 1e-6
        assert S.ext_sampling_lower_bound(ch, 20, rng) <= pos.program_value + 1e-6


def test_ext_direction_validation():
    with pytest.raises(ValueError):
        S.extended_min_entropy(la.identity_choi(4), "C|A")
