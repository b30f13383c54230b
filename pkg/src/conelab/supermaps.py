"""Supermap Choi calculus and the extended conditional min-entropy.

A supermap ``Theta`` takes maps ``A0 -> A1`` to maps ``B0 -> B1``.  Its Choi
operator lives on ``A0 (x) A1 (x) B0 (x) B1`` (in that factor order) and is the
ordinary Choi operator of the map ``Delta_Theta`` sending Choi operators to
Choi operators::

    J_Theta = sum_u e_u (x) J_{Theta[E_u]},     J_{Theta[Psi]} = Tr_A[J_Theta (J_Psi^T (x) I_B)]

with ``e_u`` the matrix units of ``A0 (x) A1`` and ``E_u`` the maps whose Choi
operators they are.  Superchannels are characterized by ``J >= 0`` together
with the marginal conditions emitted by :func:`superchannel_constraints`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .cones import PPT, ConeSpec, Positive, SepOuterPPT
from .engine import ConicProgram, MatExpr, solve
from .entropies import EntropyResult, _log2, _require_optimal
from .linalg import ChoiOperator, DimProfile, HermitianOperator

MARGINAL_TOL = 1e-8
SUPERMAP_LABELS = ("A0", "A1", "B0", "B1")

# Marginal conditions, written on factor positions (0, 1, 2, 3) = (A0, A1, B0, B1).
# ("identity", keep): Tr_{rest} X = I on the kept factors.
# ("product", keep, inner, free): Tr_{rest} X = (Tr_{keep \ inner} X) (x) I_free / d_free,
#   where ``free = keep \ inner`` is a single factor.
_SUPERCHANNEL = (("identity", (1, 2)), ("product", (0, 1, 2), (0, 2), 1))
_UNITAL_PRESERVING = (("identity", (0, 3)), ("product", (0, 1, 3), (1, 3), 0))
# Dual-of-superchannel set (superchannel conditions with the A and B roles exchanged).
_DUAL_SUPERCHANNEL = (("identity", (0, 3)), ("product", (0, 2, 3), (0, 2), 3))


def supermap_profile(dA0: int, dA1: int, dB0: int, dB1: int,
                     labels: Sequence[str] = SUPERMAP_LABELS) -> DimProfile:
    return DimProfile(tuple(zip(labels, (dA0, dA1, dB0, dB1))))


@dataclass(frozen=True)
class SupermapChoi:
    """Choi operator of a supermap on factors ``[A0, A1, B0, B1]`` (positional roles)."""

    op: HermitianOperator

    def __post_init__(self):
        if len(self.op.dims.factors) != 4:
            raise ValueError(
                f"a supermap Choi needs four factors [A0, A1, B0, B1], got {self.op.dims.labels}"
            )

    @classmethod
    def from_matrix(cls, m: np.ndarray, dA0: int, dA1: int, dB0: int, dB1: int,
                    labels: Sequence[str] = SUPERMAP_LABELS) -> "SupermapChoi":
        return cls(HermitianOperator(supermap_profile(dA0, dA1, dB0, dB1, labels), m))

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(self.op.dims.dims)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.op.dims.labels

    @property
    def d_in(self) -> int:
        return self.dims[0] * self.dims[1]

    @property
    def d_out(self) -> int:
        return self.dims[2] * self.dims[3]


def _as_supermap(j) -> SupermapChoi:
    if isinstance(j, SupermapChoi):
        return j
    if isinstance(j, HermitianOperator):
        return SupermapChoi(j)
    raise TypeError("expected a SupermapChoi or a four-factor HermitianOperator")


def _check_dims(dims: Sequence[int]) -> tuple[int, int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4 or min(dims) < 1:
        raise ValueError(f"supermap dims must be four positive integers, got {dims}")
    return dims


# ---------------------------------------------------------------------------
# marginal conditions
# ---------------------------------------------------------------------------


def _rest(keep: Sequence[int]) -> tuple[int, ...]:
    return tuple(i for i in range(4) if i not in keep)


def _emit(prog: ConicProgram, X: MatExpr, dims: Sequence[int], spec, tag: str) -> list[str]:
    dims = _check_dims(dims)
    if X.n != int(np.prod(dims)):
        raise ValueError(f"variable of size {X.n} does not match supermap dims {dims}")
    names = []
    for k, cond in enumerate(spec):
        name = f"{tag}[{k}]"
        keep = cond[1]
        lhs = X.ptrace(dims, _rest(keep))
        kdims = tuple(dims[i] for i in keep)
        if cond[0] == "identity":
            prog.add_eq(lhs, np.eye(int(np.prod(kdims))), name=name)
        else:
            _, _, inner, free = cond
            inner_marg = X.ptrace(dims, _rest(inner))
            pos = tuple(keep.index(i) for i in inner)
            rhs = inner_marg.embed(kdims, pos) * (1.0 / dims[free])
            prog.add_eq(lhs - rhs, 0.0, name=name)
        names.append(name)
    return names


def _residuals(m: np.ndarray, dims: Sequence[int], spec) -> list[float]:
    dims = _check_dims(dims)
    if m.shape != (int(np.prod(dims)),) * 2:
        raise ValueError(f"matrix of shape {m.shape} does not match supermap dims {dims}")
    out = []
    for cond in spec:
        keep = cond[1]
        lhs = la.ptrace(m, dims, list(_rest(keep)))
        kdims = [dims[i] for i in keep]
        if cond[0] == "identity":
            rhs = np.eye(lhs.shape[0])
        else:
            _, _, inner, free = cond
            inner_marg = la.ptrace(m, dims, list(_rest(inner)))
            # place the inner marginal and the identity in the kept factor order
            parts = [inner_marg, np.eye(dims[free]) / dims[free]]
            order_now = list(inner) + [free]
            rhs = la.permute_systems(np.kron(*parts), [dims[i] for i in order_now],
                                     [order_now.index(i) for i in keep])
        out.append(float(np.max(np.abs(lhs - rhs))))
    return out


def superchannel_constraints(prog: ConicProgram, X: MatExpr, dims: Sequence[int],
                             tag: str = "superchannel") -> list[str]:
    """Emit ``X^{A1 B0} = I`` and ``X^{A0 A1 B0} = X^{A0 B0} (x) I_{A1}/d_{A1}``."""
    return _emit(prog, X, dims, _SUPERCHANNEL, tag)


def unital_preserving_constraints(prog: ConicProgram, X: MatExpr, dims: Sequence[int],
                                  tag: str = "unital_preserving") -> list[str]:
    """Emit ``X^{A0 B1} = I`` and ``X^{A0 A1 B1} = X^{A1 B1} (x) I_{A0}/d_{A0}``."""
    return _emit(prog, X, dims, _UNITAL_PRESERVING, tag)


def dual_superchannel_constraints(prog: ConicProgram, X: MatExpr, dims: Sequence[int],
                                  tag: str = "dual_superchannel") -> list[str]:
    """Superchannel conditions with the A and B roles exchanged.

    ``X^{A0 B1} = I`` and ``X^{A0 B0 B1} = X^{A0 B0} (x) I_{B1}/d_{B1}``: exactly the
    supermaps whose dual is a superchannel ``B -> A``.
    """
    return _emit(prog, X, dims, _DUAL_SUPERCHANNEL, tag)


def superchannel_residuals(j) -> list[float]:
    return _residuals(_as_supermap(j).mat, _as_supermap(j).dims, _SUPERCHANNEL)


def unital_preserving_residuals(j) -> list[float]:
    return _residuals(_as_supermap(j).mat, _as_supermap(j).dims, _UNITAL_PRESERVING)


def is_superchannel(j, tol: float = MARGINAL_TOL) -> bool:
    j = _as_supermap(j)
    return j.op.is_psd(tol) and max(superchannel_residuals(j)) <= tol


def is_unital_preserving(j, tol: float = MARGINAL_TOL) -> bool:
    return max(unital_preserving_residuals(j)) <= tol


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def supermap_from_function(fn, dA0: int, dA1: int, dB0: int, dB1: int,
                           labels: Sequence[str] = SUPERMAP_LABELS) -> SupermapChoi:
    """Choi of the supermap whose action on Choi operators is ``fn: J_Psi -> J_Theta[Psi]``."""
    m = la.choi_from_function(fn, dA0 * dA1, dB0 * dB1)
    return SupermapChoi.from_matrix(m, dA0, dA1, dB0, dB1, labels)


def identity_supermap(dA0: int, dA1: int) -> SupermapChoi:
    return supermap_from_function(lambda E: E, dA0, dA1, dA0, dA1)


def discard_prepare_supermap(dA0: int, dA1: int, channel: ChoiOperator) -> SupermapChoi:
    """Ignore the input channel and run ``channel`` instead: ``J = I_A/d_{A0} (x) J_channel``."""
    m = np.kron(np.eye(dA0 * dA1) / dA0, channel.mat)
    return SupermapChoi.from_matrix(m, dA0, dA1, channel.din, channel.dout)


def pre_post_supermap(pre: np.ndarray, post: np.ndarray, dA0: int, dA1: int, dB0: int,
                      dB1: int, dE: int) -> SupermapChoi:
    """``Theta[Psi] = post o (Psi (x) id_E) o pre`` from Choi matrices.

    ``pre``: ``B0 -> A0 (x) E``; ``post``: ``A1 (x) E -> B1``.
    """
    P = np.asarray(pre).reshape(dB0, dA0, dE, dB0, dA0, dE)
    Q = np.asarray(post).reshape(dA1, dE, dB1, dA1, dE, dB1)
    # J[a0 a1 b0 b1, a0' a1' b0' b1'] = sum_{e e'} P[b0 a0 e, b0' a0' e'] Q[a1 e b1, a1' e' b1']
    J = np.einsum("xaeyAf,bezBfw->abxzAByw", P, Q)
    n = dA0 * dA1 * dB0 * dB1
    return SupermapChoi.from_matrix(J.reshape(n, n), dA0, dA1, dB0, dB1)


def classical_copy_supermap(d: int) -> SupermapChoi:
    """Superchannel that measures the input in the computational basis, keeps a copy in
    memory, feeds the outcome to the channel, discards the channel output and re-emits
    the memory.  Its dual is not unital-preserving."""
    J = sum(
        la.kron(np.diag(np.eye(d)[i]), np.eye(d), np.diag(np.eye(d)[i]), np.diag(np.eye(d)[i]))
        for i in range(d)
    )
    return SupermapChoi.from_matrix(J, d, d, d, d)


def random_superchannel(dA0: int, dA1: int, dB0: int, dB1: int, rng: np.random.Generator,
                        dE: int | None = None) -> SupermapChoi:
    dE = dA0 * dB0 if dE is None else dE
    pre = la.random_channel_choi_mat(dB0, dA0 * dE, rng)
    post = la.random_channel_choi_mat(dA1 * dE, dB1, rng)
    return pre_post_supermap(pre, post, dA0, dA1, dB0, dB1, dE)


# ---------------------------------------------------------------------------
# dual and action
# ---------------------------------------------------------------------------


def supermap_dual(j) -> SupermapChoi:
    """Choi of the dual (adjoint) supermap: complex conjugate of the A<->B block swap."""
    j = _as_supermap(j)
    labels = j.labels
    swapped = j.op.permute([labels[2], labels[3], labels[0], labels[1]])
    return SupermapChoi(HermitianOperator(swapped.dims, swapped.mat.conj()))


def supermap_apply(j, channel: ChoiOperator) -> ChoiOperator:
    """``J_{Theta[Psi]} = Tr_A[J_Theta (J_Psi^T (x) I_B)]``."""
    j = _as_supermap(j)
    dA0, dA1, dB0, dB1 = j.dims
    if (channel.din, channel.dout) != (dA0, dA1):
        raise ValueError(
            f"channel is {channel.din}->{channel.dout}, supermap expects {dA0}->{dA1}"
        )
    out = la.apply_choi_mat(j.mat, dA0 * dA1, dB0 * dB1, channel.mat)
    return ChoiOperator.from_matrix(out, dB0, dB1, (j.labels[2], j.labels[3]))


# ---------------------------------------------------------------------------
# extended min-entropy
# ---------------------------------------------------------------------------


def bipartite_channel_choi(channel: ChoiOperator, dims: Sequence[int] | None = None) -> HermitianOperator:
    """Reorder the Choi of ``Phi: A0 B0 -> A1 B1`` to factors ``[A0, A1, B0, B1]``.

    ``dims = (dA0, dA1, dB0, dB1)``; by default both sides split evenly.
    """
    if dims is None:
        dA0 = math.isqrt(channel.din)
        dA1 = math.isqrt(channel.dout)
        if dA0 * dA0 != channel.din or dA1 * dA1 != channel.dout:
            raise ValueError("cannot split the channel evenly; pass dims=(dA0, dA1, dB0, dB1)")
        dims = (dA0, dA1, dA0, dA1)
    dA0, dA1, dB0, dB1 = _check_dims(dims)
    if dA0 * dB0 != channel.din or dA1 * dB1 != channel.dout:
        raise ValueError(f"dims {tuple(dims)} do not factor the channel {channel.din}->{channel.dout}")
    m = la.permute_systems(channel.mat, [dA0, dB0, dA1, dB1], [0, 2, 1, 3])
    return HermitianOperator(supermap_profile(dA0, dA1, dB0, dB1), m)


def _ab_cone(k: ConeSpec) -> ConeSpec:
    """PPT-type cones on a supermap Choi default to the ``A0 A1 : B0 B1`` cut."""
    if k.variant in ("ppt", "sep-ppt") and not k.cut:
        return PPT(("B0", "B1")) if k.variant == "ppt" else SepOuterPPT(("B0", "B1"))
    return k


def extended_min_entropy_program(J: HermitianOperator, k: ConeSpec, direction: str) -> ConicProgram:
    d = direction.replace("_given_", "|").replace(" ", "")
    if d not in ("B|A", "A|B"):
        raise ValueError(f"direction must be 'B|A' or 'A|B', got {direction!r}")
    real = J.is_real and k.is_real(J.dims)
    prog = ConicProgram("max", f"extended h_min {d}")
    X = prog.hermitian(J.n, "X", real=real, dims=J.dims.dims)
    k.membership_constraints(prog, X, J.dims)
    if d == "B|A":
        superchannel_constraints(prog, X, J.dims.dims)
    else:
        dual_superchannel_constraints(prog, X, J.dims.dims)
    prog.maximize(X.inner(J.mat))
    return prog


def extended_min_entropy(channel: ChoiOperator, direction: str = "B|A", k: ConeSpec | None = None,
                         tol: float | None = None, dims: Sequence[int] | None = None) -> EntropyResult:
    """``H_ext^K(B|A) = -log2[(1/d_{B0}) max <X, J_Phi>]`` over superchannel Choi ``X in K``.

    ``A|B`` uses the supermaps whose dual is a superchannel ``B -> A`` and the
    normalization ``d_{A0}``.
    """
    channel.validate_channel()
    k = _ab_cone(Positive() if k is None else k)
    J = bipartite_channel_choi(channel, dims)
    rep = solve(extended_min_entropy_program(J, k, direction), tol=tol)
    _require_optimal(rep, "extended min-entropy")
    dA0, _, dB0, _ = J.dims.dims
    norm = dB0 if direction.replace("_given_", "|").replace(" ", "") == "B|A" else dA0
    val = rep.primal_value
    return EntropyResult(-_log2(val / norm), val, rep, "h_ext",
                         {"direction": direction, "normalization": norm})


def ext_sampling_lower_bound(channel: ChoiOperator, samples: int, rng: np.random.Generator,
                             dims: Sequence[int] | None = None, dE: int | None = None) -> float:
    """Best ``<J_Theta, J_Phi>`` over random pre/post-processing superchannels.

    Every sample is a feasible point of the ``B|A``, ``K = Pos`` program, so the
    result lower-bounds its optimal value.
    """
    J = bipartite_channel_choi(channel, dims)
    dA0, dA1, dB0, dB1 = J.dims.dims
    best = -math.inf
    for _ in range(samples):
        theta = random_superchannel(dA0, dA1, dB0, dB1, rng, dE)
        best = max(best, float(np.real(np.vdot(theta.mat, J.mat))))
    return best


# ---------------------------------------------------------------------------
# entanglement-breaking check (k = 1, one-sided)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KebResult:
    """PPT test of ``J_Theta`` across ``A0 A1 : B0 B1``.

    ``ppt`` is necessary (not sufficient) for the supermap to be 1-entanglement-breaking.
    """

    is_superchannel: bool
    ppt: bool
    min_pt_eigenvalue: float
    witness: np.ndarray | None


def keb_check(j, tol: float = MARGINAL_TOL) -> KebResult:
    j = _as_supermap(j)
    pt = la.ptranspose(j.mat, j.dims, [2, 3])
    w, U = np.linalg.eigh(pt)
    ppt = bool(w[0] >= -tol)
    return KebResult(is_superchannel(j, tol), ppt, float(w[0]), None if ppt else U[:, 0])


__all__ = [
    "SupermapChoi", "supermap_profile", "superchannel_constraints", "unital_preserving_constraints",
    "dual_superchannel_constraints", "superchannel_residuals", "unital_preserving_residuals",
    "is_superchannel", "is_unital_preserving", "supermap_from_function", "identity_supermap",
    "discard_prepare_supermap", "pre_post_supermap", "classical_copy_supermap",
    "random_superchannel", "supermap_dual", "supermap_apply", "bipartite_channel_choi",
    "extended_min_entropy_program", "extended_min_entropy", "ext_sampling_lower_bound",
    "KebResult", "keb_check",
]
