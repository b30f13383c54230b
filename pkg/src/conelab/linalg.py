"""Dense Hermitian operator calculus on tensor-product spaces.

Conventions used throughout the package:

* ``vec`` stacks columns, so ``vec(|i><j|) = e_j (x) e_i`` and
  ``(X1^T (x) X0) vec(Y) = vec(X0 Y X1)``.
* The Choi operator of a map ``Phi`` is ``sum_ij |i><j| (x) Phi(|i><j|)`` with the
  *input* factor first.  For a Kraus pair set this equals
  ``sum_k vec(A_k) vec(B_k)^*``.
* A map acts through its Choi operator as ``Phi(rho) = Tr_in[J (rho^T (x) I)]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERM_TOL = 1e-12
HERM_WARN = 1e-9
SUPPORT_TOL = 1e-9
CHANNEL_TOL = 1e-9


# ---------------------------------------------------------------------------
# Dimension bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DimProfile:
    """Ordered tensor factors, each a ``(label, dim)`` pair."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        facs = tuple((str(lbl), int(d)) for lbl, d in self.factors)
        object.__setattr__(self, "factors", facs)
        labels = [lbl for lbl, _ in facs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels: {labels}")
        for lbl, d in facs:
            if d < 1:
                raise ValueError(f"factor {lbl!r} has non-positive dimension {d}")

    @classmethod
    def of(cls, *pairs: tuple[str, int], **named: int) -> "DimProfile":
        return cls(tuple(pairs) + tuple(named.items()))

    @classmethod
    def auto(cls, dims: Sequence[int], prefix: str = "S") -> "DimProfile":
        return cls(tuple((f"{prefix}{i}", int(d)) for i, d in enumerate(dims)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=int)) if self.factors else 1

    def index(self, label: str | int) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < len(self.factors):
                raise KeyError(f"factor index {label} out of range")
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown factor label {label!r}; have {self.labels}") from None

    def indices(self, labels: str | int | Iterable[str | int]) -> list[int]:
        if isinstance(labels, (str, int, np.integer)):
            labels = [labels]
        return [self.index(lbl) for lbl in labels]

    def dim(self, label: str | int) -> int:
        return self.dims[self.index(label)]

    def without(self, labels) -> "DimProfile":
        drop = set(self.indices(labels))
        return DimProfile(tuple(f for i, f in enumerate(self.factors) if i not in drop))

    def select(self, labels) -> "DimProfile":
        return DimProfile(tuple(self.factors[i] for i in self.indices(labels)))

    def __add__(self, other: "DimProfile") -> "DimProfile":
        return DimProfile(self.factors + other.factors)

    def relabel(self, mapping: dict[str, str]) -> "DimProfile":
        return DimProfile(tuple((mapping.get(lbl, lbl), d) for lbl, d in self.factors))


# ---------------------------------------------------------------------------
# Array-level tensor operations
# ---------------------------------------------------------------------------


def _as_int_list(sys) -> list[int]:
    if isinstance(sys, (int, np.integer)):
        return [int(sys)]
    return [int(s) for s in sys]


def ptrace(x: np.ndarray, dims: Sequence[int], sys) -> np.ndarray:
    """Trace out the factors listed in ``sys`` (indices into ``dims``)."""
    dims = list(dims)
    sys = sorted(set(_as_int_list(sys)))
    n = len(dims)
    t = np.asarray(x).reshape(dims + dims)
    for k, s in enumerate(sys):
        cur = n - k
        t = np.trace(t, axis1=s - k, axis2=s - k + cur)
    keep = [d for i, d in enumerate(dims) if i not in sys]
    m = int(np.prod(keep, dtype=int)) if keep else 1
    return t.reshape(m, m)


def ptranspose(x: np.ndarray, dims: Sequence[int], sys) -> np.ndarray:
    """Transpose the factors listed in ``sys``."""
    dims = list(dims)
    n = len(dims)
    perm = list(range(2 * n))
    for s in _as_int_list(sys):
        perm[s], perm[n + s] = perm[n + s], perm[s]
    N = int(np.prod(dims, dtype=int))
    return np.asarray(x).reshape(dims + dims).transpose(perm).reshape(N, N)


def permute_systems(x: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: new factor ``k`` is old factor ``order[k]``."""
    dims = list(dims)
    n = len(dims)
    order = list(order)
    perm = order + [n + o for o in order]
    N = int(np.prod(dims, dtype=int))
    return np.asarray(x).reshape(dims + dims).transpose(perm).reshape(N, N)


def kron(*ops: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ops)


def swap_matrix(d: int, d2: int | None = None) -> np.ndarray:
    """Permutation matrix ``|i j> -> |j i>`` on ``C^d (x) C^d2``."""
    d2 = d if d2 is None else d2
    F = np.zeros((d * d2, d * d2))
    for i in range(d):
        for j in range(d2):
            F[j * d + i, i * d2 + j] = 1.0
    return F


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    return np.asarray(v).reshape(shape, order="F")


def herm(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    return (x + x.conj().T) / 2


def is_psd(x: np.ndarray, tol: float = CHANNEL_TOL) -> bool:
    return bool(np.linalg.eigvalsh(herm(x))[0] >= -tol)


def psd_sqrt(x: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(herm(x))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def support_projector_mat(x: np.ndarray, tol: float = SUPPORT_TOL) -> np.ndarray:
    w, v = np.linalg.eigh(herm(x))
    keep = v[:, w > tol]
    return keep @ keep.conj().T


def pinv_sqrt(x: np.ndarray, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Moore-Penrose inverse square root on the support."""
    w, v = np.linalg.eigh(herm(x))
    mask = w > tol
    inv = np.zeros_like(w)
    inv[mask] = 1.0 / np.sqrt(w[mask])
    return (v * inv) @ v.conj().T


def logm_psd(x: np.ndarray, base: float = 2.0, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Matrix logarithm on the support (zero on the kernel)."""
    w, v = np.linalg.eigh(herm(x))
    lw = np.zeros_like(w)
    mask = w > tol
    lw[mask] = np.log(w[mask]) / np.log(base)
    return (v * lw) @ v.conj().T


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt inner product ``Re Tr[a^* b]``."""
    return float(np.real(np.vdot(np.asarray(a), np.asarray(b))))


# ---------------------------------------------------------------------------
# Hermitian operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A dense Hermitian matrix on a labelled tensor product space."""

    dims: DimProfile
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.mat, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        if m.shape[0] != self.dims.total:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match dims {self.dims.dims} "
                f"(product {self.dims.total})"
            )
        dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if dev > HERM_WARN:
            warnings.warn(
                f"operator deviates from Hermitian by {dev:.3e}; symmetrizing",
                RuntimeWarning,
                stacklevel=3,
            )
        if dev > 0:
            m = (m + m.conj().T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_array(cls, m, dims: Sequence[int] | DimProfile | None = None, labels=None):
        m = np.asarray(m)
        if dims is None:
            dims = DimProfile.auto([m.shape[0]])
        elif not isinstance(dims, DimProfile):
            if labels is None:
                dims = DimProfile.auto(dims)
            else:
                dims = DimProfile(tuple(zip(labels, dims)))
        return cls(dims, m)

    # -- basic properties ---------------------------------------------------
    @property
    def n(self) -> int:
        return self.mat.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.any(self.mat.imag)

    def trace(self) -> float:
        return float(np.real(np.trace(self.mat)))

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)

    def is_psd(self, tol: float = CHANNEL_TOL) -> bool:
        return bool(self.eigvalsh()[0] >= -tol)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mat, dtype=dtype)

    # -- arithmetic ---------------------------------------------------------
    def _same(self, other: "HermitianOperator"):
        if self.dims.dims != other.dims.dims:
            raise ValueError(f"dimension mismatch {self.dims.dims} vs {other.dims.dims}")

    def __add__(self, other):
        if isinstance(other, HermitianOperator):
            self._same(other)
            other = other.mat
        return HermitianOperator(self.dims, self.mat + other)

    def __sub__(self, other):
        if isinstance(other, HermitianOperator):
            self._same(other)
            other = other.mat
        return HermitianOperator(self.dims, self.mat - other)

    def __mul__(self, c: float):
        return HermitianOperator(self.dims, self.mat * float(c))

    __rmul__ = __mul__

    def __truediv__(self, c: float):
        return HermitianOperator(self.dims, self.mat / float(c))

    def __neg__(self):
        return HermitianOperator(self.dims, -self.mat)

    def tensor(self, other: "HermitianOperator") -> "HermitianOperator":
        return tensor(self, other)

    def inner(self, other) -> float:
        return inner(self.mat, np.asarray(other))

    # -- tensor operations --------------------------------------------------
    def ptrace(self, factor) -> "HermitianOperator":
        return partial_trace(self, factor)

    def ptranspose(self, factor) -> "HermitianOperator":
        return partial_transpose(self, factor)

    def relabel(self, mapping: dict[str, str]) -> "HermitianOperator":
        return HermitianOperator(self.dims.relabel(mapping), self.mat)

    def permute(self, labels: Sequence[str]) -> "HermitianOperator":
        order = self.dims.indices(labels)
        if sorted(order) != list(range(len(self.dims.factors))):
            raise ValueError("permutation must list every factor exactly once")
        new = DimProfile(tuple(self.dims.factors[i] for i in order))
        return HermitianOperator(new, permute_systems(self.mat, self.dims.dims, order))


def as_operator(x, dims=None) -> HermitianOperator:
    """Coerce arrays (with optional dims) to :class:`HermitianOperator`."""
    if isinstance(x, HermitianOperator):
        if dims is not None:
            prof = dims if isinstance(dims, DimProfile) else None
            if prof is None and tuple(dims) != x.dims.dims:
                raise ValueError(f"dims {tuple(dims)} disagree with operator dims {x.dims.dims}")
        return x
    return HermitianOperator.from_array(x, dims)


def tensor(*ops: HermitianOperator) -> HermitianOperator:
    """Tensor product; labels are made unique by suffixing where needed."""
    factors: list[tuple[str, int]] = []
    seen: set[str] = set()
    for op in ops:
        for lbl, d in op.dims.factors:
            new = lbl
            k = 1
            while new in seen:
                k += 1
                new = f"{lbl}{k}"
            seen.add(new)
            factors.append((new, d))
    return HermitianOperator(DimProfile(tuple(factors)), kron(*[o.mat for o in ops]))


def partial_trace(x: HermitianOperator, factor) -> HermitianOperator:
    idx = x.dims.indices(factor)
    return HermitianOperator(x.dims.without(idx), ptrace(x.mat, x.dims.dims, idx))


def partial_transpose(x: HermitianOperator, factor) -> HermitianOperator:
    idx = x.dims.indices(factor)
    return HermitianOperator(x.dims, ptranspose(x.mat, x.dims.dims, idx))


def swap_operator(d: int, labels: tuple[str, str] = ("A", "B")) -> HermitianOperator:
    return HermitianOperator(DimProfile(((labels[0], d), (labels[1], d))), swap_matrix(d))


def identity(dims: DimProfile | Sequence[int]) -> HermitianOperator:
    prof = dims if isinstance(dims, DimProfile) else DimProfile.auto(dims)
    return HermitianOperator(prof, np.eye(prof.total))


def maximally_mixed(dims: DimProfile | Sequence[int]) -> HermitianOperator:
    op = identity(dims)
    return op / op.n


def max_entangled(d: int, labels: tuple[str, str] = ("A", "B")) -> HermitianOperator:
    """Normalized maximally entangled state ``tau_d``."""
    v = np.eye(d).reshape(-1) / np.sqrt(d)
    return HermitianOperator(DimProfile(((labels[0], d), (labels[1], d))), np.outer(v, v))


def phi_plus(d: int, labels: tuple[str, str] = ("A", "B")) -> HermitianOperator:
    """Unnormalized maximally entangled operator ``phi^+ = d tau_d``."""
    return max_entangled(d, labels) * d


def max_coherent(d: int, label: str = "A") -> HermitianOperator:
    """Maximally coherent state ``varsigma_d``."""
    v = np.ones(d) / np.sqrt(d)
    return HermitianOperator(DimProfile(((label, d),)), np.outer(v, v))


def pure_state(psi: np.ndarray, dims: DimProfile | Sequence[int] | None = None) -> HermitianOperator:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return HermitianOperator.from_array(np.outer(psi, psi.conj()), dims or [psi.size])


def support_projector(x: HermitianOperator, tol: float = SUPPORT_TOL) -> HermitianOperator:
    return HermitianOperator(x.dims, support_projector_mat(x.mat, tol))


def dominated(p, q, tol: float = SUPPORT_TOL) -> bool:
    """True when ``supp(p)`` lies inside ``supp(q)``."""
    pm, qm = np.asarray(p), np.asarray(q)
    proj_q = support_projector_mat(qm, tol)
    proj_p = support_projector_mat(pm, tol)
    resid = proj_p - proj_q @ proj_p
    return bool(np.linalg.norm(resid) <= np.sqrt(tol))


# ---------------------------------------------------------------------------
# Linear maps: Kraus sets and Choi operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KrausSet:
    """``Phi(X) = sum_k L_k X R_k^*``; completely positive when ``right is left``."""

    left: tuple[np.ndarray, ...]
    right: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        left = tuple(np.atleast_2d(np.asarray(k, dtype=complex)) for k in self.left)
        if not left:
            raise ValueError("empty Kraus set")
        right = left if self.right is None else tuple(
            np.atleast_2d(np.asarray(k, dtype=complex)) for k in self.right
        )
        if len(left) != len(right):
            raise ValueError("left and right Kraus lists differ in length")
        shape = left[0].shape
        for k in left + right:
            if k.shape != shape:
                raise ValueError(f"inconsistent Kraus shapes {k.shape} vs {shape}")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def input_dim(self) -> int:
        return self.left[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.left[0].shape[0]

    @property
    def is_cp(self) -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.left, self.right))

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        return sum(a @ x @ b.conj().T for a, b in zip(self.left, self.right))

    def transpose(self) -> "KrausSet":
        """Kraus-transpose map ``X -> sum A_k^T X conj(B_k)``."""
        return KrausSet(tuple(a.T for a in self.left), tuple(b.T for b in self.right))


_TRI = (True, False, None)


@dataclass(frozen=True, eq=False)
class ChoiOperator:
    """Choi operator on ``[in, out]`` with tri-state channel flags.

    Flags given as ``None`` are inferred from the matrix at construction time.
    """

    op: HermitianOperator
    cp: bool | None = None
    tp: bool | None = None
    unital: bool | None = None

    def __post_init__(self):
        if len(self.op.dims.factors) != 2:
            raise ValueError("Choi operator needs exactly two factors [in, out]")
        if self.cp is None:
            object.__setattr__(self, "cp", self.op.is_psd(CHANNEL_TOL))
        if self.tp is None:
            object.__setattr__(self, "tp", self._marg_is_identity(1))
        if self.unital is None:
            object.__setattr__(self, "unital", self._marg_is_identity(0))

    def _marg_is_identity(self, traced: int) -> bool:
        m = ptrace(self.op.mat, self.op.dims.dims, traced)
        return bool(np.max(np.abs(m - np.eye(m.shape[0]))) <= CHANNEL_TOL)

    @classmethod
    def from_matrix(cls, j: np.ndarray, din: int, dout: int, labels=("in", "out"), **flags):
        return cls(HermitianOperator(DimProfile(((labels[0], din), (labels[1], dout))), j), **flags)

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def din(self) -> int:
        return self.op.dims.dims[0]

    @property
    def dout(self) -> int:
        return self.op.dims.dims[1]

    @property
    def is_channel(self) -> bool:
        return bool(self.cp and self.tp)

    def validate_channel(self) -> None:
        if not self.cp:
            raise ValueError("Choi operator is not positive semidefinite (map not CP)")
        if not self.tp:
            raise ValueError("Choi operator does not describe a trace-preserving map")

    def apply(self, x) -> np.ndarray:
        return apply_choi_mat(self.mat, self.din, self.dout, np.asarray(x))


def choi_from_function(fn, din: int, dout: int) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| (x) fn(|i><j|)`` of an arbitrary linear map."""
    J = np.zeros((din * dout, din * dout), dtype=complex)
    for i in range(din):
        for j in range(din):
            E = np.zeros((din, din), dtype=complex)
            E[i, j] = 1.0
            J[i * dout:(i + 1) * dout, j * dout:(j + 1) * dout] = fn(E)
    return J


def apply_choi_mat(J: np.ndarray, din: int, dout: int, x: np.ndarray) -> np.ndarray:
    """``Tr_in[J (x^T (x) I)]`` evaluated blockwise: ``sum_ij x_ij J[i,j]``."""
    if x.shape != (din, din):
        raise ValueError(f"input has shape {x.shape}, map expects {din}x{din}")
    blocks = np.asarray(J).reshape(din, dout, din, dout)
    return np.einsum("ij,iajb->ab", x, blocks)


def vec_choi(k: KrausSet, labels=("in", "out")) -> ChoiOperator:
    """Choi operator ``sum_k vec(A_k) vec(B_k)^*`` of a Kraus pair set."""
    J = sum(np.outer(vec(a), vec(b).conj()) for a, b in zip(k.left, k.right))
    dev = np.max(np.abs(J - J.conj().T))
    if dev > HERM_WARN:
        raise ValueError("Kraus pairs do not define a Hermitian-preserving map")
    return ChoiOperator.from_matrix(J, k.input_dim, k.output_dim, labels)


def apply_via_choi(j: ChoiOperator, x) -> HermitianOperator:
    xm = np.asarray(x.mat if isinstance(x, HermitianOperator) else x)
    if xm.shape[0] != j.din:
        raise ValueError(f"input dimension {xm.shape[0]} does not match Choi input {j.din}")
    out = j.apply(xm)
    return HermitianOperator(DimProfile(((j.op.dims.labels[1], j.dout),)), out)


def adjoint_choi_mat(J: np.ndarray, din: int, dout: int) -> np.ndarray:
    """Choi of the adjoint map: ``SWAP(J)^T`` with the factors exchanged."""
    return permute_systems(J, [din, dout], [1, 0]).T


def adjoint_choi(j: ChoiOperator) -> ChoiOperator:
    la, lb = j.op.dims.labels
    mat = adjoint_choi_mat(j.mat, j.din, j.dout)
    return ChoiOperator(
        HermitianOperator(DimProfile(((lb, j.dout), (la, j.din))), mat),
        cp=j.cp,
        tp=j.unital,
        unital=j.tp,
    )


def compose_choi(j_outer: np.ndarray, j_inner: np.ndarray, d0: int, d1: int, d2: int) -> np.ndarray:
    """Choi of ``outer o inner`` for ``inner: d0 -> d1`` and ``outer: d1 -> d2``."""
    return choi_from_function(
        lambda E: apply_choi_mat(j_outer, d1, d2, apply_choi_mat(j_inner, d0, d1, E)), d0, d2
    )


def identity_choi(d: int, labels=("in", "out")) -> ChoiOperator:
    return ChoiOperator.from_matrix(phi_plus(d).mat, d, d, labels)


def unitary_choi(U: np.ndarray, labels=("in", "out")) -> ChoiOperator:
    return vec_choi(KrausSet((np.asarray(U),)), labels)


def depolarizing_choi(d: int, p: float = 1.0, labels=("in", "out")) -> ChoiOperator:
    """``X -> (1-p) X + p Tr[X] I/d``; ``p = 1`` is completely depolarizing."""
    J = (1 - p) * phi_plus(d).mat + p * np.eye(d * d) / d
    return ChoiOperator.from_matrix(J, d, d, labels)


def replacer_choi(sigma: np.ndarray, din: int, labels=("in", "out")) -> ChoiOperator:
    """Trace-and-replace map ``X -> Tr[X] sigma``."""
    sigma = np.asarray(sigma)
    return ChoiOperator.from_matrix(np.kron(np.eye(din), sigma), din, sigma.shape[0], labels)


# ---------------------------------------------------------------------------
# Twirls
# ---------------------------------------------------------------------------


def werner_twirl_mat(x: np.ndarray, d: int) -> np.ndarray:
    """Projection onto span{I, F}; preserves Tr[x] and Tr[F x]."""
    x = np.asarray(x)
    if x.shape != (d * d, d * d):
        raise ValueError(f"werner twirl needs a {d}x{d} bipartite operator")
    F = swap_matrix(d)
    t, s = np.trace(x), np.trace(F @ x)
    # a I + b F with d^2 a + d b = t and d a + d^2 b = s
    det = d**4 - d**2
    a = (d**2 * t - d * s) / det
    b = (d**2 * s - d * t) / det
    return a * np.eye(d * d) + b * F


def werner_twirl(x: HermitianOperator) -> HermitianOperator:
    dims = x.dims.dims
    if len(dims) != 2 or dims[0] != dims[1]:
        raise ValueError("werner twirl requires two factors of equal dimension")
    return HermitianOperator(x.dims, werner_twirl_mat(x.mat, dims[0]))


def check_resolution(projectors: Sequence[np.ndarray], n: int | None = None, tol: float = 1e-10):
    projs = [np.asarray(p) for p in projectors]
    if not projs:
        raise ValueError("empty projector family")
    n = projs[0].shape[0] if n is None else n
    total = sum(projs)
    if np.max(np.abs(total - np.eye(n))) > tol:
        raise ValueError("projectors do not sum to the identity")
    for i, p in enumerate(projs):
        if np.max(np.abs(p @ p - p)) > tol or np.max(np.abs(p - p.conj().T)) > tol:
            raise ValueError(f"element {i} is not an orthogonal projector")
        for q in projs[i + 1:]:
            if np.max(np.abs(p @ q)) > tol:
                raise ValueError("projectors are not mutually orthogonal")
    return projs


def pinching_mat(x: np.ndarray, projectors: Sequence[np.ndarray]) -> np.ndarray:
    x = np.asarray(x)
    projs = check_resolution(projectors, x.shape[0])
    return sum(p @ x @ p for p in projs)


def pinching(x: HermitianOperator, projectors: Sequence[np.ndarray]) -> HermitianOperator:
    return HermitianOperator(x.dims, pinching_mat(x.mat, projectors))


def pinching_unitaries(projectors: Sequence[np.ndarray]) -> list[np.ndarray]:
    """``U_k = sum_x exp(2 pi i x k / r) Pi_x``; their uniform mixture is the pinching."""
    r = len(projectors)
    return [
        sum(np.exp(2j * np.pi * x * k / r) * np.asarray(p) for x, p in enumerate(projectors))
        for k in range(r)
    ]


def computational_projectors(n: int) -> list[np.ndarray]:
    out = []
    for i in range(n):
        p = np.zeros((n, n))
        p[i, i] = 1.0
        out.append(p)
    return out


def cq_projectors(dims: Sequence[int], classical: int) -> list[np.ndarray]:
    """Projectors ``|x><x|`` on factor ``classical`` tensored with identity elsewhere."""
    dims = list(dims)
    out = []
    for x in range(dims[classical]):
        e = np.zeros((dims[classical], dims[classical]))
        e[x, x] = 1.0
        out.append(kron(*[e if i == classical else np.eye(d) for i, d in enumerate(dims)]))
    return out


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def _check_state(x: np.ndarray, name: str):
    w = np.linalg.eigvalsh(herm(x))
    if w[0] < -CHANNEL_TOL:
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    if np.sum(w) > 1 + CHANNEL_TOL:
        raise ValueError(f"{name} has trace {np.sum(w):.12g} > 1")


def fidelity(rho, sigma) -> float:
    """Root fidelity ``|| sqrt(rho) sqrt(sigma) ||_1``."""
    r, s = np.asarray(rho), np.asarray(sigma)
    _check_state(r, "rho")
    _check_state(s, "sigma")
    sv = np.linalg.svd(psd_sqrt(r) @ psd_sqrt(s), compute_uv=False)
    return float(min(1.0, np.sum(sv)))


def purified_distance(rho, sigma) -> float:
    """``sqrt(1 - F^2)`` for normalized states."""
    r, s = np.asarray(rho), np.asarray(sigma)
    for m, name in ((r, "rho"), (s, "sigma")):
        if abs(np.real(np.trace(m)) - 1) > CHANNEL_TOL:
            raise ValueError(f"purified distance is implemented for normalized states; {name} is not")
    f = fidelity(r, s)
    return float(np.sqrt(max(0.0, 1 - f * f)))


def generalized_trace_distance(rho, sigma) -> float:
    """``(||rho - sigma||_1 + |Tr(rho - sigma)|) / 2``."""
    diff = herm(np.asarray(rho) - np.asarray(sigma))
    return float(0.5 * (np.sum(np.abs(np.linalg.eigvalsh(diff))) + abs(np.trace(diff).real)))


# ---------------------------------------------------------------------------
# Physically incoherent operations
# ---------------------------------------------------------------------------


def pio_choi(perms, phases, projectors) -> tuple[ChoiOperator, int]:
    """Choi operator of the PIO with Kraus operators ``U_i Pi_i``.

    ``perms[i]`` is a permutation of ``range(d)`` and ``phases[i]`` a length-``d``
    array of angles; ``U_i = sum_j exp(i phases[i][j]) |perms[i][j]><j|``.  The
    returned Schmidt number is ``max_i rank(Pi_i)``.
    """
    projs = check_resolution(projectors)
    d = projs[0].shape[0]
    for p in projs:
        if np.max(np.abs(p - np.diag(np.diag(p)))) > 1e-10:
            raise ValueError("PIO projectors must be diagonal in the incoherent basis")
    kraus = []
    for perm, ph, p in zip(perms, phases, projs):
        perm = np.asarray(perm, dtype=int)
        if sorted(perm.tolist()) != list(range(d)):
            raise ValueError("invalid permutation")
        U = np.zeros((d, d), dtype=complex)
        U[perm, np.arange(d)] = np.exp(1j * np.asarray(ph, dtype=float))
        kraus.append(U @ p)
    sn = max(int(round(np.real(np.trace(p)))) for p in projs)
    return vec_choi(KrausSet(tuple(kraus))), sn


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary (QR of a Ginibre matrix with phase fix)."""
    g = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_channel_choi_mat(din: int, dout: int, rng: np.random.Generator,
                            env: int | None = None) -> np.ndarray:
    """Choi matrix of a random channel from a Haar isometry ``din -> dout (x) env``."""
    env = din * dout if env is None else env
    V = random_unitary(dout * env, rng)[:, :din]
    kraus = V.reshape(dout, env, din).transpose(1, 0, 2)
    return sum(np.outer(vec(k), vec(k).conj()) for k in kraus)


def random_channel(din: int, dout: int, rng: np.random.Generator, env: int | None = None,
                   labels=("in", "out")) -> ChoiOperator:
    return ChoiOperator.from_matrix(random_channel_choi_mat(din, dout, rng, env), din, dout, labels)
