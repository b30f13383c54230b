"""Cone specifications: membership and dual-membership constraints, direct checks.

Every cone here is a closed convex subcone of the PSD cone on a labelled tensor
space.  A :class:`ConeSpec` is declarative; it needs the operator's
:class:`~conelab.linalg.DimProfile` to emit constraints or test membership.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .engine import ConicProgram, LinExpr, MatExpr, solve
from .linalg import DimProfile, HermitianOperator

MEMBER_TOL = 1e-8

VARIANTS = ("pos", "ppt", "sep-ppt", "diag", "block", "cq", "werner", "pinching")
CLI_NAMES = ("pos", "ppt", "diag", "block", "cq", "werner", "sep-ppt")


@dataclass(frozen=True)
class ConeSpec:
    """A cone variant plus the data it needs.

    ``cut`` lists the factor labels whose partial transpose is taken (PPT family);
    ``classical`` names the classical factor of a CQ cone; ``projectors`` is the
    orthogonal resolution of identity for block-diagonal / pinching cones.
    """

    variant: str
    cut: tuple[str, ...] = ()
    classical: str | None = None
    projectors: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown cone variant {self.variant!r}; choose from {VARIANTS}")
        object.__setattr__(self, "cut", tuple(self.cut))
        if self.projectors:
            projs = tuple(np.asarray(p, dtype=complex) for p in self.projectors)
            la.check_resolution(projs)
            object.__setattr__(self, "projectors", projs)
        elif self.variant in ("block", "pinching"):
            raise ValueError(f"{self.variant} cone needs a projector family")

    # -- descriptive -----------------------------------------------------------
    @property
    def name(self) -> str:
        if self.variant in ("ppt", "sep-ppt") and self.cut:
            return f"{self.variant}[T:{','.join(self.cut)}]"
        if self.variant == "cq" and self.classical:
            return f"cq[{self.classical}]"
        return self.variant

    @property
    def physical(self) -> bool:
        """Invariant under local unitaries (needed by the max-entropy program)."""
        return self.variant in ("pos", "ppt", "sep-ppt")

    def is_real(self, dims: DimProfile) -> bool:
        """True when every constraint this cone emits has real coefficients."""
        if self.variant in ("block", "pinching"):
            return all(not np.any(p.imag) for p in self.projectors)
        return True

    # -- resolution against a DimProfile ------------------------------------------
    def _check_dims(self, dims: DimProfile, n: int | None = None):
        if n is not None and n != dims.total:
            raise ValueError(f"variable dimension {n} does not match cone dims {dims.dims}")

    def transposed_indices(self, dims: DimProfile) -> list[int]:
        if self.variant not in ("ppt", "sep-ppt"):
            raise TypeError("only PPT-type cones have a cut")
        cut = self.cut
        if not cut:
            if len(dims.factors) != 2:
                raise ValueError(
                    f"PPT cone on {len(dims.factors)} factors needs an explicit cut"
                )
            cut = (dims.labels[1],)
        idx = dims.indices(cut)
        if not idx or len(idx) >= len(dims.factors):
            raise ValueError(f"cut {cut} is not a bipartition of factors {dims.labels}")
        return idx

    def block_projectors(self, dims: DimProfile) -> list[np.ndarray]:
        n = dims.total
        if self.variant == "diag":
            return la.computational_projectors(n)
        if self.variant == "cq":
            cls = self.classical if self.classical is not None else dims.labels[0]
            return la.cq_projectors(dims.dims, dims.index(cls))
        if self.variant in ("block", "pinching"):
            if self.projectors[0].shape[0] != n:
                raise ValueError(f"projectors act on dim {self.projectors[0].shape[0]}, operator has {n}")
            return list(self.projectors)
        raise TypeError(f"{self.variant} is not a block-structured cone")

    def _werner_d(self, dims: DimProfile) -> int:
        if len(dims.factors) != 2 or dims.dims[0] != dims.dims[1]:
            raise ValueError(f"Werner-invariant cone needs d x d factors, got {dims.dims}")
        return dims.dims[0]

    # -- projection onto the invariant subspace -------------------------------------
    def twirl(self, x: np.ndarray, dims: DimProfile) -> np.ndarray:
        """Orthogonal projection onto the linear span of the cone (identity for pos/ppt)."""
        x = np.asarray(x)
        if self.variant in ("pos", "ppt", "sep-ppt"):
            return x
        if self.variant == "werner":
            return la.werner_twirl_mat(x, self._werner_d(dims))
        return la.pinching_mat(x, self.block_projectors(dims))

    # -- constraint emission -------------------------------------------------------
    def membership_constraints(self, prog: ConicProgram, x: MatExpr, dims: DimProfile, tag: str = "K"):
        """Constrain the expression ``x`` to lie in the cone."""
        self._check_dims(dims, x.n)
        v = self.variant
        if v == "pos":
            prog.add_psd(x, f"{tag}:psd")
        elif v in ("ppt", "sep-ppt"):
            prog.add_psd(x, f"{tag}:psd")
            prog.add_psd(x.ptranspose(dims.dims, self.transposed_indices(dims)), f"{tag}:pt")
        elif v == "werner":
            d = self._werner_d(dims)
            prog.add_eq(x - _werner_twirl_expr(x, d), 0.0, name=f"{tag}:fixed")
            pp, pm = _werner_projectors(d)
            prog.add_ge(x.inner(pp), 0.0, name=f"{tag}:sym")
            prog.add_ge(x.inner(pm), 0.0, name=f"{tag}:asym")
        else:
            projs = self.block_projectors(dims)
            if v == "diag":
                prog.add_eq(x - _pinch_expr(x, projs), 0.0, name=f"{tag}:offdiag")
                prog.add_ge(x.diag(), 0.0, name=f"{tag}:diag")
            else:
                prog.add_eq(x - _pinch_expr(x, projs), 0.0, name=f"{tag}:commute")
                for i, V in enumerate(_isometries(projs)):
                    blk = x.congruence(V.conj().T, V)
                    if V.shape[1] == 1:
                        prog.add_ge(blk.trace(), 0.0, name=f"{tag}:blk{i}")
                    else:
                        prog.add_psd(blk, f"{tag}:blk{i}")
        return prog

    def dual_constraints(self, prog: ConicProgram, y: MatExpr, dims: DimProfile,
                         real: bool = False, tag: str = "Kd"):
        """Constrain the expression ``y`` to lie in the dual cone ``K*``."""
        self._check_dims(dims, y.n)
        v = self.variant
        if v == "pos":
            prog.add_psd(y, f"{tag}:psd")
        elif v in ("ppt", "sep-ppt"):
            # K* = {P + Z^Gamma : P, Z >= 0}
            z = prog.hermitian(y.n, name=f"{tag}:Z{len(prog.variables)}", real=real, dims=dims.dims)
            prog.add_psd(z, f"{tag}:Z")
            prog.add_psd(y - z.ptranspose(dims.dims, self.transposed_indices(dims)), f"{tag}:P")
        elif v == "werner":
            pp, pm = _werner_projectors(self._werner_d(dims))
            prog.add_ge(y.inner(pp), 0.0, name=f"{tag}:sym")
            prog.add_ge(y.inner(pm), 0.0, name=f"{tag}:asym")
        else:
            projs = self.block_projectors(dims)
            for i, V in enumerate(_isometries(projs)):
                blk = y.congruence(V.conj().T, V)
                if V.shape[1] == 1:
                    prog.add_ge(blk.trace(), 0.0, name=f"{tag}:blk{i}")
                else:
                    prog.add_psd(blk, f"{tag}:blk{i}")
        return prog

    # -- direct checks ------------------------------------------------------------------
    def contains(self, x, tol: float = MEMBER_TOL, dims: DimProfile | None = None) -> tuple[bool, dict]:
        """Membership test; returns ``(ok, witness)``.

        For PPT-type cones a failed test returns the eigenvector of the most
        negative eigenvalue of the partial transpose.
        """
        op = la.as_operator(x) if dims is None else HermitianOperator(dims, np.asarray(getattr(x, "mat", x)))
        m, dims = op.mat, op.dims
        w, U = np.linalg.eigh(m)
        if w[0] < -tol:
            return False, {"reason": "not PSD", "eigenvalue": float(w[0]), "vector": U[:, 0]}
        if self.variant in ("ppt", "sep-ppt"):
            pt = la.ptranspose(m, dims.dims, self.transposed_indices(dims))
            w2, U2 = np.linalg.eigh(pt)
            if w2[0] < -tol:
                return False, {"reason": "partial transpose not PSD", "eigenvalue": float(w2[0]),
                               "vector": U2[:, 0]}
            return True, {"min_eigenvalue": float(min(w[0], w2[0]))}
        if self.variant != "pos":
            dev = float(np.max(np.abs(m - self.twirl(m, dims)), initial=0.0))
            if dev > tol:
                return False, {"reason": "not invariant", "deviation": dev}
        return True, {"min_eigenvalue": float(w[0])}

    def dual_contains(self, y, tol: float = MEMBER_TOL, dims: DimProfile | None = None) -> bool:
        """Membership in ``K*`` (PPT-type cones decided by a small SDP)."""
        op = la.as_operator(y) if dims is None else HermitianOperator(dims, np.asarray(getattr(y, "mat", y)))
        m, dims = op.mat, op.dims
        v = self.variant
        if v == "pos":
            return bool(np.linalg.eigvalsh(m)[0] >= -tol)
        if v == "werner":
            pp, pm = _werner_projectors(self._werner_d(dims))
            return la.inner(pp, m) >= -tol and la.inner(pm, m) >= -tol
        if v in ("ppt", "sep-ppt"):
            # min <Y, X> over unit-trace X in the cone
            prog = ConicProgram("min")
            X = prog.hermitian(op.n, "X", real=op.is_real)
            self.membership_constraints(prog, X, dims)
            prog.add_eq(X.trace(), 1.0)
            prog.minimize(X.inner(m))
            rep = solve(prog, tol=1e-9)
            return rep.primal_value >= -tol * max(1.0, np.abs(m).max())
        for V in _isometries(self.block_projectors(dims)):
            if np.linalg.eigvalsh(V.conj().T @ m @ V)[0] < -tol:
                return False
        return True

    def interior_point(self, dims: DimProfile) -> np.ndarray:
        """A point in the relative interior (the identity works for every variant)."""
        return np.eye(dims.total)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def Positive() -> ConeSpec:
    return ConeSpec("pos")


def PPT(cut: Sequence[str] | str = ()) -> ConeSpec:
    return ConeSpec("ppt", cut=(cut,) if isinstance(cut, str) else tuple(cut))


def SepOuterPPT(cut: Sequence[str] | str = ()) -> ConeSpec:
    return ConeSpec("sep-ppt", cut=(cut,) if isinstance(cut, str) else tuple(cut))


def Diagonal() -> ConeSpec:
    return ConeSpec("diag")


def incoherence_rank_cone(r: int) -> ConeSpec:
    """The rank-``r`` incoherent cone as literally defined: diagonal for every ``r``."""
    if r < 1:
        raise ValueError("rank must be >= 1")
    return Diagonal()


def BlockDiagonal(projectors: Sequence[np.ndarray]) -> ConeSpec:
    return ConeSpec("block", projectors=tuple(projectors))


def CQ(classical: str | None = None) -> ConeSpec:
    return ConeSpec("cq", classical=classical)


def TwirlInvariantPositive(twirl: str = "werner", projectors: Sequence[np.ndarray] = ()) -> ConeSpec:
    if twirl == "werner":
        return ConeSpec("werner")
    if twirl == "pinching":
        return ConeSpec("pinching", projectors=tuple(projectors))
    raise ValueError("twirl must be 'werner' or 'pinching'")


def parse_cut(text: str, dims: DimProfile) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Parse ``"A:B"`` / ``"A1,A2:B1,B2"`` into the two sides of a bipartition."""
    if ":" not in text:
        raise ValueError(f"cut {text!r} must look like LEFT:RIGHT")
    left, right = text.split(":", 1)
    lhs = tuple(s for s in left.split(",") if s)
    rhs = tuple(s for s in right.split(",") if s)
    if not lhs or not rhs or set(lhs) & set(rhs) or set(lhs) | set(rhs) != set(dims.labels):
        raise ValueError(f"cut {text!r} is not a bipartition of factors {dims.labels}")
    return lhs, rhs


def block_projectors_from_groups(groups: Sequence[Sequence[int]], n: int) -> list[np.ndarray]:
    """Projectors onto spans of computational basis vectors, one per index group."""
    out = []
    for g in groups:
        p = np.zeros((n, n))
        for i in g:
            p[i, i] = 1.0
        out.append(p)
    return out


def from_cli(name: str, dims: DimProfile, cut: str | None = None,
             blocks: str | None = None) -> ConeSpec:
    """Build a cone from CLI spellings (``--cone``, ``--cut``, ``--blocks``)."""
    if name not in CLI_NAMES:
        raise ValueError(f"unknown cone {name!r}; choose from {CLI_NAMES}")
    if name == "pos":
        return Positive()
    if name == "diag":
        return Diagonal()
    if name == "werner":
        return TwirlInvariantPositive("werner")
    if name in ("ppt", "sep-ppt"):
        rhs = parse_cut(cut, dims)[1] if cut else ()
        return PPT(rhs) if name == "ppt" else SepOuterPPT(rhs)
    if name == "cq":
        cls = parse_cut(cut, dims)[0] if cut else (dims.labels[0],)
        if len(cls) != 1:
            raise ValueError("CQ cone needs a single classical factor on the left of --cut")
        return CQ(cls[0])
    if name == "block":
        if not blocks:
            raise ValueError("block cone needs --blocks, e.g. '0,1;2,3'")
        groups = [[int(i) for i in g.split(",") if i.strip()] for g in blocks.split(";")]
        return BlockDiagonal(block_projectors_from_groups(groups, dims.total))
    raise AssertionError(name)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _isometries(projs: Sequence[np.ndarray]) -> list[np.ndarray]:
    out = []
    for p in projs:
        w, U = np.linalg.eigh(la.herm(p))
        V = U[:, w > 0.5]
        if not np.any(V.imag):
            V = V.real
        out.append(V)
    return out


def _pinch_expr(x: MatExpr, projs: Sequence[np.ndarray]) -> MatExpr:
    if all(np.count_nonzero(p - np.diag(np.diag(p))) == 0 for p in projs):
        # diagonal projectors: pinching keeps entries (i, j) in the same block
        labels = np.zeros(x.n, dtype=int)
        for k, p in enumerate(projs):
            labels[np.abs(np.diag(p)) > 0.5] = k
        keep = (labels[:, None] == labels[None, :]).reshape(-1)
        mask = np.nonzero(keep)[0]
        import scipy.sparse as sp

        S = sp.csr_matrix((np.ones(mask.size), (mask, mask)), shape=(x.n**2, x.n**2))
        return x.apply(S, x.n)
    out = None
    for p in projs:
        term = x.congruence(p, p)
        out = term if out is None else out + term
    return out


def _werner_projectors(d: int):
    F = la.swap_matrix(d)
    I = np.eye(d * d)
    return (I + F) / 2, (I - F) / 2


def _werner_twirl_expr(x: MatExpr, d: int) -> MatExpr:
    F = la.swap_matrix(d)
    I = np.eye(d * d)
    t = x.trace()
    f = x.inner(F)
    a = (t - f * (1.0 / d)) * (1.0 / (d * d - 1))
    b = (f - t * (1.0 / d)) * (1.0 / (d * d - 1))
    return a * I + b * F


# ---------------------------------------------------------------------------
# random members (used by property tests and the acceptance harness)
# ---------------------------------------------------------------------------


def random_psd(n: int, rng: np.random.Generator, rank: int | None = None, real: bool = False) -> np.ndarray:
    rank = n if rank is None else rank
    G = rng.normal(size=(n, rank))
    if not real:
        G = G + 1j * rng.normal(size=(n, rank))
    return G @ G.conj().T


def random_product_mixture(dims: Sequence[int], rng: np.random.Generator, terms: int = 4) -> np.ndarray:
    """Random separable operator: a positive mixture of fully product pure states."""
    out = 0
    for _ in range(terms):
        vecs = []
        for d in dims:
            v = rng.normal(size=d) + 1j * rng.normal(size=d)
            vecs.append(v / np.linalg.norm(v))
        psi = vecs[0]
        for v in vecs[1:]:
            psi = np.kron(psi, v)
        out = out + rng.uniform(0.1, 1.0) * np.outer(psi, psi.conj())
    return out


def sample_member(cone: ConeSpec, dims: DimProfile, rng: np.random.Generator) -> np.ndarray:
    """A random member of ``cone`` (a separable one for the PPT family)."""
    n = dims.total
    v = cone.variant
    if v == "pos":
        return random_psd(n, rng)
    if v in ("ppt", "sep-ppt"):
        return random_product_mixture(dims.dims, rng)
    if v == "werner":
        d = cone._werner_d(dims)
        pp, pm = _werner_projectors(d)
        return rng.uniform(0, 1) * pp + rng.uniform(0, 1) * pm
    projs = cone.block_projectors(dims)
    return la.pinching_mat(random_psd(n, rng), projs)


def sample_dual_member(cone: ConeSpec, dims: DimProfile, rng: np.random.Generator) -> np.ndarray:
    """A random member of ``K*`` built from its generating description."""
    n = dims.total
    v = cone.variant
    if v == "pos":
        return random_psd(n, rng)
    if v in ("ppt", "sep-ppt"):
        idx = cone.transposed_indices(dims)
        return random_psd(n, rng) + la.ptranspose(random_psd(n, rng), dims.dims, idx)
    H = random_psd(n, rng) - random_psd(n, rng)
    if v == "werner":
        pp, pm = _werner_projectors(cone._werner_d(dims))
        lo = min(la.inner(pp, H) / np.trace(pp).real, la.inner(pm, H) / np.trace(pm).real)
        return H + max(0.0, -lo) * np.eye(n) * 1.01
    projs = cone.block_projectors(dims)
    # off-block part is unconstrained; on-block part must be PSD
    return la.pinching_mat(random_psd(n, rng), projs) + (H - la.pinching_mat(H, projs))
