"""Cone-restricted entropic quantities as conic programs (all logarithms base 2).

Each quantity is built as an explicit :class:`~conelab.engine.ConicProgram`.
The public functions solve the primal form; the solver's dual objective is
reported alongside.  For the main quantities the dual program is also
available as a separately constructed program (``*_dual_program``), giving an
independent route to the same number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .cones import ConeSpec, Positive
from .engine import ConicProgram, MatExpr, SolveReport, SolverError, solve
from .linalg import ChoiOperator, DimProfile, HermitianOperator

DOMINANCE_TOL = 1e-9


@dataclass
class EntropyResult:
    value_bits: float
    program_value: float
    report: SolveReport | None
    quantity: str
    flags: dict = field(default_factory=dict)

    @property
    def dual_value(self) -> float:
        return self.report.dual_value if self.report is not None else self.program_value

    @property
    def dual_bits(self) -> float:
        """The solver's dual objective mapped to the same bit scale as ``value_bits``."""
        if self.report is None:
            return self.value_bits
        p, d = self.program_value, self.dual_value
        if not (math.isfinite(p) and math.isfinite(d)) or p <= 0 or d <= 0:
            return math.nan
        # value_bits = offset + sign * scale * log2(program value), per copy if flagged
        scale = (2.0 if self.quantity == "h_max" else 1.0) / self.flags.get("copies", 1)
        sign = 1.0 if self.quantity.startswith("d_") or self.quantity == "h_max" else -1.0
        return self.value_bits + sign * scale * (math.log2(d) - math.log2(p))

    @property
    def gap(self) -> float:
        return self.report.gap if self.report is not None else 0.0

    def to_dict(self) -> dict:
        out = {
            "quantity": self.quantity,
            "value_bits": _num(self.value_bits),
            "program_value": _num(self.program_value),
            "dual_bits": _num(self.dual_bits),
        }
        if self.report is not None:
            out["report"] = self.report.to_dict()
        if self.flags:
            out["flags"] = {k: (_num(v) if isinstance(v, float) else v) for k, v in self.flags.items()}
        return out


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _log2(x: float) -> float:
    if x <= 0:
        return -math.inf
    return math.log2(x)


def _require_optimal(rep: SolveReport, what: str):
    if rep.status != "optimal":
        raise SolverError(f"{what}: solver finished with status {rep.status!r}", rep)


def _solve_routes(primal: ConicProgram, dual, tol, what: str) -> tuple[SolveReport, str]:
    """Solve the primal program; if it cannot be certified, solve the separately
    built dual program (same optimal value) instead.  Returns ``(report, route)``."""
    rep = solve(primal, tol=tol)
    if rep.status == "optimal" or dual is None:
        _require_optimal(rep, what)
        return rep, "primal"
    drep = solve(dual(), tol=tol)
    if drep.status != "optimal":
        _require_optimal(rep, what)
    return drep, "dual"


def _is_real(*mats) -> bool:
    return all(not np.any(np.asarray(m).imag) for m in mats)


def _op(x, dims=None) -> HermitianOperator:
    return la.as_operator(x, dims)


# ---------------------------------------------------------------------------
# bipartite bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Split:
    op: HermitianOperator  # permuted so that the A-side factors come first
    dA: int
    dB: int

    @property
    def dims(self) -> DimProfile:
        return self.op.dims


def _split(rho: HermitianOperator, a_labels: Sequence[str] | None) -> _Split:
    labels = rho.dims.labels
    if a_labels is None:
        if len(labels) != 2:
            raise ValueError(
                f"operator has factors {labels}; pass a_labels to say which form the A side"
            )
        a_labels = (labels[0],)
    a_labels = tuple(a_labels)
    idx = rho.dims.indices(a_labels)
    b_labels = tuple(lbl for lbl in labels if lbl not in a_labels)
    if not b_labels:
        raise ValueError("the B side is empty")
    op = rho.permute(list(a_labels) + list(b_labels))
    dA = int(np.prod([rho.dims.dim(a) for a in a_labels]))
    return _Split(op, dA, op.n // dA)


def _grouped(s: _Split):
    """Dims/indices of the A-group and B-group within the permuted operator."""
    k = len(s.dims.factors)
    nA = next(i for i in range(k + 1) if int(np.prod(s.dims.dims[:i])) == s.dA)
    return list(range(nA)), list(range(nA, k))


# ---------------------------------------------------------------------------
# restricted max-relative entropy
# ---------------------------------------------------------------------------


def d_max_program(P: HermitianOperator, Q: HermitianOperator, k: ConeSpec) -> ConicProgram:
    """``max <P,X>  s.t. <Q,X> <= 1, X in K``."""
    real = _is_real(P.mat, Q.mat) and k.is_real(P.dims)
    prog = ConicProgram("max", "d_max primal")
    X = prog.hermitian(P.n, "X", real=real, dims=P.dims.dims)
    k.membership_constraints(prog, X, P.dims)
    prog.add_le(X.inner(Q.mat), 1.0, name="normalization")
    prog.maximize(X.inner(P.mat))
    return prog


def d_max_dual_program(P: HermitianOperator, Q: HermitianOperator, k: ConeSpec) -> ConicProgram:
    """``min g  s.t. g Q - P in K*, g >= 0``."""
    real = _is_real(P.mat, Q.mat) and k.is_real(P.dims)
    prog = ConicProgram("min", "d_max dual")
    g = prog.scalar("gamma")
    prog.add_ge(g, 0.0, name="gamma>=0")
    k.dual_constraints(prog, g * Q.mat - P.mat, P.dims, real=real)
    prog.minimize(g)
    return prog


def d_max_restricted(P, Q, k: ConeSpec | None = None, tol: float | None = None,
                     dims=None, cross_check: bool = False) -> EntropyResult:
    """``D_max^K(P||Q) = log2 max{<P,X> : <Q,X> <= 1, X in K}``."""
    k = Positive() if k is None else k
    P, Q = _op(P, dims), _op(Q, dims)
    if P.dims.dims != Q.dims.dims:
        raise ValueError("P and Q act on different spaces")
    if np.max(np.abs(Q.mat)) == 0:
        raise ValueError("Q is zero")
    if not la.dominated(P.mat, Q.mat, DOMINANCE_TOL):
        return EntropyResult(math.inf, math.inf, None, "d_max", {"dominance_violated": True})
    rep, route = _solve_routes(d_max_program(P, Q, k), lambda: d_max_dual_program(P, Q, k), tol, "d_max")
    flags = {} if route == "primal" else {"route": route}
    if cross_check:
        drep = solve(d_max_dual_program(P, Q, k), tol=tol)
        flags["dual_program_value"] = drep.primal_value
    return EntropyResult(_log2(rep.primal_value), rep.primal_value, rep, "d_max", flags)


def d_max_via_norm(P, Q, k: ConeSpec | None = None, tol: float | None = None, dims=None) -> EntropyResult:
    """``log2 || Q^{-1/2} P Q^{-1/2} ||_K`` (valid when the congruence preserves ``K``)."""
    k = Positive() if k is None else k
    P, Q = _op(P, dims), _op(Q, dims)
    if k.variant not in ("pos", "diag", "block", "cq", "pinching"):
        raise ValueError(f"the Q^(-1/2) congruence is not known to preserve cone {k.name}; "
                         "use d_max_restricted")
    if k.variant != "pos":
        ok, _ = k.contains(Q)
        if not ok:
            raise ValueError("Q must lie in the cone for the norm reformulation")
    if not la.dominated(P.mat, Q.mat, DOMINANCE_TOL):
        return EntropyResult(math.inf, math.inf, None, "d_max", {"dominance_violated": True})
    R = la.pinv_sqrt(Q.mat)
    val = conic_norm(HermitianOperator(P.dims, R @ P.mat @ R), k, tol=tol)
    return EntropyResult(_log2(val), val, None, "d_max_via_norm")


# ---------------------------------------------------------------------------
# restricted min-entropies
# ---------------------------------------------------------------------------


def _direction(direction: str) -> bool:
    """True when the conditioning system is B (``A|B``)."""
    d = direction.replace("_given_", "|").replace(" ", "")
    if d in ("A|B", "AB"):
        return True
    if d in ("B|A", "BA"):
        return False
    raise ValueError(f"direction must be 'A|B' or 'B|A', got {direction!r}")


def h_min_program(rho: HermitianOperator, k: ConeSpec, direction: str = "A|B",
                  a_labels=None) -> ConicProgram:
    """``max <rho,X> s.t. Tr_A X = I_B`` (or ``Tr_B X = I_A``), ``X in K``."""
    s = _split(rho, a_labels)
    ga, gb = _grouped(s)
    real = rho.is_real and k.is_real(s.dims)
    prog = ConicProgram("max", "h_min primal")
    X = prog.hermitian(s.op.n, "X", real=real, dims=s.dims.dims)
    k.membership_constraints(prog, X, s.dims)
    if _direction(direction):
        prog.add_eq(X.ptrace(s.dims.dims, ga), np.eye(s.dB), name="marginal")
    else:
        prog.add_eq(X.ptrace(s.dims.dims, gb), np.eye(s.dA), name="marginal")
    prog.maximize(X.inner(s.op.mat))
    return prog


def h_min_dual_program(rho: HermitianOperator, k: ConeSpec, direction: str = "A|B",
                       a_labels=None) -> ConicProgram:
    """``min Tr Y s.t. I_A (x) Y - rho in K*`` (or ``Y (x) I_B - rho``)."""
    s = _split(rho, a_labels)
    ga, gb = _grouped(s)
    real = rho.is_real and k.is_real(s.dims)
    prog = ConicProgram("min", "h_min dual")
    if _direction(direction):
        Y = prog.hermitian(s.dB, "Y", real=real)
        lifted = Y.embed((s.dA, s.dB), (1,))
    else:
        Y = prog.hermitian(s.dA, "Y", real=real)
        lifted = Y.embed((s.dA, s.dB), (0,))
    k.dual_constraints(prog, lifted - s.op.mat, s.dims, real=real)
    prog.minimize(Y.trace())
    return prog


def h_min_restricted(rho, k: ConeSpec | None = None, direction: str = "A|B",
                     tol: float | None = None, dims=None, a_labels=None,
                     cross_check: bool = False) -> EntropyResult:
    """``H_min^K(A|B) = -log2 max{<rho,X> : Tr_A X = I_B, X in K}``."""
    k = Positive() if k is None else k
    rho = _op(rho, dims)
    rep, route = _solve_routes(h_min_program(rho, k, direction, a_labels),
                               lambda: h_min_dual_program(rho, k, direction, a_labels), tol, "h_min")
    flags = {"direction": direction} if route == "primal" else {"direction": direction, "route": route}
    if cross_check:
        drep = solve(h_min_dual_program(rho, k, direction, a_labels), tol=tol)
        flags["dual_program_value"] = drep.primal_value
    return EntropyResult(-_log2(rep.primal_value), rep.primal_value, rep, "h_min", flags)


def singlet_fraction_h_min(rho, tol: float | None = None, dims=None) -> EntropyResult:
    """Unrestricted ``H_min(A|B)`` from the fully entangled fraction.

    ``2^{-H_min} = d_A max_Lambda <tau_{AA'}, (id (x) Lambda)(rho)>`` over CPTP
    ``Lambda: B -> A'``; solved as an SDP over the Choi operator of ``Lambda``.
    """
    rho = _op(rho, dims)
    s = _split(rho, None)
    dA, dB = s.dA, s.dB
    real = rho.is_real
    prog = ConicProgram("max", "singlet fraction")
    J = prog.hermitian(dB * dA, "J", real=real)  # Choi of Lambda on B (x) A'
    prog.add_psd(J, "cp")
    prog.add_eq(J.ptrace((dB, dA), 1), np.eye(dB), name="tp")
    tau = la.max_entangled(dA).mat
    # <tau, (id (x) Lambda)(rho)> = <(id (x) Lambda^*)(tau), rho> is linear in J
    R = s.op.mat.reshape(dA, dB, dA, dB)

    def overlap_map(E):
        # image of one Choi basis element, contracted against tau
        Er = E.reshape(dB, dA, dB, dA)
        out = np.einsum("aibj,ixjy->axby", R, Er).reshape(dA * dA, dA * dA)
        return np.array([[np.trace(tau @ out)]])

    val = J.map(overlap_map)
    prog.maximize(val.trace() * float(dA))
    rep = solve(prog, tol=tol)
    _require_optimal(rep, "singlet fraction")
    return EntropyResult(-_log2(rep.primal_value), rep.primal_value, rep, "h_min_singlet")


def h_min_doubly_program(P: HermitianOperator, k: ConeSpec,
                         a_labels: Sequence[str] | None = None) -> ConicProgram:
    s = _split(P, a_labels)
    if s.dA != s.dB:
        raise ValueError(f"doubly restricted min-entropy needs d_A = d_B, got {s.dA}, {s.dB}")
    real = P.is_real and k.is_real(s.dims)
    prog = ConicProgram("max", "doubly restricted h_min")
    X = prog.hermitian(P.n, "X", real=real, dims=s.dims.dims)
    k.membership_constraints(prog, X, s.dims)
    prog.add_eq(X.ptrace((s.dA, s.dB), 0), np.eye(s.dB), name="marginal_B")
    prog.add_eq(X.ptrace((s.dA, s.dB), 1), np.eye(s.dA), name="marginal_A")
    prog.maximize(X.inner(s.op.mat))
    return prog


def h_min_doubly_dual_program(P: HermitianOperator, k: ConeSpec,
                              a_labels: Sequence[str] | None = None) -> ConicProgram:
    s = _split(P, a_labels)
    real = P.is_real and k.is_real(s.dims)
    prog = ConicProgram("min", "doubly restricted h_min dual")
    Y1 = prog.hermitian(s.dB, "Y1", real=real)
    Y2 = prog.hermitian(s.dA, "Y2", real=real)
    lifted = Y1.embed((s.dA, s.dB), (1,)) + Y2.embed((s.dA, s.dB), (0,))
    k.dual_constraints(prog, lifted - s.op.mat, s.dims, real=real)
    prog.minimize(Y1.trace() + Y2.trace())
    return prog


def h_min_doubly_restricted(P, k: ConeSpec | None = None, tol: float | None = None,
                            dims=None, cross_check: bool = False,
                            a_labels: Sequence[str] | None = None) -> EntropyResult:
    """``-log2 max{<P,X> : Tr_A X = I_B, Tr_B X = I_A, X in K}``.

    ``a_labels`` groups several factors into the A side (as for :func:`h_min_restricted`).
    """
    k = Positive() if k is None else k
    P = _op(P, dims)
    rep, route = _solve_routes(h_min_doubly_program(P, k, a_labels),
                               lambda: h_min_doubly_dual_program(P, k, a_labels),
                               tol, "doubly restricted h_min")
    flags = {} if route == "primal" else {"route": route}
    if cross_check:
        flags["dual_program_value"] = solve(h_min_doubly_dual_program(P, k, a_labels),
                                            tol=tol).primal_value
    return EntropyResult(-_log2(rep.primal_value), rep.primal_value, rep, "h_min_doubly", flags)


# ---------------------------------------------------------------------------
# cone norms
# ---------------------------------------------------------------------------


def conic_norm_program(X: HermitianOperator, k: ConeSpec) -> ConicProgram:
    """``max <X, rho> s.t. Tr rho = 1, rho in K``."""
    real = X.is_real and k.is_real(X.dims)
    prog = ConicProgram("max", "cone norm")
    R = prog.hermitian(X.n, "rho", real=real, dims=X.dims.dims)
    k.membership_constraints(prog, R, X.dims)
    prog.add_eq(R.trace(), 1.0, name="unit trace")
    prog.maximize(R.inner(X.mat))
    return prog


def conic_norm_dual_program(X: HermitianOperator, k: ConeSpec) -> ConicProgram:
    """``min g s.t. g I - X in K*``."""
    real = X.is_real and k.is_real(X.dims)
    prog = ConicProgram("min", "cone norm dual")
    g = prog.scalar("gamma")
    k.dual_constraints(prog, g * np.eye(X.n) - X.mat, X.dims, real=real)
    prog.minimize(g)
    return prog


def conic_norm(X, k: ConeSpec | None = None, tol: float | None = None, dims=None,
               method: str = "auto", with_report: bool = False):
    """``||X||_K = max{|<X, rho>| : rho a density operator in K}``.

    For ``K = Pos`` the value is the largest absolute eigenvalue (``method="auto"``);
    ``method="sdp"`` forces the conic program.  Non-PSD ``X`` is handled by
    solving for ``X`` and ``-X`` and taking the larger value.
    """
    k = Positive() if k is None else k
    X = _op(X, dims)
    w = np.linalg.eigvalsh(X.mat)
    if k.variant == "pos" and method == "auto":
        val = float(max(w[-1], -w[0]))
        return (val, None) if with_report else val
    reports = []
    vals = []
    signs = (1.0,) if w[0] >= -1e-12 else (1.0, -1.0)
    for sgn in signs:
        Xs = X * sgn
        rep, _ = _solve_routes(conic_norm_program(Xs, k), lambda: conic_norm_dual_program(Xs, k),
                               tol, "cone norm")
        reports.append(rep)
        vals.append(rep.primal_value)
    i = int(np.argmax(vals))
    return (vals[i], reports[i]) if with_report else vals[i]


# ---------------------------------------------------------------------------
# restricted max-entropy
# ---------------------------------------------------------------------------


def _fidelity_lmi(prog: ConicProgram, P, Q, real: bool, name: str):
    """``[[P, Z], [Z^*, Q]] >= 0``; returns ``Re Tr Z`` (its maximum is ``F(P, Q)``)."""
    n = P.n if isinstance(P, MatExpr) else Q.n
    Z = prog.matrix(n, f"{name}:Z", real=real)
    prog.add_psd(MatExpr.block([[P, Z], [Z.H, Q]]), f"{name}:lmi")
    return Z.trace()


def _support_isometry(m: np.ndarray, tol: float = la.SUPPORT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Isometry ``V`` onto the support of PSD ``m`` and the compressed ``V^* m V``."""
    w, U = np.linalg.eigh(la.herm(m))
    V = U[:, w > tol * max(1.0, w[-1])]
    if not np.any(V.imag):
        V = V.real
    return V, la.herm(V.conj().T @ m @ V)


def h_max_program(rho_abc: HermitianOperator, k: ConeSpec, dA: int, dB: int, dC: int) -> ConicProgram:
    """Joint program over the Choi operator of ``Phi: B -> A'`` and ``omega_C``.

    Since ``tau_{AA'} (x) omega = V omega V^*`` for the isometry
    ``V = |tau> (x) I_C``, ``F(Phi(rho), tau (x) omega) = F(V^* Phi(rho) V, omega)``;
    ``C`` is first compressed to the support of ``rho_C``, which contains the
    support of ``V^* Phi(rho) V`` and therefore of an optimal ``omega``.
    """
    prof = DimProfile((("A", dA), ("B", dA)))
    real = rho_abc.is_real and k.is_real(prof)
    rho_c = la.ptrace(rho_abc.mat, (dA, dB, dC), [0, 1])
    Vc, _ = _support_isometry(rho_c)
    rC = Vc.shape[1]
    W = np.kron(np.eye(dA * dB), Vc)
    R = (W.conj().T @ rho_abc.mat @ W).reshape(dA, dB, rC, dA, dB, rC)
    real = real and not np.any(R.imag)

    prog = ConicProgram("max", "h_max")
    J = prog.hermitian(dB * dA, "J", real=real)  # factors (B, A')
    prog.add_eq(J.ptrace((dB, dA), 1), np.eye(dB), name="tp")
    # Choi of the adjoint map (A' -> B): SWAP(J)^T, required to lie in K on A (x) B
    J_adj = J.permute((dB, dA), (1, 0)).transpose()
    k.membership_constraints(prog, J_adj, DimProfile((("A", dA), ("B", dB))), tag="K")
    omega = prog.hermitian(rC, "omega", real=real)
    prog.add_eq(omega.trace(), 1.0, name="omega:trace")
    t = la.max_entangled(dA).mat[:, [0]] * np.sqrt(dA)  # |tau>
    L = np.kron(t.conj().T, np.eye(rC))  # <tau| (x) I_C

    def compressed_out(E):
        Er = E.reshape(dB, dA, dB, dA)
        out = np.einsum("aicbjd,ixjy->axcbyd", R, Er).reshape(dA * dA * rC, dA * dA * rC)
        return L @ out @ L.conj().T

    P = J.map(compressed_out)
    prog.maximize(_fidelity_lmi(prog, P, omega, real, "F"))
    return prog


def h_max_restricted(rho, k: ConeSpec | None = None, tol: float | None = None,
                     labels: tuple[str, str, str] | None = None, dims=None) -> EntropyResult:
    """``H_max^K(A|C)`` of a pure state on ``A (x) B (x) C`` (``K`` on ``A (x) B``).

    ``2^{H_max} = d_A max F^2(Phi(rho_ABC), tau_{AA'} (x) omega_C)`` over channels
    ``Phi: B -> A'`` whose adjoint's Choi operator lies in ``K`` and states
    ``omega``; the root fidelity is the SDP ``max Re Tr Z`` over
    ``[[P, Z], [Z^*, Q]] >= 0``.
    """
    k = Positive() if k is None else k
    if not k.physical:
        raise ValueError(f"cone {k.name} is not local-unitary invariant; h_max is defined only "
                         "for pos, ppt and sep-ppt")
    rho = _op(rho, dims)
    if labels is not None:
        rho = rho.permute(list(labels))
    if len(rho.dims.factors) != 3:
        raise ValueError("h_max needs a tripartite operator (A, B, C)")
    w = np.linalg.eigvalsh(rho.mat)
    if w[-2] > 1e-8 * max(1.0, w[-1]) or abs(w.sum() - 1) > 1e-8:
        raise ValueError("h_max needs a normalized pure state")
    dA, dB, dC = rho.dims.dims
    rep = solve(h_max_program(rho, k, dA, dB, dC), tol=tol)
    _require_optimal(rep, "h_max")
    f = rep.primal_value
    return EntropyResult(_log2(dA * f * f), f, rep, "h_max", {"fidelity": f})


# ---------------------------------------------------------------------------
# Hartley entropy of CQ states
# ---------------------------------------------------------------------------


def hartley_cq(rho, classical: str | None = None, dims=None, tol: float = 1e-9) -> float:
    """``log2 || sum_x Pi_{rho^x} ||_inf`` for a CQ state ``sum_x |x><x| (x) rho^x``."""
    rho = _op(rho, dims)
    cls = rho.dims.labels[0] if classical is None else classical
    if len(rho.dims.factors) != 2:
        raise ValueError("hartley_cq needs a bipartite (X, B) operator")
    rest = [lbl for lbl in rho.dims.labels if lbl != cls]
    r = rho.permute([cls] + rest)
    dX, dB = r.dims.dims
    m = r.mat
    if np.max(np.abs(m - la.pinching_mat(m, la.cq_projectors((dX, dB), 0))), initial=0.0) > tol:
        raise ValueError("input is not classical on the designated factor")
    acc = np.zeros((dB, dB), dtype=complex)
    for x in range(dX):
        blk = m[x * dB:(x + 1) * dB, x * dB:(x + 1) * dB]
        acc += la.support_projector_mat(blk, tol)
    top = float(np.linalg.eigvalsh(acc)[-1])
    return _log2(top)


# ---------------------------------------------------------------------------
# hypothesis testing
# ---------------------------------------------------------------------------


def hypothesis_testing_program(P: HermitianOperator, Q: HermitianOperator, eps: float,
                               k: ConeSpec) -> ConicProgram:
    """``min <P,X> s.t. <Q,X> >= 1 - eps, 0 <= X <= I, X in K``."""
    real = _is_real(P.mat, Q.mat) and k.is_real(P.dims)
    prog = ConicProgram("min", "hypothesis testing")
    X = prog.hermitian(P.n, "X", real=real, dims=P.dims.dims)
    k.membership_constraints(prog, X, P.dims)
    prog.add_psd(np.eye(P.n) - X, "X<=I")
    prog.add_ge(X.inner(Q.mat), 1.0 - eps, name="type-I")
    prog.minimize(X.inner(P.mat))
    return prog


def hypothesis_testing_restricted(P, Q, eps: float, k: ConeSpec | None = None,
                                  tol: float | None = None, dims=None) -> EntropyResult:
    """``-log2 min{<P,X> : <Q,X> >= 1-eps, 0 <= X <= I, X in K}``."""
    k = Positive() if k is None else k
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    P, Q = _op(P, dims), _op(Q, dims)
    rep = solve(hypothesis_testing_program(P, Q, eps, k), tol=tol)
    if rep.status == "infeasible":
        return EntropyResult(-math.inf, math.inf, rep, "d_h", {"infeasible": True})
    _require_optimal(rep, "hypothesis testing")
    v = rep.primal_value
    tol_v = 10 * (tol or 1e-8)
    if v <= tol_v:
        return EntropyResult(math.inf, max(v, 0.0), rep, "d_h", {"zero_objective": True})
    return EntropyResult(-_log2(v), v, rep, "d_h")


# ---------------------------------------------------------------------------
# smoothing
# ---------------------------------------------------------------------------


def _smoothing_ball(prog: ConicProgram, rho: HermitianOperator, eps: float, real: bool):
    """Add ``rho~ >= 0, Tr rho~ <= 1, F(rho, rho~) >= sqrt(1 - eps^2)``; return ``rho~``.

    The fidelity is taken on the support of ``rho``: with ``rho = V s V^*``,
    ``F(rho, rho~) = F(s, V^* rho~ V)``, which keeps the LMI strictly feasible
    for rank-deficient ``rho``.
    """
    rt = prog.hermitian(rho.n, "rho~", real=real)
    prog.add_psd(rt, "rho~:psd")
    prog.add_le(rt.trace(), 1.0, name="subnormalized")
    V, s = _support_isometry(rho.mat)
    re_tr = _fidelity_lmi(prog, MatExpr.const(s), rt.congruence(V.conj().T, V), real, "F")
    prog.add_ge(re_tr, math.sqrt(1.0 - eps * eps), name="fidelity")
    return rt


def smoothed(quantity: str, rho, eps: float, k: ConeSpec | None = None, Q=None,
             direction: str = "A|B", tol: float | None = None, dims=None) -> EntropyResult:
    """Smoothed ``d_max`` (``rho`` vs ``Q``) or ``h_min`` over the purified-distance ball.

    ``eps = 0`` returns the unsmoothed value: the ball is then a single point and
    the joint program has no strictly feasible point.
    """
    k = Positive() if k is None else k
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    rho = _op(rho, dims)
    if abs(rho.trace() - 1) > 1e-9 or not rho.is_psd():
        raise ValueError("smoothing is implemented for normalized states only")
    if quantity not in ("dmax", "hmin"):
        raise ValueError("quantity must be 'dmax' or 'hmin'")
    if eps == 0:
        if quantity == "dmax":
            res = d_max_restricted(rho, _op(Q, dims), k, tol=tol)
        else:
            res = h_min_restricted(rho, k, direction, tol=tol)
        res.flags["smoothing"] = "eps=0: unsmoothed value"
        return res

    if quantity == "dmax":
        Q = _op(Q, dims)
        real = _is_real(rho.mat, Q.mat) and k.is_real(rho.dims)
        prog = ConicProgram("min", "smoothed d_max")
        rt = _smoothing_ball(prog, rho, eps, real)
        g = prog.scalar("gamma")
        k.dual_constraints(prog, g * Q.mat - rt, rho.dims, real=real)
        prog.minimize(g)
        rep = solve(prog, tol=tol)
        _require_optimal(rep, "smoothed d_max")
        return EntropyResult(_log2(rep.primal_value), rep.primal_value, rep, "d_max_smooth",
                             {"eps": eps})
    s = _split(rho, None)
    real = rho.is_real and k.is_real(s.dims)
    prog = ConicProgram("min", "smoothed h_min")
    rt = _smoothing_ball(prog, s.op, eps, real)
    if _direction(direction):
        Y = prog.hermitian(s.dB, "Y", real=real)
        lifted = Y.embed((s.dA, s.dB), (1,))
    else:
        Y = prog.hermitian(s.dA, "Y", real=real)
        lifted = Y.embed((s.dA, s.dB), (0,))
    k.dual_constraints(prog, lifted - rt, s.dims, real=real)
    prog.minimize(Y.trace())
    rep = solve(prog, tol=tol)
    _require_optimal(rep, "smoothed h_min")
    return EntropyResult(-_log2(rep.primal_value), rep.primal_value, rep, "h_min_smooth",
                         {"eps": eps})


# ---------------------------------------------------------------------------
# communication value
# ---------------------------------------------------------------------------


def cv_restricted(channel: ChoiOperator, k: ConeSpec | None = None, tol: float | None = None,
                  with_result: bool = False):
    """``cv^K(N) = 2^{-H_min^K(A|B)}`` at the Choi operator (A = input)."""
    k = Positive() if k is None else k
    channel.validate_channel()
    res = h_min_restricted(channel.op, k, "A|B", tol=tol)
    return (res.program_value, res) if with_result else res.program_value


# ---------------------------------------------------------------------------
# unrestricted reference quantities
# ---------------------------------------------------------------------------


def umegaki_relative_entropy(rho, sigma) -> float:
    """``D(rho||sigma) = Tr[rho (log2 rho - log2 sigma)]`` (``+inf`` without dominance)."""
    r, s = np.asarray(getattr(rho, "mat", rho)), np.asarray(getattr(sigma, "mat", sigma))
    if not la.dominated(r, s, DOMINANCE_TOL):
        return math.inf
    wr, Ur = np.linalg.eigh(la.herm(r))
    ws, Us = np.linalg.eigh(la.herm(s))
    pos_r = wr > la.SUPPORT_TOL
    term1 = float(np.sum(wr[pos_r] * np.log2(wr[pos_r])))
    # Tr[rho log sigma] on the support of sigma
    pos_s = ws > la.SUPPORT_TOL
    overlap = np.abs(Ur[:, pos_r].conj().T @ Us[:, pos_s]) ** 2  # |<r_i|s_j>|^2
    term2 = float(np.sum(wr[pos_r][:, None] * overlap * np.log2(ws[pos_s])[None, :]))
    return term1 - term2


def von_neumann_entropy(rho) -> float:
    w = np.linalg.eigvalsh(la.herm(np.asarray(getattr(rho, "mat", rho))))
    w = w[w > la.SUPPORT_TOL]
    return float(-np.sum(w * np.log2(w)))


def conditional_entropy(rho, dims=None, direction: str = "A|B") -> float:
    """``H(A|B) = H(AB) - H(B)`` (equivalently ``-D(rho_AB || I_A (x) rho_B)``)."""
    rho = _op(rho, dims)
    if len(rho.dims.factors) != 2:
        raise ValueError("conditional_entropy needs a bipartite operator")
    traced = 0 if _direction(direction) else 1
    marg = la.ptrace(rho.mat, rho.dims.dims, [traced])
    return von_neumann_entropy(rho.mat) - von_neumann_entropy(marg)
