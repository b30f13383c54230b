"""Channel conversion by bistochastic pre-processing: is ``Phi = Psi o Xi``?

For ``Phi: A -> C`` and ``Psi: B -> C`` with ``A ~ B`` we search for the Choi
operator ``J_E`` of ``E = Xi^T: B -> A`` (Kraus operators transposed) with::

    J_E >= 0,  Tr_A J_E = I_B,  Tr_B J_E = I_A,  J_E in K,  (E (x) id_C)(J_Psi) = J_Phi

which is equivalent to ``Phi = Psi o Xi`` with ``Xi`` unital, trace preserving
and with Choi operator in ``K`` (for cones closed under swap-and-transpose).
A feasible ``J_E`` gives ``J_Xi = SWAP(J_E)``; the result is validated by
composing ``Psi o Xi`` directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .cones import ConeSpec, Positive
from .engine import ConicProgram, SolveReport, SolverError, solve
from .entropies import h_min_doubly_restricted
from .linalg import ChoiOperator, DimProfile, HermitianOperator

# cones with X in K(A (x) B)  <=>  SWAP(X)^T in K(B (x) A)
SWAP_TRANSPOSE_SYMMETRIC = frozenset({"pos", "ppt", "sep-ppt", "diag", "werner"})
RESIDUAL_TOL = 1e-6


@dataclass
class ConversionCertificate:
    feasible: bool
    status: str
    xi_choi: ChoiOperator | None
    residual: float
    infeasibility_ray: dict | None
    report: SolveReport | None = field(default=None, repr=False)
    e_choi: ChoiOperator | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {"feasible": self.feasible, "status": self.status,
               "residual": self.residual if math.isfinite(self.residual) else str(self.residual)}
        if self.report is not None:
            out["report"] = self.report.to_dict()
        if self.infeasibility_ray is not None:
            out["infeasibility"] = {
                k: v for k, v in self.infeasibility_ray.items() if not isinstance(v, np.ndarray)
            }
        return out


def _check(j_phi: ChoiOperator, j_psi: ChoiOperator, k: ConeSpec):
    if k.variant not in SWAP_TRANSPOSE_SYMMETRIC:
        raise ValueError(
            f"cone {k.name!r} is not closed under swap-and-transpose; "
            f"supported: {sorted(SWAP_TRANSPOSE_SYMMETRIC)}"
        )
    if j_phi.din != j_psi.din:
        raise ValueError(f"input dimensions differ: Phi has {j_phi.din}, Psi has {j_psi.din}")
    if j_phi.dout != j_psi.dout:
        raise ValueError(f"output dimensions differ: Phi has {j_phi.dout}, Psi has {j_psi.dout}")


def contract_input(J_E: np.ndarray, J_psi: np.ndarray, dB: int, dA: int, dC: int) -> np.ndarray:
    """``(E (x) id_C)(J_Psi)`` for ``E: B -> A`` given by its Choi matrix."""
    Jp = np.asarray(J_psi).reshape(dB, dC, dB, dC)
    Je = np.asarray(J_E).reshape(dB, dA, dB, dA)
    return np.einsum("bcBC,baBA->acAC", Jp, Je).reshape(dA * dC, dA * dC)


def preprocessing_program(j_phi: ChoiOperator, j_psi: ChoiOperator, k: ConeSpec) -> ConicProgram:
    dA, dB, dC = j_phi.din, j_psi.din, j_phi.dout
    prof = DimProfile((("in", dB), ("out", dA)))
    real = la.HermitianOperator(j_phi.op.dims, j_phi.mat).is_real and j_psi.op.is_real and k.is_real(prof)
    prog = ConicProgram("min", "pre-processing feasibility")
    JE = prog.hermitian(dB * dA, "J_E", real=real, dims=(dB, dA))
    prog.add_psd(JE, "cp")
    k.membership_constraints(prog, JE, prof)
    prog.add_eq(JE.ptrace((dB, dA), 1), np.eye(dB), name="tp")
    prog.add_eq(JE.ptrace((dB, dA), 0), np.eye(dA), name="unital")
    image = JE.map(lambda E: contract_input(E, j_psi.mat, dB, dA, dC))
    prog.add_eq(image, j_phi.mat, name="conversion")
    prog.minimize(JE.trace() * 0.0)
    return prog


def xi_from_e_choi(J_E: np.ndarray, dB: int, dA: int) -> np.ndarray:
    """``J_Xi`` on ``[A, B]`` from ``J_E`` on ``[B, A]``: transposing Kraus operators swaps the factors."""
    return la.permute_systems(np.asarray(J_E), [dB, dA], [1, 0])


def compose(j_outer: ChoiOperator, j_inner: ChoiOperator) -> ChoiOperator:
    """Choi operator of ``outer o inner``."""
    if j_inner.dout != j_outer.din:
        raise ValueError("composition dimension mismatch")
    m = la.compose_choi(j_outer.mat, j_inner.mat, j_inner.din, j_inner.dout, j_outer.dout)
    return ChoiOperator.from_matrix(m, j_inner.din, j_outer.dout)


def preprocessing_feasible(j_phi: ChoiOperator, j_psi: ChoiOperator, k: ConeSpec | None = None,
                           tol: float | None = None,
                           residual_tol: float = RESIDUAL_TOL) -> ConversionCertificate:
    """Decide whether ``Phi = Psi o Xi`` for a unital channel ``Xi`` with ``J_Xi in K``."""
    k = Positive() if k is None else k
    _check(j_phi, j_psi, k)
    dA, dB, dC = j_phi.din, j_psi.din, j_phi.dout
    rep = solve(preprocessing_program(j_phi, j_psi, k), tol=tol)
    if rep.status == "infeasible":
        return ConversionCertificate(False, "infeasible", None, math.inf, rep.certificate, rep)
    if rep.status != "optimal":
        raise SolverError(f"conversion: solver finished with status {rep.status!r}", rep)
    J_E = la.herm(rep.optimizers["J_E"])
    J_xi = xi_from_e_choi(J_E, dB, dA)
    xi = ChoiOperator.from_matrix(J_xi, dA, dB)
    e = ChoiOperator.from_matrix(J_E, dB, dA)
    residual = float(np.linalg.norm(compose(j_psi, xi).mat - j_phi.mat))
    ok = residual <= residual_tol
    return ConversionCertificate(ok, "feasible" if ok else "inaccurate", xi, residual, None, rep, e)


def verify_infeasibility(cert: ConversionCertificate, tol: float = 1e-8) -> bool:
    """Check a presolve Farkas certificate: ``A^T y ~ 0`` while ``b^T y = 1``."""
    ray = cert.infeasibility_ray or {}
    y, A, b = ray.get("y_eq"), ray.get("A_eq"), ray.get("b_eq")
    if y is not None and A is not None:
        return bool(np.max(np.abs(A.T @ y)) <= tol and abs(float(b @ y) - 1.0) <= tol)
    z = ray.get("z")
    return z is not None and np.size(z) > 0


def soundness_check(cert: ConversionCertificate, j_phi: ChoiOperator, j_psi: ChoiOperator,
                    rng: np.random.Generator, n: int = 50) -> float:
    """Max trace distance ``|Psi(Xi(rho)) - Phi(rho)|_1`` over ``n`` random input states."""
    if cert.xi_choi is None:
        raise ValueError("certificate carries no pre-processing channel")
    worst = 0.0
    for _ in range(n):
        rho = la.random_state(j_phi.din, rng)
        diff = j_psi.apply(cert.xi_choi.apply(rho)) - j_phi.apply(rho)
        worst = max(worst, float(np.sum(np.abs(np.linalg.eigvalsh(la.herm(diff))))))
    return worst


# ---------------------------------------------------------------------------
# entropic witnesses
# ---------------------------------------------------------------------------


def tetrahedron_povm() -> list[np.ndarray]:
    """Symmetric informationally complete qubit POVM ``M_j = (I + n_j . sigma)/4``."""
    s = 1 / math.sqrt(3)
    vecs = [(s, s, s), (s, -s, -s), (-s, s, -s), (-s, -s, s)]
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1.0, -1.0]).astype(complex)
    return [(np.eye(2) + a * X + b * Y + c * Z) / 4 for a, b, c in vecs]


def measure_prepare_choi(povm: Sequence[np.ndarray], states: Sequence[np.ndarray]) -> ChoiOperator:
    """Choi of ``X -> sum_j Tr[M_j X] omega_j``: ``sum_j M_j^T (x) omega_j``."""
    if len(povm) != len(states):
        raise ValueError("need one prepared state per POVM element")
    m = sum(np.kron(np.asarray(M).T, np.asarray(w)) for M, w in zip(povm, states))
    return ChoiOperator.from_matrix(m, povm[0].shape[0], states[0].shape[0])


def post_process(j: ChoiOperator, e: ChoiOperator) -> HermitianOperator:
    """``(id (x) E)(J)`` as a bipartite operator on ``[in, D]``."""
    return HermitianOperator(DimProfile((("in", j.din), ("D", e.dout))), compose(e, j).mat)


def entropic_witness(j_phi: ChoiOperator, j_psi: ChoiOperator, e: ChoiOperator,
                     k: ConeSpec | None = None, tol: float | None = None) -> tuple[float, float]:
    """``(h_Psi, h_Phi)``: doubly restricted min-entropies after post-processing by ``E``.

    When ``Phi = Psi o Xi`` is feasible, ``h_Psi <= h_Phi`` (data processing).
    """
    h_psi = h_min_doubly_restricted(post_process(j_psi, e), k, tol=tol).value_bits
    h_phi = h_min_doubly_restricted(post_process(j_phi, e), k, tol=tol).value_bits
    return h_psi, h_phi


__all__ = [
    "ConversionCertificate", "SWAP_TRANSPOSE_SYMMETRIC", "contract_input", "preprocessing_program",
    "xi_from_e_choi", "compose", "preprocessing_feasible", "verify_infeasibility",
    "soundness_check", "tetrahedron_povm", "measure_prepare_choi", "post_process",
    "entropic_witness",
]
