"""Werner-state closed forms, the two-copy linear program and figure data.

Two parameterizations of the ``d x d`` Werner family are used::

    rho_lambda = 2 lambda/(d(d+1)) Pi_+ + 2(1-lambda)/(d(d-1)) Pi_-,   lambda in [0, 1]
    rho_alpha  = (I - alpha F) / (d(d - alpha)),                       alpha in [-1, 1]

with ``Pi_+/- = (I +/- F)/2``.  The states are entangled exactly for
``lambda < 1/2`` (``alpha > 1/d``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import xlogy

from . import linalg as la
from .cones import PPT
from .linalg import DimProfile, HermitianOperator

PARAM_TOL = 1e-12


def alpha_from_lambda(d: int, lam: float) -> float:
    return ((1 - 2 * lam) * d + 1) / (1 - 2 * lam + d)


def lambda_from_alpha(d: int, alpha: float) -> float:
    return (1 + d) * (1 - alpha) / (2 * (d - alpha))


@dataclass(frozen=True)
class WernerParams:
    d: int
    lam: float
    alpha: float

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("local dimension must be >= 2")
        if not -PARAM_TOL <= self.lam <= 1 + PARAM_TOL:
            raise ValueError(f"lambda={self.lam} outside [0, 1]")
        if not -1 - PARAM_TOL <= self.alpha <= 1 + PARAM_TOL:
            raise ValueError(f"alpha={self.alpha} outside [-1, 1]")
        if abs(alpha_from_lambda(self.d, self.lam) - self.alpha) > PARAM_TOL or \
                abs(lambda_from_alpha(self.d, self.alpha) - self.lam) > PARAM_TOL:
            raise ValueError("lambda and alpha are not related by the conversion formulas")


def convert_params(d: int, lam: float | None = None, alpha: float | None = None) -> WernerParams:
    """Complete a parameter pair from either ``lambda`` or ``alpha``."""
    if (lam is None) == (alpha is None):
        raise ValueError("give exactly one of lam, alpha")
    if lam is not None:
        if not 0 <= lam <= 1:
            raise ValueError(f"lambda={lam} outside [0, 1]")
        return WernerParams(d, float(lam), alpha_from_lambda(d, lam))
    if not -1 <= alpha <= 1:
        raise ValueError(f"alpha={alpha} outside [-1, 1]")
    return WernerParams(d, lambda_from_alpha(d, alpha), float(alpha))


def werner_projectors(d: int) -> tuple[np.ndarray, np.ndarray]:
    F = la.swap_matrix(d)
    I = np.eye(d * d)
    return (I + F) / 2, (I - F) / 2


def werner_state(p: WernerParams, labels: tuple[str, str] = ("A", "B")) -> HermitianOperator:
    d, lam = p.d, p.lam
    pp, pm = werner_projectors(d)
    m = 2 * lam / (d * (d + 1)) * pp + 2 * (1 - lam) / (d * (d - 1)) * pm
    return HermitianOperator(DimProfile(((labels[0], d), (labels[1], d))), m)


def werner_state_alpha(d: int, alpha: float, labels: tuple[str, str] = ("A", "B")) -> HermitianOperator:
    F = la.swap_matrix(d)
    m = (np.eye(d * d) - alpha * F) / (d * (d - alpha))
    return HermitianOperator(DimProfile(((labels[0], d), (labels[1], d))), m)


# ---------------------------------------------------------------------------
# single-copy norms
# ---------------------------------------------------------------------------


def werner_norm_closed(p: WernerParams, k_rank: int) -> float:
    """Reference closed form of ``||rho_alpha||`` on the rank-``k`` entanglement cone.

    ``k = 1``: ``(1 + min(alpha, 0)) / (d(d - alpha))``;
    ``k >= 2``: ``(1 + |alpha|) / (d(d - alpha))``.

    For ``alpha < 0`` the ``k = 1`` branch is smaller than the value attained by
    the product state ``|00>`` (see :func:`werner_norm_sep`).
    """
    if k_rank < 1:
        raise ValueError("k_rank must be >= 1")
    a, d = p.alpha, p.d
    if k_rank == 1:
        return (1 + min(a, 0.0)) / (d * (d - a))
    return (1 + abs(a)) / (d * (d - a))


def werner_norm_sep(p: WernerParams) -> float:
    """Separable-cone norm ``max_{a,b} <ab|rho_alpha|ab> = (1 - min(alpha, 0)) / (d(d - alpha))``.

    For ``alpha >= 0`` the maximum is at orthogonal ``a, b``; for ``alpha < 0`` at
    ``a = b``, where it coincides with the ``k >= 2`` value.
    """
    a, d = p.alpha, p.d
    return (1 - min(a, 0.0)) / (d * (d - a))


def product_state_norm_bruteforce(d: int, alpha: float) -> float:
    """Independent check of :func:`werner_norm_sep` from the two extreme product states."""
    rho = werner_state_alpha(d, alpha).mat
    e0 = np.eye(d)[0]
    e1 = np.eye(d)[1]
    same = np.kron(e0, e0)
    orth = np.kron(e0, e1)
    return float(max(same @ rho @ same, orth @ rho @ orth).real)


# ---------------------------------------------------------------------------
# two copies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LPResult:
    value: float
    w: float
    x: float
    y: float
    z: float
    status: str


def werner_two_copy_lp(d: int, lam: float, full: bool = False):
    """``||rho_lambda^{(x)2}||`` on the separable (= PPT on the invariant subspace) cone.

    Solves::

        max  lam^2 w + lam(1-lam)(x+y) + (1-lam)^2 z
        s.t. d+ (w+y) >= d- (x+z)
             d+ (w+x) >= d- (y+z)
             d+^2 w + d-^2 z >= d+ d- (x+y)
             d+^2 w + d+ d- (x+y) + d-^2 z = 4/d^2
             w, x, y, z >= 0

    with ``d+ = d+1`` and ``d- = d-1`` (HiGHS dual simplex).
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if not 0 <= lam <= 1:
        raise ValueError("lambda outside [0, 1]")
    dp, dm = d + 1.0, d - 1.0
    c = -np.array([lam * lam, lam * (1 - lam), lam * (1 - lam), (1 - lam) ** 2])
    A_ub = -np.array([
        [dp, -dm, dp, -dm],
        [dp, dp, -dm, -dm],
        [dp * dp, -dp * dm, -dp * dm, dm * dm],
    ])
    b_ub = np.zeros(3)
    A_eq = np.array([[dp * dp, dp * dm, dp * dm, dm * dm]])
    b_eq = np.array([4.0 / d**2])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * 4,
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"Werner LP failed: {res.message}")
    out = LPResult(-res.fun, *res.x, status="optimal")
    return out if full else out.value


def werner_two_copy_sdp(d: int, lam: float, tol: float | None = None, with_report: bool = False):
    """Unreduced oracle: PPT-cone norm of ``rho^{(x)2}`` on ``(A1 A2 : B1 B2)``."""
    from .entropies import conic_norm

    rho = werner_state(convert_params(d, lam=lam)).mat
    two = HermitianOperator(
        DimProfile((("A1", d), ("B1", d), ("A2", d), ("B2", d))), np.kron(rho, rho)
    )
    return conic_norm(two, PPT(("B1", "B2")), tol=tol, with_report=with_report)


# ---------------------------------------------------------------------------
# relative entropies
# ---------------------------------------------------------------------------


def werner_dmax_sep_closed(d: int, lam: float) -> float:
    """``D_max^Sep(rho_lambda || I (x) pi)`` in bits.

    The twirling argument behind this form needs a twirl-invariant reference, so
    it holds for ``omega = pi``; for other states ``omega`` the value is larger
    (checked numerically in the test suite).
    """
    if lam >= (d + 1) / (2 * d):
        return math.log2(2 * lam / (d + 1))
    return math.log2((d + 1 - 2 * lam) / (d * d - 1))


def kappa(d: int, lam: float) -> float:
    """``kappa_lambda`` (bits), written so that ``lambda in {0, 1}`` use ``0 log 0 = 0``."""
    return float(
        xlogy(lam, lam) + xlogy(1 - lam, 1 - lam)
        + lam * math.log((d - 1) / (d + 1)) + math.log(2 / (d * (d - 1)))
    ) / math.log(2)


def werner_relent_bounds(d: int, lam: float) -> tuple[float, float]:
    """``(kappa, kappa + log2 d)``: bounds on ``D(rho_lambda || I (x) omega)`` over states ``omega``."""
    k = kappa(d, lam)
    return k, k + math.log2(d)


def binary_entropy(p: float) -> float:
    return float(-(xlogy(p, p) + xlogy(1 - p, 1 - p)) / math.log(2))


@dataclass(frozen=True)
class ScanResult:
    lam: float
    d: int | None
    capped: bool


def separation_scan(lam: float, d_cap: int = 64) -> ScanResult:
    """Smallest ``d <= d_cap`` with ``D_max^Sep(rho_lambda||I (x) pi) < D(rho_lambda||I (x) pi)``.

    For ``lambda < 1/2`` the inequality reduces to
    ``log2[(d + 1 - 2 lambda)/(d + 1)] + lambda log2[(d + 1)/(d - 1)] < 1 - h(lambda)``;
    the left side vanishes as ``d -> oo`` so a separating ``d`` exists unless ``lambda = 1/2``.
    """
    if not 0 <= lam < 0.5:
        if lam == 0.5:
            return ScanResult(lam, None, False)
        raise ValueError("separation scan needs lambda in [0, 1/2]")
    rhs = 1 - binary_entropy(lam)
    for d in range(2, d_cap + 1):
        lhs = math.log2((d + 1 - 2 * lam) / (d + 1)) + lam * math.log2((d + 1) / (d - 1))
        if lhs < rhs - 1e-12:
            return ScanResult(lam, d, False)
    return ScanResult(lam, None, True)


# ---------------------------------------------------------------------------
# non-multiplicativity figure
# ---------------------------------------------------------------------------

CURVE_HEADER = ("lambda", "single", "single_sq", "twocopy", "ratio")


def curve_row(d: int, lam: float) -> tuple[float, float, float, float, float]:
    single = werner_norm_closed(convert_params(d, lam=lam), 1)
    two = werner_two_copy_lp(d, lam)
    sq = single * single
    ratio = two / sq if sq > 0 else math.inf
    return lam, single, sq, two, ratio


def nonmultiplicativity_curve(d: int, grid: Sequence[float] | int = 200) -> list[tuple]:
    """Rows ``(lambda, single, single^2, twocopy, ratio)`` over a grid of ``lambda``."""
    if isinstance(grid, int):
        grid = np.linspace(0.0, 1.0, grid)
    grid = [float(x) for x in grid]
    if any(not 0 <= x <= 1 for x in grid):
        raise ValueError("grid must lie in [0, 1]")
    return [curve_row(d, lam) for lam in grid]


def ratio_crossings(d: int, grid: int = 200, excess: float = 1e-7, xtol: float = 1e-4) -> list[float]:
    """Boundaries of the region where the ratio exceeds ``1 + excess``, refined by bisection."""
    lams = np.linspace(0.0, 1.0, grid)

    def above(lam: float) -> bool:
        return curve_row(d, lam)[4] > 1 + excess

    flags = [above(x) for x in lams]
    out = []
    for i in range(len(lams) - 1):
        if flags[i] != flags[i + 1]:
            lo, hi = lams[i], lams[i + 1]
            f_lo = flags[i]
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                if above(mid) == f_lo:
                    lo = mid
                else:
                    hi = mid
            out.append(0.5 * (lo + hi))
    return out


def write_curve_csv(rows: Iterable[tuple], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_HEADER)
        for r in rows:
            w.writerow([f"{v:.15g}" for v in r])
