"""Parameter sweeps written as CSV (``parameter,value,dual_value,gap,status``).

Each sweepable quantity is a top-level function ``f(x, fixed) -> (value, dual, gap, status)``
so that sweeps can run in worker processes.  Rows are always written in grid
order; a failing point is recorded inline with status ``error: ...``.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg as la
from . import werner
from .cones import Diagonal, PPT, from_cli
from .engine import SolverError
from .entropies import (EntropyResult, d_max_restricted, h_min_restricted,
                        hypothesis_testing_restricted, smoothed)
from .io import parse_operator_file

CSV_HEADER = ("parameter", "value", "dual_value", "gap", "status")
Row = tuple[float, float, float, float, str]


def _from_result(res: EntropyResult) -> tuple[float, float, float, str]:
    status = res.report.status if res.report is not None else "closed-form"
    return res.value_bits, res.dual_bits, res.gap, status


def _cone(fixed: dict, dims):
    return from_cli(fixed.get("cone", "pos"), dims, fixed.get("cut"), fixed.get("blocks"))


def _smooth(quantity: str):
    def run(x: float, fixed: dict):
        rho = parse_operator_file(fixed["state"])
        q = parse_operator_file(fixed["q"]) if quantity == "dmax" else None
        res = smoothed(quantity, rho, x, _cone(fixed, rho.dims), Q=q,
                       direction=fixed.get("direction", "A|B"), tol=fixed.get("tol"))
        return _from_result(res)
    return run


_smooth_dmax = _smooth("dmax")
_smooth_hmin = _smooth("hmin")


def _dh(x: float, fixed: dict):
    p = parse_operator_file(fixed["state"])
    q = parse_operator_file(fixed["q"])
    return _from_result(hypothesis_testing_restricted(p, q, x, _cone(fixed, p.dims), tol=fixed.get("tol")))


def coherent_dmax_rate(n: int, tol: float | None = None) -> EntropyResult:
    """``(1/n) D_max^{Diagonal}(varsigma_2^{(x)n} || pi_2^{(x)n})`` (bits per copy)."""
    rho = la.tensor(*[la.max_coherent(2, f"S{i}") for i in range(n)])
    pi = la.tensor(*[la.maximally_mixed(la.DimProfile(((f"S{i}", 2),))) for i in range(n)])
    res = d_max_restricted(rho, pi, Diagonal(), tol=tol)
    return EntropyResult(res.value_bits / n, res.program_value, res.report, "d_max",
                         {"copies": n})


def singlet_hmin_rate(n: int, tol: float | None = None) -> EntropyResult:
    """``(1/n) H_min^{PPT}(A^n|B^n)`` at ``tau_2^{(x)n}`` (bits per copy)."""
    taus = [la.max_entangled(2, (f"A{i}", f"B{i}")) for i in range(n)]
    rho = la.tensor(*taus)
    a = tuple(f"A{i}" for i in range(n))
    b = tuple(f"B{i}" for i in range(n))
    rho = rho.permute(list(a) + list(b))
    res = h_min_restricted(rho, PPT(b), "A|B", tol=tol, a_labels=a)
    return EntropyResult(res.value_bits / n, res.program_value, res.report, "h_min",
                         {"copies": n})


def _per_copy(fn):
    def run(x: float, fixed: dict):
        return _from_result(fn(int(round(x)), fixed.get("tol")))
    return run


def _werner_ratio(x: float, fixed: dict):
    row = werner.curve_row(int(fixed.get("d", 3)), x)
    return row[4], math.nan, 0.0, "optimal"


@dataclass(frozen=True)
class Quantity:
    fn: Callable
    parameter: str
    lo: float
    hi: float
    integer: bool = False
    hi_open: bool = False
    needs: tuple[str, ...] = ()


QUANTITIES: dict[str, Quantity] = {
    "smooth-dmax": Quantity(_smooth_dmax, "epsilon", 0.0, 1.0, hi_open=True, needs=("state", "q")),
    "smooth-hmin": Quantity(_smooth_hmin, "epsilon", 0.0, 1.0, hi_open=True, needs=("state",)),
    "dh": Quantity(_dh, "epsilon", 0.0, 1.0, needs=("state", "q")),
    "coherent-dmax-rate": Quantity(_per_copy(coherent_dmax_rate), "n", 1, 4, integer=True),
    "singlet-hmin-rate": Quantity(_per_copy(singlet_hmin_rate), "n", 1, 3, integer=True),
    "werner-ratio": Quantity(_werner_ratio, "lambda", 0.0, 1.0),
}


@dataclass(frozen=True)
class SweepSpec:
    quantity: str
    start: float
    stop: float
    points: int
    fixed: dict = field(default_factory=dict)
    out: str | None = None
    parameter: str | None = None

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown sweep quantity {self.quantity!r}; choose from {sorted(QUANTITIES)}")
        q = QUANTITIES[self.quantity]
        if self.parameter is not None and self.parameter != q.parameter:
            raise ValueError(f"{self.quantity} sweeps {q.parameter!r}, not {self.parameter!r}")
        if self.points < 2:
            raise ValueError("a sweep needs at least 2 grid points")
        for x in (self.start, self.stop):
            if x < q.lo or x > q.hi or (q.hi_open and x >= q.hi):
                bracket = ")" if q.hi_open else "]"
                raise ValueError(f"{q.parameter}={x} outside [{q.lo}, {q.hi}{bracket}")
        if q.integer:
            g = self.grid()
            if np.any(np.abs(g - np.round(g)) > 1e-12):
                raise ValueError(f"{q.parameter} grid must consist of integers, got {g.tolist()}")
        missing = [k for k in q.needs if k not in self.fixed]
        if missing:
            raise ValueError(f"{self.quantity} needs fixed arguments {missing}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


def _evaluate(args) -> Row:
    name, x, fixed = args
    try:
        v, d, g, s = QUANTITIES[name].fn(x, fixed)
    except (SolverError, ValueError, RuntimeError) as exc:
        return x, math.nan, math.nan, math.nan, f"error: {exc}"
    return x, float(v), float(d), float(g), s


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[Row]:
    """Evaluate the grid (optionally over ``jobs`` processes) and write the CSV if ``spec.out``."""
    tasks = [(spec.quantity, float(x), dict(spec.fixed)) for x in spec.grid()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_evaluate, tasks))  # map preserves grid order
    else:
        rows = [_evaluate(t) for t in tasks]
    if spec.out is not None:
        write_csv(rows, spec.out)
    return rows


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def write_csv(rows, path) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    if not os.access(directory, os.W_OK):
        raise OSError(f"cannot write to {path}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
