"""JSON operator files.

Format::

    {
      "dims": [["A", 2], ["B", 2]],          # ordered (label, dim) factors
      "real": [[...], ...],                  # row-major real part
      "imag": [[...], ...],                  # optional imaginary part
      "kind": "operator" | "channel"         # optional; channels have factors [in, out]
    }

Files whose ``dims`` is a plain list of integers (no labels) are accepted and
labelled ``S0, S1, ...`` with a warning.  Floats are written with ``repr``
precision, so a write/read cycle reproduces every entry exactly.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np

from .linalg import ChoiOperator, DimProfile, HermitianOperator

HERMITIAN_TOL = 1e-9


class OperatorFileError(ValueError):
    """Malformed or invalid operator file."""


class ParseError(OperatorFileError):
    def __init__(self, path, msg: str, line: int | None = None, col: int | None = None):
        where = f"{path}" + (f":{line}:{col}" if line is not None else "")
        super().__init__(f"{where}: {msg}")
        self.path, self.line, self.col = path, line, col


class ValidationError(OperatorFileError):
    pass


def _profile(raw, path, n: int) -> DimProfile:
    if raw is None:
        warnings.warn(f"{path}: no dims given; treating as a single factor 'S0'", UserWarning,
                      stacklevel=3)
        return DimProfile.auto([n])
    if not isinstance(raw, list) or not raw:
        raise ValidationError(f"{path}: 'dims' must be a non-empty list")
    if all(isinstance(d, int) for d in raw):
        warnings.warn(f"{path}: unlabelled dims {raw}; auto-labelling factors S0, S1, ...",
                      UserWarning, stacklevel=3)
        return DimProfile.auto(raw)
    try:
        return DimProfile(tuple((str(lbl), int(d)) for lbl, d in raw))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: bad 'dims' entry: {exc}") from None


def _matrix(doc: dict, path) -> np.ndarray:
    if "real" not in doc:
        raise ValidationError(f"{path}: missing 'real' matrix")
    try:
        re = np.array(doc["real"], dtype=float)
        im = np.array(doc["imag"], dtype=float) if doc.get("imag") is not None else np.zeros_like(re)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: matrix entries must be numbers ({exc})") from None
    if re.ndim != 2 or re.shape[0] != re.shape[1]:
        raise ValidationError(f"{path}: matrix must be square, got shape {re.shape}")
    if im.shape != re.shape:
        raise ValidationError(f"{path}: 'imag' shape {im.shape} differs from 'real' {re.shape}")
    return re + 1j * im if np.any(im) else re.astype(complex)


def loads_operator(text: str, path: str = "<string>") -> HermitianOperator:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError(path, "top level must be a JSON object")
    m = _matrix(doc, path)
    dims = _profile(doc.get("dims"), path, m.shape[0])
    if dims.total != m.shape[0]:
        raise ValidationError(
            f"{path}: dims {dims.dims} have product {dims.total} but the matrix is {m.shape[0]}x{m.shape[0]}"
        )
    dev = float(np.max(np.abs(m - m.conj().T)))
    if dev > HERMITIAN_TOL:
        raise ValidationError(f"{path}: matrix is not Hermitian (deviation {dev:.3e})")
    return HermitianOperator(dims, m)


def parse_operator_file(path) -> HermitianOperator:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise OperatorFileError(f"{path}: {exc.strerror}") from None
    return loads_operator(text, str(path))


def parse_channel_file(path) -> ChoiOperator:
    op = parse_operator_file(path)
    if len(op.dims.factors) != 2:
        raise ValidationError(f"{path}: a channel file needs exactly two factors [in, out]")
    return ChoiOperator(op)


def dumps_operator(x, kind: str = "operator") -> str:
    op = x.op if isinstance(x, ChoiOperator) else x
    if isinstance(x, ChoiOperator):
        kind = "channel"
    m = np.asarray(op.mat)
    doc = {
        "kind": kind,
        "dims": [[lbl, d] for lbl, d in op.dims.factors],
        "real": m.real.tolist(),
    }
    if np.any(m.imag):
        doc["imag"] = m.imag.tolist()
    return json.dumps(doc, indent=1)


def write_operator_file(x, path) -> None:
    Path(path).write_text(dumps_operator(x) + "\n")
