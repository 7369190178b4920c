"""Text formats: Hamiltonian/formula JSON and sweep CSV.

Floats are written with 17 significant digits (``%.17g``) so every value
round-trips bit-exactly. Complex matrices are row-major lists of
``[re, im]`` pairs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np

from . import operators as ops
from .formulas import ProductFormula, Stage
from .lattice import PERIODIC, LatticeHamiltonian, LatticeTerm, TermGrouping


class FormatError(ValueError):
    pass


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise FormatError(f"cannot serialize non-finite value {x}")
    return format(x, ".17g")


def dumps(obj: Any, indent: int | None = 1, _level: int = 0) -> str:
    """JSON text with 17-significant-digit floats; lists of scalars stay on one line."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + ",".join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        flat = all(not isinstance(v, (dict, list, tuple)) for v in obj)
        pairs = all(isinstance(v, (list, tuple)) and len(v) == 2 and
                    not any(isinstance(u, (dict, list, tuple)) for u in v) for v in obj)
        if flat or pairs:
            return "[" + ", ".join(dumps(v, None) for v in obj) + "]"
        return "[" + ",".join(f"{pad}{dumps(v, indent, _level + 1)}" for v in obj) + end + "]"
    raise FormatError(f"cannot serialize {type(obj).__name__}")


def _matrix_to_pairs(m: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(m, dtype=np.complex128).ravel()]


def _pairs_to_matrix(pairs: Sequence[Sequence[float]]) -> np.ndarray:
    vals = np.array([complex(float(re), float(im)) for re, im in pairs], dtype=np.complex128)
    d = math.isqrt(vals.size)
    if d * d != vals.size:
        raise FormatError(f"matrix entry count {vals.size} is not a square")
    return vals.reshape(d, d)


def hamiltonian_to_dict(H: LatticeHamiltonian) -> dict:
    return {
        "n": H.n,
        "boundary": H.boundary,
        "range": H.range,
        "terms": [{"start": tm.start, "matrix": _matrix_to_pairs(tm.matrix)} for tm in H.terms],
        "scale_factor": float(H.scale_factor),
    }


def hamiltonian_from_dict(data: dict) -> LatticeHamiltonian:
    try:
        n = int(data["n"])
        boundary = str(data["boundary"])
        rng = int(data["range"])
        ops.check_qubits(n)
        terms = []
        for entry in data["terms"]:
            m = _pairs_to_matrix(entry["matrix"])
            w = ops.num_qubits(m.shape[0])
            sites = ops.window_sites(int(entry["start"]), w, n, wrap=boundary == PERIODIC)
            terms.append(LatticeTerm(sites, m))
        return LatticeHamiltonian(n, boundary, rng, tuple(terms), float(data["scale_factor"]))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed Hamiltonian document: {exc!r}") from exc


def dump_hamiltonian(H: LatticeHamiltonian) -> str:
    return dumps(hamiltonian_to_dict(H)) + "\n"


def load_hamiltonian(text: str) -> LatticeHamiltonian:
    return hamiltonian_from_dict(json.loads(text))


def formula_to_dict(F: ProductFormula) -> dict:
    return {
        "label": F.label,
        "claimed_order": F.claimed_order,
        "grouping": {"labels": list(F.grouping.labels), "groups": [list(g) for g in F.grouping.groups]},
        "stages": [[s.group, float(s.coeff)] for s in F.stages],
    }


def formula_from_dict(data: dict) -> ProductFormula:
    G = TermGrouping(tuple(tuple(g) for g in data["grouping"]["groups"]), tuple(data["grouping"]["labels"]))
    stages = tuple(Stage(int(g), float(c)) for g, c in data["stages"])
    return ProductFormula(G, stages, int(data["claimed_order"]), str(data["label"]))


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def rows_to_csv(header: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row.get(col)) for col in header])
    return buf.getvalue()


def rows_to_json(header: Sequence[str], rows: Iterable[dict], meta: dict | None = None) -> str:
    """``{"meta": {...}, "rows": [...]}`` with every row keyed by ``header``."""
    body = {"meta": dict(meta or {}), "rows": [{col: row.get(col) for col in header} for row in rows]}
    return dumps(body) + "\n"


def read_csv(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))
