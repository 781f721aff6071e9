"""Artifact serialization: CSV with a schema comment line, JSON with schema_version and kind."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import mpmath
import numpy as np

from .errors import ArtifactKindError, ConfigError
from .intervals import IntervalSet
from .words import Window

SCHEMA_VERSION = 1
CSV_PREFIX = "# quasispec schema_version="


def to_jsonable(obj: Any) -> Any:
    """Plain JSON structure; Fractions become {num, den} and complex numbers {re, im}."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, Fraction):
        return {"num": obj.numerator, "den": obj.denominator}
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, mpmath.mpf):
        return mpmath.nstr(obj, 17)
    if isinstance(obj, mpmath.mpc):
        return {"re": mpmath.nstr(obj.real, 17), "im": mpmath.nstr(obj.imag, 17)}
    if isinstance(obj, IntervalSet):
        return obj.to_list()
    if isinstance(obj, Window):
        return {"start": obj.start, "alphabet": list(obj.alphabet), "symbols": obj.to_list()}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(x) for x in items]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_jsonable_fraction(obj) -> Fraction:
    return Fraction(int(obj["num"]), int(obj["den"]))


def dumps_json(kind: str, data: Any) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "data": to_jsonable(data)}
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def write_json(path: str | Path, kind: str, data: Any) -> Path:
    path = Path(path)
    path.write_text(dumps_json(kind, data), encoding="utf-8")
    return path


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    return str(x)


def dumps_csv(kind: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"{CSV_PREFIX}{SCHEMA_VERSION} kind={kind}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def write_csv(path: str | Path, kind: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.write_text(dumps_csv(kind, header, rows), encoding="utf-8")
    return path


@dataclasses.dataclass(frozen=True)
class Artifact:
    kind: str
    schema_version: int
    fmt: str                            # "csv" or "json"
    header: tuple[str, ...] = ()
    rows: tuple[tuple[str, ...], ...] = ()
    data: Any = None

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.array([float(r[i]) for r in self.rows])


def read_artifact(path: str | Path) -> Artifact:
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith(CSV_PREFIX):
        first, _, rest = text.partition("\n")
        fields = dict(tok.split("=", 1) for tok in first[2:].split()[1:])
        rows = list(csv.reader(io.StringIO(rest)))
        if not rows:
            raise ConfigError(f"{path}: CSV artifact has no header row")
        return Artifact(fields["kind"], int(fields["schema_version"]), "csv",
                        tuple(rows[0]), tuple(tuple(r) for r in rows[1:]))
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: not a quasispec artifact ({e.msg})") from None
    if not isinstance(doc, dict) or "kind" not in doc or "schema_version" not in doc:
        raise ConfigError(f"{path}: missing kind or schema_version")
    return Artifact(doc["kind"], int(doc["schema_version"]), "json", data=doc.get("data"))


def intervals_from_artifact(a: Artifact) -> IntervalSet:
    if a.kind != "intervals":
        raise ArtifactKindError(f"expected an intervals artifact, got {a.kind!r}")
    return IntervalSet(np.column_stack([a.column("left"), a.column("right")])
                       if a.rows else np.empty((0, 2)))


def _numeric(x: str) -> float | None:
    try:
        return float(x)
    except ValueError:
        return None


def compare_artifacts(a: Artifact, b: Artifact, tolerance: float = 0.0) -> dict:
    """Differences between two artifacts of the same kind; an empty list means they agree."""
    if a.kind != b.kind:
        raise ArtifactKindError(f"cannot compare kind {a.kind!r} with kind {b.kind!r}")
    diffs: list[dict] = []
    report: dict = {"kind": a.kind, "tolerance": tolerance, "differences": diffs}
    if a.kind == "intervals":
        sa, sb = intervals_from_artifact(a), intervals_from_artifact(b)
        sd = sa.symmetric_difference_measure(sb)
        report["symmetric_difference"] = sd
        report["measures"] = [sa.measure, sb.measure]
        if sd > tolerance:
            diffs.append({"field": "intervals", "symmetric_difference": sd})
        return report
    if a.fmt != b.fmt:
        raise ArtifactKindError(f"format mismatch: {a.fmt} vs {b.fmt}")
    if a.fmt == "json":
        _diff_json(a.data, b.data, "", tolerance, diffs)
        return report
    if a.header != b.header:
        diffs.append({"field": "header", "a": list(a.header), "b": list(b.header)})
        return report
    if len(a.rows) != len(b.rows):
        diffs.append({"field": "rows", "a": len(a.rows), "b": len(b.rows)})
    for i, (ra, rb) in enumerate(zip(a.rows, b.rows)):
        for name, x, y in zip(a.header, ra, rb):
            if x == y:
                continue
            fx, fy = _numeric(x), _numeric(y)
            if fx is not None and fy is not None:
                d = abs(fx - fy) if not (math.isnan(fx) and math.isnan(fy)) else 0.0
                if d > tolerance:
                    diffs.append({"row": i, "field": name, "a": fx, "b": fy, "delta": d})
            else:
                diffs.append({"row": i, "field": name, "a": x, "b": y})
    return report


def _diff_json(x, y, path: str, tol: float, out: list) -> None:
    if isinstance(x, dict) and isinstance(y, dict):
        for k in sorted(set(x) | set(y)):
            if k not in x or k not in y:
                out.append({"field": f"{path}/{k}", "missing_in": "a" if k not in x else "b"})
            else:
                _diff_json(x[k], y[k], f"{path}/{k}", tol, out)
    elif isinstance(x, list) and isinstance(y, list):
        if len(x) != len(y):
            out.append({"field": path, "a_len": len(x), "b_len": len(y)})
        for i, (u, v) in enumerate(zip(x, y)):
            _diff_json(u, v, f"{path}/{i}", tol, out)
    elif isinstance(x, (int, float)) and isinstance(y, (int, float)) \
            and not isinstance(x, bool) and not isinstance(y, bool):
        if abs(x - y) > tol:
            out.append({"field": path, "a": x, "b": y, "delta": abs(x - y)})
    elif x != y:
        out.append({"field": path, "a": x, "b": y})
