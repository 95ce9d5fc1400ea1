"""File formats: observation CSVs, design JSON, atomic writes.

Observation CSV: one row per record, column ``subset`` holding
semicolon-separated ascending 0-based category indices (``"0;2;3"``),
optional ``weight`` column defaulting to 1. Pair CSV: columns
``subset_a`` and ``subset_b`` in the same encoding.

Design JSON: ``{"p", "labels", "kind", "nu", "alpha"}`` where ``kind``
is one of ``uniform | explicit | dummy | small_p``. Analytic kinds
(uniform, small_p) store only their parameters and are rebuilt exactly
on load; explicit designs list ``{"subset": [...], "prob": ...}``
entries.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from typing import Iterable

import numpy as np

from .design import DummyDesign, IndependentDesign, small_p_design, uniform_design
from .schema import CategorySchema, Observations, Subset


def atomic_write_text(path, text: str):
    """Write via a temp file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj, path):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _encode_mask(mask: int, p: int) -> str:
    return ";".join(str(j) for j in range(p) if mask >> j & 1)


def _decode_indices(cell: str) -> list[int]:
    cell = cell.strip()
    if not cell:
        return []
    return [int(tok) for tok in cell.split(";")]


def observations_to_csv(obs: Observations) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if obs.weights is None:
        writer.writerow(["subset"])
        for mask in obs.masks:
            writer.writerow([_encode_mask(int(mask), obs.p)])
    else:
        writer.writerow(["subset", "weight"])
        for mask, weight in zip(obs.masks, obs.weights):
            writer.writerow([_encode_mask(int(mask), obs.p), repr(float(weight))])
    return buf.getvalue()


def write_observations(obs: Observations, path):
    atomic_write_text(path, observations_to_csv(obs))


def observations_from_csv(text: str, p: int) -> Observations:
    reader = csv.DictReader(_io.StringIO(text))
    if reader.fieldnames is None or "subset" not in reader.fieldnames:
        raise ValueError("observation CSV needs a 'subset' column")
    has_weight = "weight" in reader.fieldnames
    masks: list[int] = []
    weights: list[float] = []
    for row in reader:
        masks.append(Subset.from_indices(_decode_indices(row["subset"]), p).mask)
        if has_weight:
            cell = (row.get("weight") or "").strip()
            weights.append(float(cell) if cell else 1.0)
    return Observations(np.array(masks, dtype=np.uint64), p,
                        np.array(weights) if has_weight else None)


def read_observations(path, p: int) -> Observations:
    with open(path, encoding="utf-8") as fh:
        return observations_from_csv(fh.read(), p)


def pairs_to_csv(masks_a: Iterable[int], masks_b: Iterable[int],
                 p: int, q: int) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["subset_a", "subset_b"])
    for ma, mb in zip(masks_a, masks_b):
        writer.writerow([_encode_mask(int(ma), p), _encode_mask(int(mb), q)])
    return buf.getvalue()


def pairs_from_csv(text: str, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    reader = csv.DictReader(_io.StringIO(text))
    need = {"subset_a", "subset_b"}
    if reader.fieldnames is None or not need.issubset(reader.fieldnames):
        raise ValueError("pair CSV needs 'subset_a' and 'subset_b' columns")
    masks_a: list[int] = []
    masks_b: list[int] = []
    for row in reader:
        masks_a.append(Subset.from_indices(_decode_indices(row["subset_a"]), p).mask)
        masks_b.append(Subset.from_indices(_decode_indices(row["subset_b"]), q).mask)
    return np.array(masks_a, dtype=np.uint64), np.array(masks_b, dtype=np.uint64)


# ---------------------------------------------------------------------------
# design serialization


def design_to_dict(design: IndependentDesign | DummyDesign, kind: str | None = None) -> dict:
    if isinstance(design, DummyDesign):
        inner = design_to_dict(design.base)
        return {"p": design.base.p, "labels": list(design.base.schema.labels or []) or None,
                "kind": "dummy", "alpha": design.alpha, "base": inner}
    kind = kind or design.kind
    out = {
        "p": design.p,
        "labels": list(design.schema.labels) if design.schema.labels else None,
        "kind": kind,
    }
    if kind == "small_p":
        # enlarged-domain construction: stored by its true-domain size
        out["p"] = design.p - 2
    if kind == "explicit":
        out["nu"] = [{"subset": list(Subset(int(m), design.p).indices), "prob": float(q)}
                     for m, q in zip(design.masks, design.probs)]
        if design.allow_small:
            out["allow_small"] = True
    return out


def design_from_dict(data: dict) -> IndependentDesign | DummyDesign:
    kind = data.get("kind", "explicit")
    labels = data.get("labels") or None
    p = int(data["p"])
    if kind == "uniform":
        design = uniform_design(p)
        if labels:
            design = IndependentDesign(CategorySchema(p, labels),
                                       zip(design.masks.tolist(), design.probs))
            design.kind = "uniform"
        return design
    if kind == "small_p":
        return small_p_design(p)
    if kind == "dummy":
        base = design_from_dict(data["base"])
        return DummyDesign(base, float(data["alpha"]))
    if kind == "explicit":
        schema = CategorySchema(p, labels)
        entries = [(Subset.from_indices(e["subset"], p).mask, float(e["prob"]))
                   for e in data["nu"]]
        return IndependentDesign(schema, entries,
                                 allow_small=bool(data.get("allow_small", False)))
    raise ValueError(f"unknown design kind {kind!r}")


def write_design(design, path, kind: str | None = None):
    dump_json(design_to_dict(design, kind), path)


def read_design(path):
    with open(path, encoding="utf-8") as fh:
        return design_from_dict(json.load(fh))


def output_schema(name: str) -> dict:
    """Shipped JSON schema for a CLI output file (estimates, audit, tests)."""
    here = os.path.dirname(__file__)
    with open(os.path.join(here, "schemas", f"{name}.schema.json"),
              encoding="utf-8") as fh:
        return json.load(fh)
