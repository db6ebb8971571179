"""Version tree of (DAG, cohort, ATE) analysis iterations.

DAG versions are deduplicated by a structural hash over the canonical form
(sorted nodes, sorted edges, treatment, outcome); layout changes never create
a new version. Cohorts are stored by row ids plus a fingerprint so they can be
restored against the immutable source dataset without duplicating data.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import dag as dag_mod
from .errors import HashMismatchError, SchemaError


def _digest(payload: object) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def dag_hash(document: dict) -> str:
    """Structural hash: canonical (nodes, edges, treatment, outcome), layout excluded."""
    parsed = dag_mod.import_dag_json(document)
    return _digest({
        "nodes": sorted(parsed.nodes),
        "edges": sorted([s, t] for s, t in parsed.edges),
        "treatment": parsed.treatment,
        "outcome": parsed.outcome,
    })


def cohort_fingerprint(row_ids) -> str:
    return _digest(sorted(int(i) for i in row_ids))


@dataclass(frozen=True)
class CohortVersion:
    fingerprint: str
    label: str
    row_ids: tuple[int, ...]
    n: int
    ate: float
    timestamp: str
    notes: str
    seq: int

    def to_json(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "label": self.label,
            "row_ids": list(self.row_ids),
            "n": self.n,
            "ate": self.ate,
            "timestamp": self.timestamp,
            "notes": self.notes,
            "seq": self.seq,
        }


@dataclass(frozen=True)
class DagVersion:
    hash: str
    label: str
    document: dict
    cohorts: tuple[CohortVersion, ...]

    def to_json(self) -> dict:
        return {
            "hash": self.hash,
            "label": self.label,
            "dag": self.document,
            "cohorts": [c.to_json() for c in self.cohorts],
        }


@dataclass(frozen=True)
class VersionTree:
    dags: tuple[DagVersion, ...] = field(default=())

    @property
    def n_cohorts(self) -> int:
        return sum(len(d.cohorts) for d in self.dags)

    def all_cohorts(self) -> list[tuple[DagVersion, CohortVersion]]:
        return [(d, c) for d in self.dags for c in d.cohorts]


def add_version(
    tree: VersionTree,
    dag_document: dict,
    cohort_row_ids,
    ate: float,
    notes: str = "",
    timestamp: str | None = None,
) -> VersionTree:
    """Append one analysis iteration; returns the updated tree.

    The DAG is stored in its normalized export form. ``timestamp`` defaults
    to the current UTC time; pass an explicit value (possibly empty) for
    reproducible output.
    """
    parsed = dag_mod.import_dag_json(dag_document)
    document = dag_mod.export_dag_json(parsed)
    digest = dag_hash(document)
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")

    row_ids = tuple(sorted(int(i) for i in cohort_row_ids))
    seq = tree.n_cohorts + 1

    dags = list(tree.dags)
    slot = next((k for k, d in enumerate(dags) if d.hash == digest), None)
    if slot is None:
        dags.append(DagVersion(digest, f"DAG {len(dags) + 1}", document, ()))
        slot = len(dags) - 1

    parent = dags[slot]
    cohort = CohortVersion(
        fingerprint=cohort_fingerprint(row_ids),
        label=f"Cohort {slot + 1}.{len(parent.cohorts) + 1}",
        row_ids=row_ids,
        n=len(row_ids),
        ate=float(ate),
        timestamp=timestamp,
        notes=notes,
        seq=seq,
    )
    dags[slot] = DagVersion(parent.hash, parent.label, parent.document, parent.cohorts + (cohort,))
    return VersionTree(tuple(dags))


def icicle_data(tree: VersionTree) -> dict:
    """Nested layout root -> DAG versions -> cohorts; DAG widths are their
    share of all cohort leaves."""
    total = tree.n_cohorts
    children = []
    for d in tree.dags:
        leaf_width = 1.0 / total if total else 0.0
        children.append({
            "name": d.label,
            "width": len(d.cohorts) / total if total else 0.0,
            "children": [
                {"name": c.label, "width": leaf_width, "ate": c.ate, "n": c.n}
                for c in d.cohorts
            ],
        })
    return {"name": "root", "width": 1.0 if total else 0.0, "children": children}


def ate_series(tree: VersionTree) -> list[tuple[str, float]]:
    """(cohort label, ate) across all DAG versions, in insertion order."""
    cohorts = sorted((c for _, c in tree.all_cohorts()), key=lambda c: c.seq)
    return [(c.label, c.ate) for c in cohorts]


def save_versions(tree: VersionTree) -> dict:
    return {"dags": [d.to_json() for d in tree.dags]}


def load_versions(document: object) -> VersionTree:
    """Inverse of :func:`save_versions`; hashes and fingerprints are
    recomputed and must match the stored values."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict) or not isinstance(document.get("dags"), list):
        raise SchemaError('versions document needs a "dags" list')

    dags = []
    fallback_seq = 0
    for d in document["dags"]:
        if not isinstance(d, dict) or "dag" not in d or "hash" not in d:
            raise SchemaError('each entry needs "hash" and "dag"')
        recomputed = dag_hash(d["dag"])
        if recomputed != d["hash"]:
            raise HashMismatchError(f"stored hash does not match DAG content for {d.get('label')}")
        cohorts = []
        for c in d.get("cohorts", []):
            required = {"fingerprint", "label", "row_ids", "n", "ate"}
            if not isinstance(c, dict) or not required <= c.keys():
                raise SchemaError(f"cohort entry missing fields: {required}")
            row_ids = tuple(int(i) for i in c["row_ids"])
            if cohort_fingerprint(row_ids) != c["fingerprint"]:
                raise HashMismatchError(f"stored fingerprint does not match row ids for {c['label']}")
            fallback_seq += 1
            cohorts.append(CohortVersion(
                fingerprint=c["fingerprint"],
                label=c["label"],
                row_ids=row_ids,
                n=int(c["n"]),
                ate=float(c["ate"]),
                timestamp=c.get("timestamp", ""),
                notes=c.get("notes", ""),
                seq=int(c.get("seq", fallback_seq)),
            ))
        dags.append(DagVersion(d["hash"], d.get("label", f"DAG {len(dags) + 1}"), d["dag"], tuple(cohorts)))
    return VersionTree(tuple(dags))
