"""Synthetic student-performance study for demos and the scenario tests.

The table follows the layout of the UCI Student Performance (Mathematics)
data after dropping its seven sensitive or open-ended attributes: 26 columns,
395 rows. The real file is not redistributable here, so this generator
produces a seeded stand-in with the same schema and a known confounding
structure: students fall into a limited number of background profiles, the
profile drives both absenteeism and grades, and a handful of unrelated
columns are pure noise.

Run ``python -m causalab.demo OUTDIR`` to write ``students.csv`` and a
matching ``dag.json`` (treatment ``absences``, outcome ``G1``, six confounders
and four prognostic factors).
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import dag as dag_mod

N_ROWS = 395
DEFAULT_SEED = 20240311

CONFOUNDERS = ("Pstatus", "famsup", "health", "Medu", "internet", "failures")
PROGNOSTICS = ("paid", "studytime", "schoolsup", "higher")

COLUMNS = (
    "address", "famsize", "Pstatus", "Medu", "Fedu", "traveltime", "studytime",
    "failures", "schoolsup", "famsup", "paid", "activities", "nursery",
    "higher", "internet", "romantic", "famrel", "freetime", "goout", "Dalc",
    "Walc", "health", "absences", "G1", "G2", "G3",
)


def _profiles(rng: np.random.Generator, k: int) -> list[dict]:
    """Background profiles over the ten adjustment covariates.

    Students share covariate patterns within a profile, which keeps the
    number of distinct patterns small enough for near-exact matching.
    """
    profiles = []
    for _ in range(k):
        profiles.append({
            "Pstatus": "T" if rng.random() < 0.85 else "A",
            "famsup": "yes" if rng.random() < 0.6 else "no",
            "health": int(rng.integers(1, 6)),
            "Medu": int(rng.integers(0, 5)),
            "internet": "yes" if rng.random() < 0.75 else "no",
            "failures": int(rng.choice([0, 0, 0, 1, 1, 2, 3])),
            "paid": "yes" if rng.random() < 0.45 else "no",
            "studytime": int(rng.integers(1, 5)),
            "schoolsup": "yes" if rng.random() < 0.15 else "no",
            "higher": "yes" if rng.random() < 0.9 else "no",
        })
    return profiles


def _confounding_score(p: dict) -> float:
    """Latent tendency toward absenteeism; also depresses grades."""
    return (
        0.9 * (p["internet"] == "no")
        + 0.28 * (3 - p["health"])
        + 0.55 * p["failures"]
        + 0.22 * (2 - p["Medu"])
        + 0.45 * (p["famsup"] == "no")
        + 0.6 * (p["Pstatus"] == "A")
    )


def student_rows(seed: int = DEFAULT_SEED, n: int = N_ROWS) -> list[dict]:
    rng = np.random.default_rng(seed)
    profiles = _profiles(rng, 13)
    assignment = rng.integers(0, len(profiles), size=n)

    rows = []
    for i in range(n):
        p = profiles[assignment[i]]
        s = _confounding_score(p)
        absences = int(rng.poisson(np.exp(1.05 + 0.38 * s)))
        grade = (
            12.0
            - 0.75 * s
            - 0.16 * absences
            + 0.5 * (p["studytime"] - 2)
            + 1.4 * (p["higher"] == "yes")
            - 0.8 * (p["schoolsup"] == "yes")
            + 0.5 * (p["paid"] == "yes")
            + rng.normal(0, 1.6)
        )
        g1 = int(np.clip(round(grade), 0, 20))
        g2 = int(np.clip(round(grade + rng.normal(0, 1.2)), 0, 20))
        g3 = int(np.clip(round(grade + rng.normal(0, 1.5)), 0, 20))
        rows.append({
            **p,
            "address": "U" if rng.random() < 0.78 else "R",
            "famsize": "GT3" if rng.random() < 0.71 else "LE3",
            "Fedu": int(rng.integers(0, 5)),
            "traveltime": int(rng.choice([1, 1, 1, 2, 2, 3, 4])),
            "activities": "yes" if rng.random() < 0.5 else "no",
            "nursery": "yes" if rng.random() < 0.79 else "no",
            "romantic": "yes" if rng.random() < 0.33 else "no",
            "famrel": int(rng.choice([1, 2, 3, 4, 4, 4, 5, 5])),
            "freetime": int(rng.integers(1, 6)),
            "goout": int(rng.integers(1, 6)),
            "Dalc": int(rng.choice([1, 1, 1, 1, 2, 2, 3, 4, 5])),
            "Walc": int(rng.choice([1, 1, 2, 2, 3, 3, 4, 5])),
            "health": p["health"],
            "absences": absences,
            "G1": g1,
            "G2": g2,
            "G3": g3,
        })
    return rows


def write_student_study(path, seed: int = DEFAULT_SEED, n: int = N_ROWS) -> None:
    rows = student_rows(seed, n)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def student_dag() -> dict:
    """Hypothesized causal structure: six confounders of absences and grade,
    four prognostic factors of grade only."""
    dag = dag_mod.CausalDag.build(
        nodes=("absences", "G1") + CONFOUNDERS + PROGNOSTICS,
        edges=[("absences", "G1")]
        + [(c, "absences") for c in CONFOUNDERS]
        + [(c, "G1") for c in CONFOUNDERS]
        + [(p, "G1") for p in PROGNOSTICS],
        treatment="absences",
        outcome="G1",
    )
    return dag_mod.export_dag_json(dag)


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    out_dir = Path(args[0]) if args else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_student_study(out_dir / "students.csv")
    (out_dir / "dag.json").write_text(json.dumps(student_dag(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out_dir / 'students.csv'} and {out_dir / 'dag.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
