"""Command-line entry point for scripted pipeline runs and golden fixtures.

Every subcommand writes one JSON document to stdout (or ``--out``) and logs to
stderr. All randomness is controlled by ``--seed``, so identical invocations
produce byte-identical output. Exit codes: 0 success, 1 validation/usage
error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import balance as balance_mod
from . import dag as dag_mod
from . import dataset as dataset_mod
from . import effects as effects_mod
from . import matching as matching_mod
from . import propensity as propensity_mod
from . import provenance as provenance_mod
from .dataset import ColumnKind
from .errors import EngineError, ParseError


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _read_json(path: str) -> object:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _IoError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


class _IoError(Exception):
    pass


def _load_dataset(path: str) -> dataset_mod.Dataset:
    try:
        return dataset_mod.load_csv(path)
    except OSError as exc:
        raise _IoError(f"cannot read {path}: {exc}") from exc


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise _IoError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _split_covariates(raw: str) -> list[str]:
    names = [part.strip() for part in raw.split(",") if part.strip()]
    if not names:
        raise ParseError("empty covariate list")
    return names


def _resolve_covariates(ds: dataset_mod.Dataset, names: list[str]) -> tuple[dataset_mod.Dataset, list[str]]:
    """Expand categorical covariates to their one-hot indicator columns."""
    resolved: list[str] = []
    for name in names:
        col = ds.column(name)
        if col.kind is ColumnKind.CATEGORICAL:
            before = set(ds.names)
            ds = dataset_mod.one_hot(ds, name)
            added = [n for n in ds.names if n not in before]
            print(f"note: expanded categorical {name!r} to {added}", file=sys.stderr)
            resolved.extend(added)
        else:
            resolved.append(name)
    return ds, resolved


def _scores_from_file(path: str, n_expected: int | None = None) -> np.ndarray:
    """Accept either the propensity subcommand's output or a bare array."""
    doc = _read_json(path)
    if isinstance(doc, dict) and "scores" in doc:
        scores = doc["scores"]
    elif isinstance(doc, list):
        scores = doc
    else:
        raise ParseError(f"{path}: expected a scores array or propensity output")
    arr = np.asarray(scores, dtype=float)
    if n_expected is not None and len(arr) != n_expected:
        raise ParseError(f"{path}: {len(arr)} scores for {n_expected} rows")
    return arr


def _weights_from_file(path: str, ds: dataset_mod.Dataset, treatment: str | None) -> propensity_mod.WeightVector:
    """Accept explicit weights, or scores (from which IPW weights are built)."""
    doc = _read_json(path)
    if isinstance(doc, dict) and "weights" in doc:
        return propensity_mod.WeightVector(
            np.asarray(doc["weights"], dtype=float), bool(doc.get("stabilized", False))
        )
    if isinstance(doc, dict) and "scores" in doc:
        if treatment is None:
            raise ParseError("building weights from scores requires --treatment")
        flags = dataset_mod.binary_flags(ds, treatment)
        return propensity_mod.ipw_weights(np.asarray(doc["scores"], dtype=float), flags)
    if isinstance(doc, list):
        return propensity_mod.WeightVector(np.asarray(doc, dtype=float))
    raise ParseError(f"{path}: expected weights, scores, or propensity output")


def _parse_thresholds(entries: list[str]) -> dict[str, float]:
    thresholds = {}
    for entry in entries:
        name, sep, value = entry.partition("=")
        if not sep or not name:
            raise ParseError(f"--threshold expects name=value, got {entry!r}")
        try:
            thresholds[name.strip()] = float(value)
        except ValueError:
            raise ParseError(f"--threshold {entry!r}: {value!r} is not a number") from None
    return thresholds


# --- subcommands --------------------------------------------------------------


def _cmd_classify(args) -> None:
    dag = dag_mod.import_dag_json(_read_json(args.dag))
    _emit(dag_mod.classify(dag).to_json(), args.out)


def _cmd_propensity(args) -> None:
    ds = _load_dataset(args.data)
    ds, covariates = _resolve_covariates(ds, _split_covariates(args.covariates))
    model = propensity_mod.fit_propensity(ds, covariates, args.treatment)
    complete, _ = dataset_mod.drop_missing(ds, covariates + [args.treatment])
    scores = propensity_mod.predict(model, complete)
    _emit({
        "model": model.to_json(),
        "row_ids": complete.row_ids.tolist(),
        "scores": scores.tolist(),
    }, args.out)


def _cmd_balance(args) -> None:
    ds = _load_dataset(args.data)
    ds, covariates = _resolve_covariates(ds, _split_covariates(args.covariates))
    adjusted = None
    weights = None
    if args.adjusted:
        adjusted = _load_dataset(args.adjusted)
        for name in covariates:
            if not adjusted.has_column(name):
                adjusted, _ = _resolve_covariates(adjusted, [name.split("=")[0]])
    if args.weights:
        weights = _weights_from_file(args.weights, ds, args.treatment)
    report = balance_mod.balance_report(ds, covariates, args.treatment, adjusted, weights)
    _emit(report.to_json(), args.out)


def _cmd_match(args) -> None:
    ds = _load_dataset(args.data)
    covariates: list[str] = []
    if args.covariates:
        ds, covariates = _resolve_covariates(ds, _split_covariates(args.covariates))
    scores = _scores_from_file(args.scores, ds.n_rows) if args.scores else None
    order = matching_mod.MatchOrder.DESCENDING_PROPENSITY if scores is not None else matching_mod.MatchOrder.DATA
    spec = matching_mod.MatchSpec(
        metric=matching_mod.Metric(args.metric),
        covariates=tuple(covariates),
        caliper=args.caliper,
        order=order,
    )
    result = matching_mod.match(ds, args.treatment, spec, scores)
    _emit(result.to_json(), args.out)


def _cmd_effects(args) -> None:
    ds = _load_dataset(args.data)
    if args.match and args.weights:
        raise ParseError("pass --match or --weights, not both")

    if args.weights:
        if not args.treatment:
            raise ParseError("--weights route requires --treatment")
        weights = _weights_from_file(args.weights, ds, args.treatment)
        record = effects_mod.ate_ipw(ds, args.treatment, args.outcome, weights, seed=args.seed)
        _emit(record.to_json(), args.out)
        return

    if not args.match:
        raise ParseError("effects requires --match or --weights")
    result = matching_mod.MatchResult.from_json(_read_json(args.match))
    ites = effects_mod.pair_effects(result, ds, args.outcome)

    if args.facet:
        variables = _split_covariates(args.facet)
        thresholds = _parse_thresholds(args.threshold or [])
        spec = effects_mod.SubgroupSpec(tuple(variables), tuple(thresholds.items()))
        treated_ids = [t for t, _, _ in result.pairs]
        table = effects_mod.facet(ites, ds, spec, unit_ids=treated_ids)
        _emit(table.to_json(), args.out)
    else:
        record = effects_mod.ate_matched(ites, seed=args.seed)
        _emit(record.to_json(), args.out)


def _cmd_versions(args) -> None:
    store = Path(args.file)
    tree = provenance_mod.load_versions(_read_json(args.file)) if store.exists() else provenance_mod.VersionTree()

    cohort_doc = _read_json(args.cohort)
    if isinstance(cohort_doc, dict) and "pairs" in cohort_doc:
        result = matching_mod.MatchResult.from_json(cohort_doc)
        row_ids = sorted({i for t, c, _ in result.pairs for i in (t, c)})
    elif isinstance(cohort_doc, dict) and "row_ids" in cohort_doc:
        row_ids = cohort_doc["row_ids"]
    elif isinstance(cohort_doc, list):
        row_ids = cohort_doc
    else:
        raise ParseError(f"{args.cohort}: expected row ids or a match result")

    tree = provenance_mod.add_version(
        tree,
        _read_json(args.dag),
        row_ids,
        args.ate,
        notes=args.notes,
        timestamp=args.timestamp,
    )
    doc = provenance_mod.save_versions(tree)
    try:
        store.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise _IoError(f"cannot write {args.file}: {exc}") from exc
    _emit(doc, args.out)


def _cmd_serve(args) -> None:
    import os

    import uvicorn

    from .service import create_app

    # flags win over env vars over defaults
    port = args.port if args.port is not None else int(os.environ.get("PORT", 8787))
    state_dir = args.state_dir or os.environ.get("STATE_DIR")
    max_upload = args.max_upload_mb if args.max_upload_mb is not None else int(
        os.environ.get("MAX_UPLOAD_MB", 64)
    )
    app = create_app(state_dir=state_dir, max_upload_mb=max_upload)
    uvicorn.run(app, host=args.host, port=port, log_level="info")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="causalab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write JSON here instead of stdout")
        p.add_argument("--seed", type=int, default=42, help="seed for all randomness (default 42)")

    p = sub.add_parser("classify", help="variable types from a DAG document")
    p.add_argument("--dag", required=True)
    common(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("propensity", help="fit propensity model and score the cohort")
    p.add_argument("--data", required=True)
    p.add_argument("--treatment", required=True)
    p.add_argument("--covariates", required=True, help="comma-separated column names")
    common(p)
    p.set_defaults(func=_cmd_propensity)

    p = sub.add_parser("balance", help="aSMD balance report")
    p.add_argument("--data", required=True)
    p.add_argument("--treatment", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--adjusted", help="CSV of the adjusted cohort")
    p.add_argument("--weights", help="JSON with weights or scores")
    common(p)
    p.set_defaults(func=_cmd_balance)

    p = sub.add_parser("match", help="greedy 1:1 nearest-neighbor matching")
    p.add_argument("--data", required=True)
    p.add_argument("--treatment", required=True)
    p.add_argument("--metric", default="logit", choices=[m.value for m in matching_mod.Metric])
    p.add_argument("--scores", help="JSON scores (propensity subcommand output)")
    p.add_argument("--covariates", help="comma-separated names for the mahalanobis metric")
    p.add_argument("--caliper", type=float)
    common(p)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("effects", help="treatment effects: matched ATE, IPW ATE, or facets")
    p.add_argument("--data", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--match", help="match result JSON (matched route)")
    p.add_argument("--weights", help="weights JSON (IPW route)")
    p.add_argument("--treatment", help="required for the IPW route")
    p.add_argument("--facet", help="comma-separated subgroup variables (up to 3)")
    p.add_argument("--threshold", action="append", metavar="NAME=VALUE",
                   help="split threshold for a continuous facet variable")
    common(p)
    p.set_defaults(func=_cmd_effects)

    p = sub.add_parser("versions", help="append an analysis version to a provenance file")
    p.add_argument("--file", required=True, help="versions JSON store (created if absent)")
    p.add_argument("--dag", required=True)
    p.add_argument("--cohort", required=True, help="JSON row ids or a match result")
    p.add_argument("--ate", type=float, required=True)
    p.add_argument("--notes", default="")
    p.add_argument("--timestamp", default="", help="recorded timestamp (empty keeps output reproducible)")
    common(p)
    p.set_defaults(func=_cmd_versions)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, help="default: $PORT or 8787")
    p.add_argument("--state-dir", help="persist sessions as JSON (default: $STATE_DIR)")
    p.add_argument("--max-upload-mb", type=int, help="default: $MAX_UPLOAD_MB or 64")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except EngineError as exc:
        print(f"causalab: error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except _IoError as exc:
        print(f"causalab: i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
