"""HTTP facade over the engine: per-session state plus pure computation
endpoints driving the web frontend.

Sessions are identified by the ``X-Session`` header; the server mints an id
on first contact and echoes it on every response. Each state-changing request
bumps the session's mutation counter (returned in ``X-Mutation-Counter``) so
clients can discard stale replies. Mutations within a session are serialized
by a per-session lock; idle sessions are evicted after ``idle_ttl`` seconds,
and an optional state directory persists sessions as JSON across restarts.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import balance as balance_mod
from . import dag as dag_mod
from . import dataset as dataset_mod
from . import effects as effects_mod
from . import matching as matching_mod
from . import propensity as propensity_mod
from . import provenance as provenance_mod
from .dataset import Column, ColumnKind, Dataset
from .errors import EngineError

DEFAULT_IDLE_TTL = 3600.0


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail


def _missing(resource: str) -> ApiError:
    return ApiError(404, f"no_{resource}", f"session has no {resource} yet")


@dataclass
class Session:
    session_id: str
    dataset: Dataset | None = None
    dag: dag_mod.CausalDag = field(default_factory=dag_mod.CausalDag)
    model: propensity_mod.PropensityModel | None = None
    scores: np.ndarray | None = None
    weights: propensity_mod.WeightVector | None = None
    match_result: matching_mod.MatchResult | None = None
    tree: provenance_mod.VersionTree = field(default_factory=provenance_mod.VersionTree)
    treatment_name: str | None = None
    mutation_counter: int = 0
    last_used: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def require_dataset(self) -> Dataset:
        if self.dataset is None:
            raise _missing("dataset")
        return self.dataset

    def require_scores(self) -> np.ndarray:
        if self.scores is None:
            raise _missing("scores")
        return self.scores

    def require_match(self) -> matching_mod.MatchResult:
        if self.match_result is None:
            raise _missing("match_result")
        return self.match_result

    # --- persistence -----------------------------------------------------

    def to_json(self) -> dict:
        doc: dict = {
            "session_id": self.session_id,
            "dag": dag_mod.export_dag_json(self.dag),
            "mutation_counter": self.mutation_counter,
            "versions": provenance_mod.save_versions(self.tree),
            "treatment_name": self.treatment_name,
        }
        if self.dataset is not None:
            doc["dataset"] = {
                "row_ids": self.dataset.row_ids.tolist(),
                "columns": [
                    {
                        "name": c.name,
                        "kind": c.kind.value,
                        "values": [None if isinstance(v, float) and np.isnan(v) else v
                                   for v in c.values.tolist()],
                        "labels": list(c.labels) if c.labels else None,
                    }
                    for c in self.dataset.columns
                ],
            }
        if self.model is not None:
            doc["model"] = self.model.to_json()
        if self.scores is not None:
            doc["scores"] = self.scores.tolist()
        if self.weights is not None:
            doc["weights"] = self.weights.to_json()
        if self.match_result is not None:
            doc["match_result"] = self.match_result.to_json()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Session":
        session = cls(session_id=doc["session_id"])
        session.dag = dag_mod.import_dag_json(doc.get("dag", {"nodes": [], "links": []}))
        session.mutation_counter = int(doc.get("mutation_counter", 0))
        session.tree = provenance_mod.load_versions(doc.get("versions", {"dags": []}))
        session.treatment_name = doc.get("treatment_name")
        if "dataset" in doc:
            cols = []
            for c in doc["dataset"]["columns"]:
                kind = ColumnKind(c["kind"])
                if kind is ColumnKind.CATEGORICAL:
                    values = np.array([v if v is not None else "" for v in c["values"]], dtype=object)
                else:
                    values = np.array([np.nan if v is None else float(v) for v in c["values"]])
                labels = tuple(c["labels"]) if c.get("labels") else None
                cols.append(Column(c["name"], kind, values, labels))
            session.dataset = Dataset(tuple(cols), np.asarray(doc["dataset"]["row_ids"], dtype=np.int64))
        if "model" in doc:
            session.model = propensity_mod.PropensityModel.from_json(doc["model"])
        if "scores" in doc:
            session.scores = np.asarray(doc["scores"], dtype=float)
        if "weights" in doc:
            session.weights = propensity_mod.WeightVector(
                np.asarray(doc["weights"]["weights"], dtype=float),
                bool(doc["weights"].get("stabilized", False)),
            )
        if "match_result" in doc:
            session.match_result = matching_mod.MatchResult.from_json(doc["match_result"])
        return session


class SessionStore:
    def __init__(self, state_dir: str | None = None, idle_ttl: float = DEFAULT_IDLE_TTL):
        self._sessions: dict[str, Session] = {}
        self._guard = threading.Lock()
        self._state_dir = Path(state_dir) if state_dir else None
        self._idle_ttl = idle_ttl
        if self._state_dir:
            self._state_dir.mkdir(parents=True, exist_ok=True)

    def _evict_idle(self) -> None:
        now = time.monotonic()
        for sid in [s for s, sess in self._sessions.items() if now - sess.last_used > self._idle_ttl]:
            self.persist(self._sessions[sid])
            del self._sessions[sid]

    def obtain(self, session_id: str | None) -> Session:
        with self._guard:
            self._evict_idle()
            if session_id is None:
                session = Session(session_id=secrets.token_hex(16))
                self._sessions[session.session_id] = session
                return session
            session = self._sessions.get(session_id)
            if session is None:
                session = self._restore(session_id)
            if session is None:
                raise ApiError(404, "unknown_session", f"unknown session {session_id!r}")
            session.last_used = time.monotonic()
            return session

    def _restore(self, session_id: str) -> Session | None:
        if not self._state_dir:
            return None
        path = self._state_dir / f"{session_id}.json"
        if not path.exists():
            return None
        session = Session.from_json(json.loads(path.read_text(encoding="utf-8")))
        self._sessions[session_id] = session
        return session

    def persist(self, session: Session) -> None:
        if not self._state_dir:
            return
        path = self._state_dir / f"{session.session_id}.json"
        path.write_text(json.dumps(session.to_json()), encoding="utf-8")


def create_app(
    state_dir: str | None = None,
    max_upload_mb: int = 64,
    idle_ttl: float = DEFAULT_IDLE_TTL,
) -> FastAPI:
    app = FastAPI(title="causalab", version="0.1.0")
    store = SessionStore(state_dir, idle_ttl)
    app.state.store = store

    # --- plumbing ---------------------------------------------------------

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.code, "detail": exc.detail})

    @app.exception_handler(EngineError)
    async def _engine_error(request: Request, exc: EngineError):
        return JSONResponse(status_code=exc.http_status, content={"error": exc.code, "detail": str(exc)})

    @app.middleware("http")
    async def _session_headers(request: Request, call_next):
        response = await call_next(request)
        session = getattr(request.state, "session", None)
        if session is not None:
            response.headers["X-Session"] = session.session_id
            response.headers["X-Mutation-Counter"] = str(session.mutation_counter)
        return response

    def get_session(request: Request) -> Session:
        session = store.obtain(request.headers.get("X-Session"))
        request.state.session = session
        return session

    async def read_body(request: Request) -> bytes:
        body = await request.body()
        if len(body) > max_upload_mb * 1024 * 1024:
            raise ApiError(413, "upload_too_large", f"upload exceeds {max_upload_mb} MiB")
        return body

    async def read_json(request: Request) -> dict:
        body = await read_body(request)
        if not body:
            return {}
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as exc:
            raise ApiError(400, "parse_error", f"invalid JSON body: {exc}") from exc
        if not isinstance(doc, dict):
            raise ApiError(400, "parse_error", "JSON body must be an object")
        return doc

    def mutate(session: Session) -> None:
        session.mutation_counter += 1
        store.persist(session)

    # --- dataset ------------------------------------------------------------

    @app.post("/datasets")
    async def upload_dataset(request: Request):
        session = get_session(request)
        body = await read_body(request)
        if not body:
            raise ApiError(400, "empty_input", "request body must contain CSV data")
        with session.lock:
            ds = dataset_mod.load_csv(body)
            session.dataset = ds
            session.scores = None
            session.weights = None
            session.match_result = None
            session.model = None
            mutate(session)
            return ds.summary()

    @app.get("/datasets/summary")
    async def dataset_summary(request: Request):
        session = get_session(request)
        return session.require_dataset().summary()

    @app.post("/datasets/one-hot")
    async def dataset_one_hot(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        with session.lock:
            session.dataset = dataset_mod.one_hot(session.require_dataset(), doc.get("column", ""))
            mutate(session)
            return session.dataset.summary()

    @app.post("/datasets/binarize")
    async def dataset_binarize(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        with session.lock:
            session.dataset = dataset_mod.binarize_at(
                session.require_dataset(),
                doc.get("column", ""),
                doc.get("mode", "median"),
                doc.get("threshold"),
            )
            mutate(session)
            return session.dataset.summary()

    # --- DAG -------------------------------------------------------------------

    @app.get("/dag")
    async def get_dag(request: Request):
        session = get_session(request)
        return dag_mod.export_dag_json(session.dag)

    @app.put("/dag")
    async def put_dag(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        with session.lock:
            if doc.get("format") == "node_link":
                session.dag = dag_mod.import_node_link(doc.get("document", doc))
            else:
                session.dag = dag_mod.import_dag_json(doc)
            mutate(session)
            return dag_mod.export_dag_json(session.dag)

    @app.post("/dag/nodes")
    async def add_node(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        if "name" not in doc:
            raise ApiError(400, "schema_error", 'body needs a "name"')
        with session.lock:
            session.dag = session.dag.with_node(doc["name"], doc.get("x"), doc.get("y"))
            mutate(session)
            return dag_mod.export_dag_json(session.dag)

    @app.delete("/dag/nodes/{name}")
    async def delete_node(request: Request, name: str):
        session = get_session(request)
        with session.lock:
            session.dag = session.dag.without_node(name)
            mutate(session)
            return dag_mod.export_dag_json(session.dag)

    @app.post("/dag/nodes/{name}/position")
    async def move_node(request: Request, name: str):
        session = get_session(request)
        doc = await read_json(request)
        with session.lock:
            session.dag = session.dag.with_position(name, float(doc.get("x", 0.0)), float(doc.get("y", 0.0)))
            mutate(session)
            return dag_mod.export_dag_json(session.dag)

    @app.post("/dag/edges")
    async def add_dag_edge(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        with session.lock:
            session.dag = session.dag.with_edge(str(doc.get("source")), str(doc.get("target")))
            mutate(session)
            return dag_mod.export_dag_json(session.dag)

    @app.delete("/dag/edges")
    async def delete_dag_edge(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        with session.lock:
            session.dag = session.dag.without_edge(str(doc.get("source")), str(doc.get("target")))
            mutate(session)
            return dag_mod.export_dag_json(session.dag)

    @app.post("/dag/treatment")
    async def set_dag_treatment(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        with session.lock:
            session.dag = session.dag.with_treatment(str(doc.get("node")))
            mutate(session)
            return dag_mod.export_dag_json(session.dag)

    @app.post("/dag/outcome")
    async def set_dag_outcome(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        with session.lock:
            session.dag = session.dag.with_outcome(str(doc.get("node")))
            mutate(session)
            return dag_mod.export_dag_json(session.dag)

    @app.get("/dag/classification")
    async def get_classification(request: Request):
        session = get_session(request)
        return dag_mod.classify(session.dag).to_json()

    # --- propensity ----------------------------------------------------------------

    @app.post("/propensity/fit")
    async def propensity_fit(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        covariates = doc.get("covariates")
        treatment = doc.get("treatment")
        if not covariates or not treatment:
            raise ApiError(400, "schema_error", 'body needs "covariates" and "treatment"')
        with session.lock:
            ds = session.require_dataset()
            model = propensity_mod.fit_propensity(
                ds, list(covariates), treatment,
                ridge=float(doc.get("lambda", 1e-6)),
            )
            complete, _ = dataset_mod.drop_missing(ds, list(covariates) + [treatment])
            scores = propensity_mod.predict(model, complete)
            flags = dataset_mod.binary_flags(complete, treatment)
            session.model = model
            session.scores = scores
            session.weights = propensity_mod.ipw_weights(
                scores, flags, stabilized=bool(doc.get("stabilized", False))
            )
            # Scores and weights align with the complete-case rows, so the
            # session dataset becomes the analysis set.
            session.dataset = complete
            session.treatment_name = treatment
            mutate(session)
            return {
                "model": model.to_json(),
                "row_ids": complete.row_ids.tolist(),
                "scores": scores.tolist(),
            }

    @app.get("/propensity/histogram")
    async def propensity_hist(request: Request, bins: int = 20, treatment: str | None = None):
        session = get_session(request)
        ds = session.require_dataset()
        scores = session.require_scores()
        name = treatment or _session_treatment(session)
        flags = dataset_mod.binary_flags(ds, name)
        return propensity_mod.propensity_histogram(scores, flags, bins)

    @app.post("/propensity/select")
    async def propensity_select(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        rng = doc.get("range")
        if not isinstance(rng, (list, tuple)) or len(rng) != 2:
            raise ApiError(400, "schema_error", 'body needs "range": [lo, hi]')
        ds = session.require_dataset()
        scores = session.require_scores()
        selection, inverse = propensity_mod.select_by_score(
            scores, float(rng[0]), float(rng[1]), row_ids=ds.row_ids
        )
        return {"selection": selection, "inverse": inverse}

    def _session_treatment(session: Session) -> str:
        if session.treatment_name is not None:
            return session.treatment_name
        if session.dag.treatment is not None:
            return session.dag.treatment
        raise ApiError(400, "schema_error", "no treatment column known; pass ?treatment=")

    # --- balance --------------------------------------------------------------------

    @app.post("/balance")
    async def balance_endpoint(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        covariates = doc.get("covariates")
        treatment = doc.get("treatment")
        if not covariates or not treatment:
            raise ApiError(400, "schema_error", 'body needs "covariates" and "treatment"')
        ds = session.require_dataset()
        adjust = doc.get("adjust", "auto")
        adjusted = None
        weights = None
        if adjust == "matched" or (adjust == "auto" and session.match_result is not None):
            adjusted = matching_mod.matched_cohort(ds, session.require_match())
        elif adjust == "weights" or (adjust == "auto" and session.weights is not None):
            if session.weights is None:
                raise _missing("weights")
            weights = session.weights
        report = balance_mod.balance_report(ds, list(covariates), treatment, adjusted, weights)
        payload = report.to_json()
        if doc.get("details"):
            details = balance_mod.details_view(
                report, ds, treatment, adjusted, weights,
                show=doc.get("show"),
            )
            payload["details"] = [d.to_json() for d in details]
        return payload

    # --- matching -----------------------------------------------------------------

    @app.post("/match")
    async def match_endpoint(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        treatment = doc.get("treatment")
        if not treatment:
            raise ApiError(400, "schema_error", 'body needs "treatment"')
        with session.lock:
            ds = session.require_dataset()
            spec = matching_mod.MatchSpec(
                metric=matching_mod.Metric(doc.get("metric", "logit")),
                covariates=tuple(doc.get("covariates", ())),
                caliper=doc.get("caliper"),
                with_replacement=bool(doc.get("with_replacement", False)),
                order=matching_mod.MatchOrder(doc.get("order", "descending_propensity")),
            )
            scores = session.scores
            if spec.metric is not matching_mod.Metric.MAHALANOBIS:
                scores = session.require_scores()
            result = matching_mod.match(ds, treatment, spec, scores)
            session.match_result = result
            mutate(session)
            return result.to_json()

    # --- effects -------------------------------------------------------------------

    @app.post("/effects/matched")
    async def effects_matched(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        outcome = doc.get("outcome")
        if not outcome:
            raise ApiError(400, "schema_error", 'body needs "outcome"')
        ds = session.require_dataset()
        result = session.require_match()
        ites = effects_mod.pair_effects(result, ds, outcome)
        record = effects_mod.ate_matched(
            ites, n_boot=int(doc.get("n_boot", 1000)), seed=int(doc.get("seed", 42))
        )
        return record.to_json()

    @app.post("/effects/ipw")
    async def effects_ipw(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        outcome = doc.get("outcome")
        treatment = doc.get("treatment")
        if not outcome or not treatment:
            raise ApiError(400, "schema_error", 'body needs "outcome" and "treatment"')
        ds = session.require_dataset()
        if session.weights is None:
            raise _missing("weights")
        record = effects_mod.ate_ipw(
            ds, treatment, outcome, session.weights,
            n_boot=int(doc.get("n_boot", 1000)), seed=int(doc.get("seed", 42)),
        )
        return record.to_json()

    @app.post("/effects/facet")
    async def effects_facet(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        outcome = doc.get("outcome")
        if not outcome:
            raise ApiError(400, "schema_error", 'body needs "outcome"')
        ds = session.require_dataset()
        result = session.require_match()
        ites = effects_mod.pair_effects(result, ds, outcome)
        thresholds = {str(k): float(v) for k, v in (doc.get("thresholds") or {}).items()}
        spec = effects_mod.SubgroupSpec(
            tuple(doc.get("variables", ())), tuple(thresholds.items())
        )
        treated_ids = [t for t, _, _ in result.pairs]
        table = effects_mod.facet(ites, ds, spec, unit_ids=treated_ids)
        return table.to_json()

    # --- provenance ------------------------------------------------------------------

    @app.post("/versions")
    async def add_version_endpoint(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        if "ate" not in doc:
            raise ApiError(400, "schema_error", 'body needs "ate"')
        with session.lock:
            dag_doc = doc.get("dag") or dag_mod.export_dag_json(session.dag)
            row_ids = doc.get("row_ids")
            if row_ids is None:
                result = session.require_match()
                row_ids = sorted({i for t, c, _ in result.pairs for i in (t, c)})
            session.tree = provenance_mod.add_version(
                session.tree, dag_doc, row_ids, float(doc["ate"]),
                notes=str(doc.get("notes", "")),
                timestamp=doc.get("timestamp"),
            )
            mutate(session)
            return provenance_mod.save_versions(session.tree)

    @app.get("/versions/icicle")
    async def versions_icicle(request: Request):
        session = get_session(request)
        return provenance_mod.icicle_data(session.tree)

    @app.get("/versions/ates")
    async def versions_ates(request: Request):
        session = get_session(request)
        return {"ates": [{"label": label, "ate": ate} for label, ate in provenance_mod.ate_series(session.tree)]}

    @app.post("/versions/restore")
    async def versions_restore(request: Request):
        session = get_session(request)
        doc = await read_json(request)
        label = doc.get("label")
        with session.lock:
            for d in session.tree.dags:
                if d.label == label or d.hash == label:
                    session.dag = dag_mod.import_dag_json(d.document)
                    mutate(session)
                    return dag_mod.export_dag_json(session.dag)
        raise ApiError(404, "unknown_version", f"no DAG version {label!r}")

    # --- exports ----------------------------------------------------------------------

    @app.get("/export/dag.json")
    async def export_dag(request: Request):
        session = get_session(request)
        payload = json.dumps(dag_mod.export_dag_json(session.dag), indent=2)
        return Response(
            content=payload,
            media_type="application/json",
            headers={"Content-Disposition": 'attachment; filename="dag.json"'},
        )

    @app.get("/export/versions.json")
    async def export_versions(request: Request):
        session = get_session(request)
        payload = json.dumps(provenance_mod.save_versions(session.tree), indent=2)
        return Response(
            content=payload,
            media_type="application/json",
            headers={"Content-Disposition": 'attachment; filename="versions.json"'},
        )

    return app
