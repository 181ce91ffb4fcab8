"""JSON HTTP service exposing datasets, scoring, search, and insight ops.

Single-process, file-backed: every mutation snapshots the session as JSON in
the data directory (atomic replace), so a crash loses at most the in-flight
mutation. One search job per session runs at a time.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Form, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import insight
from .bayes import bayes_for_groups
from .dataset import BinningSpec, Dataset, load_csv_text
from .errors import (
    AlgebraError,
    ConfigError,
    DataError,
    EmptyInputError,
    EvaluationError,
    GrammarError,
    InfluenceError,
    InsufficientDataError,
    NoExplanationError,
    ParseError,
    PredexError,
    SchemaError,
    ScoreImportError,
    UsageError,
)
from .predicate import Selection, complement, evaluate, parse, to_text
from .scoring import ScoreVector, fit_gaussian, likelihood_influence, score_points
from .search import (
    BAYES,
    INFLUENCE,
    SearchConfig,
    rpi_search,
    search_multiple,
)

logger = logging.getLogger(__name__)

SYNC_ROW_LIMIT = 10_000


class ScoresRequest(BaseModel):
    model: Optional[str] = None
    targets: Optional[list[str]] = None
    scores: Optional[list[float]] = None
    higher_is_anomalous: bool = True


class ExplainRequest(BaseModel):
    strategy: str = INFLUENCE
    strictness: float = 1.0
    bins: int = 20
    max_explanations: int = 5
    user_points: Optional[list[int]] = None
    workers: int = 1
    prior_scale: Optional[float] = None


class PredicateCreate(BaseModel):
    text: str
    label: Optional[str] = None
    color: Optional[str] = None


class PredicatePatch(BaseModel):
    text: Optional[str] = None
    label: Optional[str] = None
    color: Optional[str] = None
    hidden: Optional[bool] = None


class EvaluateRequest(BaseModel):
    predicate: str
    bins: int = 40


class BookmarkCreate(BaseModel):
    chart: dict
    sentence: str = ""


class ReportRequest(BaseModel):
    explanation_ids: list[str] = []
    bookmark_ids: list[str] = []


class Session:
    def __init__(self, sid: str, name: str, csv_text: str, hints: dict | None):
        self.id = sid
        self.name = name
        self.csv_text = csv_text
        self.hints = hints or {}
        self.dataset: Dataset = load_csv_text(csv_text, self.hints)
        self.scores: ScoreVector | None = None
        self.score_meta: dict = {}
        self.predicates: dict[str, dict] = {}
        self.explanations: dict[str, dict] = {}
        self.bookmarks: dict[str, dict] = {}
        self.jobs: dict[str, dict] = {}
        self.counter = 0
        self.lock = threading.RLock()

    def next_id(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}_{self.counter:04d}"

    def require_scores(self) -> ScoreVector:
        if self.scores is None:
            raise DataError("no scores attached to this dataset yet")
        return self.scores

    def to_snapshot(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "csv": self.csv_text,
            "hints": self.hints,
            "scores": None
            if self.scores is None
            else {
                "values": [float(v) for v in self.scores.scores],
                "provenance": self.scores.provenance,
                "meta": self.score_meta,
            },
            "predicates": list(self.predicates.values()),
            "explanations": list(self.explanations.values()),
            "bookmarks": list(self.bookmarks.values()),
            "counter": self.counter,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "Session":
        session = cls(snap["id"], snap.get("name", snap["id"]), snap["csv"], snap.get("hints"))
        if snap.get("scores"):
            session.scores = ScoreVector(
                snap["scores"]["values"], snap["scores"].get("provenance", "imported")
            )
            session.score_meta = snap["scores"].get("meta", {})
        session.predicates = {p["id"]: p for p in snap.get("predicates", [])}
        session.explanations = {e["id"]: e for e in snap.get("explanations", [])}
        session.bookmarks = {b["id"]: b for b in snap.get("bookmarks", [])}
        session.counter = snap.get("counter", 0)
        return session


class ServiceState:
    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        for path in sorted(self.data_dir.glob("session_*.json")):
            try:
                snap = json.loads(path.read_text())
                session = Session.from_snapshot(snap)
                self.sessions[session.id] = session
            except (PredexError, ValueError, KeyError) as exc:
                logger.warning("skipping unreadable snapshot %s: %s", path, exc)

    def persist(self, session: Session):
        path = self.data_dir / f"session_{session.id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(session.to_snapshot()))
        os.replace(tmp, path)

    def get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise LookupError(f"unknown dataset {sid!r}")
        return session


def _error_body(code: str, message: str, detail=None) -> dict:
    return {"code": code, "message": message, "detail": detail}


_STATUS_BY_ERROR = [
    (GrammarError, 422, "grammar"),
    (ParseError, 422, "parse"),
    (EmptyInputError, 422, "empty-input"),
    (SchemaError, 422, "schema"),
    (EvaluationError, 422, "evaluation"),
    (UsageError, 422, "usage"),
    (ScoreImportError, 422, "score-import"),
    (InsufficientDataError, 422, "insufficient-data"),
    (InfluenceError, 422, "influence"),
    (NoExplanationError, 422, "no-explanation"),
    (AlgebraError, 422, "algebra"),
    (ConfigError, 400, "config"),
    (DataError, 400, "data"),
]


def create_app(data_dir) -> FastAPI:
    app = FastAPI(title="predex", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    state = ServiceState(data_dir)
    app.state.predex = state

    @app.exception_handler(PredexError)
    async def handle_predex_error(_req: Request, exc: PredexError):
        for klass, status, code in _STATUS_BY_ERROR:
            if isinstance(exc, klass):
                detail = None
                if isinstance(exc, GrammarError):
                    detail = {"position": exc.position}
                return JSONResponse(
                    status_code=status, content=_error_body(code, str(exc), detail)
                )
        return JSONResponse(status_code=500, content=_error_body("internal", str(exc)))

    @app.exception_handler(LookupError)
    async def handle_lookup(_req: Request, exc: LookupError):
        return JSONResponse(status_code=404, content=_error_body("not-found", str(exc)))

    @app.get("/health")
    def health():
        return {"status": "ok"}

    # -- datasets -----------------------------------------------------------

    def _feature_domain(session: Session, name: str):
        ds = session.dataset
        feat = ds.feature(name)
        col = ds.column(name)
        if feat.kind == "categorical":
            values = sorted({v for v in col if v is not None})
            return {"values": values[:100]}
        observed = col[~np.isnan(col)]
        if observed.size == 0:
            return {}
        return {"min": float(observed.min()), "max": float(observed.max())}

    def _dataset_info(session: Session) -> dict:
        ds = session.dataset
        return {
            "dataset_id": session.id,
            "name": session.name,
            "rows": ds.n_rows,
            "features": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    "role": f.role,
                    "cardinality": f.cardinality,
                    "domain": _feature_domain(session, f.name),
                }
                for f in ds.schema
            ],
            "has_scores": session.scores is not None,
        }

    @app.post("/datasets", status_code=201)
    async def create_dataset(
        request: Request,
        file: UploadFile | None = None,
        hints: str | None = Form(default=None),
        name: str | None = Form(default=None),
    ):
        if file is not None:
            csv_text = (await file.read()).decode("utf-8")
            hint_map = json.loads(hints) if hints else None
            label = name or (file.filename or "dataset")
        else:
            body = await request.json()
            csv_text = body.get("csv", "")
            hint_map = body.get("hints")
            label = body.get("name", "dataset")
        sid = uuid.uuid4().hex[:12]
        session = Session(sid, label, csv_text, hint_map)
        with state.lock:
            state.sessions[sid] = session
        state.persist(session)
        return _dataset_info(session)

    @app.get("/datasets")
    def list_datasets():
        return {"datasets": [_dataset_info(s) for s in state.sessions.values()]}

    @app.get("/datasets/{sid}")
    def get_dataset(sid: str):
        return _dataset_info(state.get(sid))

    # -- scores ---------------------------------------------------------------

    @app.post("/datasets/{sid}/scores")
    async def attach_scores(sid: str, request: Request):
        session = state.get(sid)
        content_type = request.headers.get("content-type", "")
        with session.lock:
            if content_type.startswith("multipart/"):
                form = await request.form()
                upload = form.get("file")
                if upload is None:
                    raise ScoreImportError("multipart upload needs a 'file' field")
                text = (await upload.read()).decode("utf-8")
                from .scoring import _scores_from_text

                values = _scores_from_text(text, session.dataset.n_rows)
                if len(values) != session.dataset.n_rows:
                    raise ScoreImportError(
                        f"{len(values)} scores for {session.dataset.n_rows} rows"
                    )
                session.scores = ScoreVector(values)
                session.score_meta = {"source": "file"}
            else:
                req = ScoresRequest(**(await request.json()))
                if req.scores is not None:
                    if len(req.scores) != session.dataset.n_rows:
                        raise ScoreImportError(
                            f"{len(req.scores)} scores for {session.dataset.n_rows} rows"
                        )
                    values = np.asarray(req.scores, dtype=float)
                    if not req.higher_is_anomalous:
                        values = -values
                    session.scores = ScoreVector(values)
                    session.score_meta = {"source": "inline"}
                elif req.model == "gaussian":
                    if req.targets:
                        session.dataset = session.dataset.with_roles(req.targets)
                    model = fit_gaussian(session.dataset)
                    session.scores = score_points(model, session.dataset)
                    session.score_meta = {
                        "source": "gaussian",
                        "targets": list(model.features),
                    }
                else:
                    raise ConfigError(
                        "provide {'scores': [...]} or {'model': 'gaussian', 'targets': [...]}"
                    )
            state.persist(session)
            sv = session.scores
            return {
                "rows": len(sv),
                "provenance": sv.provenance,
                "min": float(sv.scores.min()),
                "max": float(sv.scores.max()),
                "meta": session.score_meta,
            }

    # -- explain ----------------------------------------------------------------

    def _build_config(session: Session, req: ExplainRequest) -> SearchConfig:
        kwargs = dict(
            strategy=req.strategy,
            strictness=req.strictness,
            binning=BinningSpec(bin_count=req.bins),
            max_explanations=req.max_explanations,
            user_points=frozenset(req.user_points) if req.user_points else None,
            workers=req.workers,
        )
        if req.prior_scale is not None:
            kwargs["prior_scale"] = req.prior_scale
        return SearchConfig(**kwargs)

    def _run_explain(session: Session, cfg: SearchConfig) -> dict:
        ds, sv = session.dataset, session.require_scores()
        if cfg.strategy == BAYES:
            exps = rpi_search(ds, sv, cfg)[: cfg.max_explanations]
            combined = None
        else:
            exps, combined_exp = search_multiple(ds, sv, cfg)
            combined = combined_exp.to_dict()
        records = []
        with session.lock:
            for exp in exps:
                eid = session.next_id("exp")
                record = {"id": eid, **exp.to_dict()}
                session.explanations[eid] = record
                records.append(record)
            state.persist(session)
        return {"explanations": records, "combined": combined}

    @app.post("/datasets/{sid}/explain")
    def explain(sid: str, req: ExplainRequest):
        session = state.get(sid)
        session.require_scores()
        cfg = _build_config(session, req)
        sync = cfg.strategy == INFLUENCE and session.dataset.n_rows < SYNC_ROW_LIMIT
        if sync:
            return _run_explain(session, cfg)
        with session.lock:
            running = [j for j in session.jobs.values() if j["status"] in ("pending", "running")]
            if running:
                return JSONResponse(
                    status_code=409,
                    content=_error_body(
                        "job-conflict", f"job {running[0]['id']} is already active"
                    ),
                )
            jid = session.next_id("job")
            job = {"id": jid, "status": "pending", "result": None, "error": None}
            session.jobs[jid] = job

        def run():
            job["status"] = "running"
            try:
                job["result"] = _run_explain(session, cfg)
                job["status"] = "done"
            except Exception as exc:  # job errors surface via polling
                job["error"] = str(exc)
                job["status"] = "failed"

        threading.Thread(target=run, daemon=True).start()
        return JSONResponse(status_code=202, content={"job_id": jid, "status": "pending"})

    @app.get("/jobs/{jid}")
    def get_job(jid: str):
        for session in state.sessions.values():
            job = session.jobs.get(jid)
            if job is not None:
                return job
        raise LookupError(f"unknown job {jid!r}")

    @app.get("/datasets/{sid}/explanations")
    def list_explanations(sid: str):
        session = state.get(sid)
        return {"explanations": list(session.explanations.values())}

    # -- predicates ----------------------------------------------------------------

    @app.get("/datasets/{sid}/predicates")
    def list_predicates(sid: str):
        return {"predicates": list(state.get(sid).predicates.values())}

    @app.post("/datasets/{sid}/predicates", status_code=201)
    def create_predicate(sid: str, req: PredicateCreate):
        session = state.get(sid)
        pred = parse(req.text)
        evaluate(pred, session.dataset)  # must be evaluable against this schema
        with session.lock:
            pid = session.next_id("pred")
            record = {
                "id": pid,
                "text": to_text(pred),
                "label": req.label or pid,
                "color": req.color or insight_color(len(session.predicates)),
                "hidden": False,
                "source": "user",
            }
            session.predicates[pid] = record
            state.persist(session)
        return record

    @app.patch("/datasets/{sid}/predicates/{pid}")
    def patch_predicate(sid: str, pid: str, req: PredicatePatch):
        session = state.get(sid)
        record = session.predicates.get(pid)
        if record is None:
            raise LookupError(f"unknown predicate {pid!r}")
        with session.lock:
            if req.text is not None:
                pred = parse(req.text)
                evaluate(pred, session.dataset)
                record["text"] = to_text(pred)
            if req.label is not None:
                record["label"] = req.label
            if req.color is not None:
                record["color"] = req.color
            if req.hidden is not None:
                record["hidden"] = req.hidden
            state.persist(session)
        return record

    @app.delete("/datasets/{sid}/predicates/{pid}", status_code=204)
    def delete_predicate(sid: str, pid: str):
        session = state.get(sid)
        if pid not in session.predicates:
            raise LookupError(f"unknown predicate {pid!r}")
        with session.lock:
            del session.predicates[pid]
            state.persist(session)

    # -- evaluate / insight -----------------------------------------------------------

    def _selection_summary(session: Session, sel: Selection, bins: int) -> dict:
        sv = session.require_scores()
        ds = session.dataset
        hist = insight.score_histogram(
            sv, [("selection", sel), ("complement", Selection(~sel.mask))], bins=bins
        )
        inside = sv.scores[sel.mask]
        outside = sv.scores[~sel.mask]
        bayes = None
        if len(inside) >= 2 and len(outside) >= 2:
            res = bayes_for_groups(inside, outside)
            bayes = {
                "bf10": None if not np.isfinite(res.bf10) else res.bf10,
                "log_bf10": None if not np.isfinite(res.log_bf10) else res.log_bf10,
                "category": res.category,
            }
        influence = None
        if sel.count:
            influence = likelihood_influence(sv, sel)
        return {
            "coverage": {"count": sel.count, "fraction": sel.count / ds.n_rows},
            "histogram": hist.to_chart_spec(),
            "bayes": bayes,
            "influence": influence,
            "mean_score_inside": float(inside.mean()) if inside.size else None,
            "mean_score_outside": float(outside.mean()) if outside.size else None,
        }

    def _predicate_structure(session: Session, pred) -> dict:
        """Structured clause view for the UI's widgets (single term only)."""
        from .predicate import MemberOf

        clauses = []
        if len(pred.terms) == 1:
            for clause in pred.terms[0].clauses:
                feat = session.dataset.feature(clause.feature)
                entry = {
                    "feature": clause.feature,
                    "kind": feat.kind,
                    "domain": _feature_domain(session, clause.feature),
                }
                if isinstance(clause.body, MemberOf):
                    entry["type"] = "member"
                    entry["values"] = sorted(clause.body.values)
                else:
                    entry["type"] = "range"
                    entry["lo"] = None if np.isinf(clause.body.lo) else clause.body.lo
                    entry["hi"] = None if np.isinf(clause.body.hi) else clause.body.hi
                    entry["lo_incl"] = clause.body.lo_incl
                    entry["hi_incl"] = clause.body.hi_incl
                clauses.append(entry)
        return {"negated": pred.negated, "terms": len(pred.terms), "clauses": clauses}

    @app.post("/datasets/{sid}/evaluate")
    def evaluate_predicate(sid: str, req: EvaluateRequest):
        session = state.get(sid)
        pred = parse(req.predicate)
        sel = evaluate(pred, session.dataset)
        out = _selection_summary(session, sel, req.bins)
        out["predicate"] = to_text(pred)
        out["structure"] = _predicate_structure(session, pred)
        return out

    def _resolve_predicate(session: Session, token: str):
        record = session.predicates.get(token)
        if record is not None:
            return parse(record["text"])
        return parse(token)

    @app.get("/datasets/{sid}/histogram")
    def histogram(sid: str, predicates: str, bins: int = 40):
        session = state.get(sid)
        sv = session.require_scores()
        selections = []
        for token in [t for t in predicates.split(",") if t]:
            record = session.predicates.get(token)
            label = record["label"] if record else token
            pred = _resolve_predicate(session, token)
            selections.append((label, evaluate(pred, session.dataset)))
        if not selections:
            raise UsageError("histogram needs at least one predicate")
        return insight.score_histogram(sv, selections, bins=bins).to_chart_spec()

    @app.get("/datasets/{sid}/pivot")
    def pivot(sid: str, predicate: str, feature: str):
        session = state.get(sid)
        pred = _resolve_predicate(session, predicate)
        view = insight.pivot_view(session.dataset, session.require_scores(), pred, feature)
        return view.to_chart_spec()

    @app.get("/datasets/{sid}/recommendations")
    def recommendations(sid: str, predicate: str, pivot: str):
        session = state.get(sid)
        pred = _resolve_predicate(session, predicate)
        recs = insight.recommend(session.dataset, session.require_scores(), pred, pivot)
        return {"recommendations": [r.to_dict() for r in recs]}

    @app.get("/datasets/{sid}/subspaces")
    def subspaces(sid: str, max_dim: int = 3, threshold: float | None = None):
        session = state.get(sid)
        rows = insight.subspace_scores(session.dataset, max_dim=max_dim, threshold=threshold)
        return {"subspaces": [r.to_dict() for r in rows]}

    # -- bookmarks & report ----------------------------------------------------------

    @app.get("/datasets/{sid}/bookmarks")
    def list_bookmarks(sid: str):
        return {"bookmarks": list(state.get(sid).bookmarks.values())}

    @app.post("/datasets/{sid}/bookmarks", status_code=201)
    def create_bookmark(sid: str, req: BookmarkCreate):
        session = state.get(sid)
        with session.lock:
            bid = session.next_id("bm")
            record = {"id": bid, "chart": req.chart, "sentence": req.sentence}
            session.bookmarks[bid] = record
            state.persist(session)
        return record

    @app.post("/datasets/{sid}/report")
    def report(sid: str, req: ReportRequest):
        session = state.get(sid)
        exps = []
        for eid in req.explanation_ids:
            record = session.explanations.get(eid)
            if record is None:
                raise LookupError(f"unknown explanation {eid!r}")
            exps.append({k: v for k, v in record.items() if k != "id"})
        bookmarks = []
        for bid in req.bookmark_ids:
            record = session.bookmarks.get(bid)
            if record is None:
                raise LookupError(f"unknown bookmark {bid!r}")
            bookmarks.append(insight.Bookmark(record["chart"], record["sentence"]))
        if not exps:
            raise ConfigError("report needs at least one explanation id")
        md, sidecar = insight.build_report(exps, bookmarks)
        return {"report_md": md, "report_json": sidecar}

    return app


def insight_color(index: int) -> str:
    from .figures import PALETTE

    return PALETTE[index % len(PALETTE)]


def serve(port: int = 8765, data_dir="predex-data", host: str = "127.0.0.1"):
    """Run the service with uvicorn (blocking)."""
    import uvicorn

    app = create_app(data_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
