"""HTTP annotation service backing the human-in-the-loop rounds.

A single-writer loop state guarded by one lock; annotators claim queued
candidates, post decisions, and advance the round once the queue drains.
Labels are appended to a journal and fsynced before the service
acknowledges them, and every mutation is idempotent under retry via
(candidate_id, version).
"""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path
from typing import Optional, Sequence

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse, Response

from .active_learning import (
    Candidate,
    HashedLinearClassifier,
    LoopState,
    SamplePlan,
    _harvest,
    candidate_context,
    classify_and_queue,
    merge_labels,
    train_round_classifier,
)
from .core import ConflictError, Document, EntityType, PipelineError, Span
from .dictionary import Dictionary, save_lookup_tables
from .evaluation import evaluate
from .matcher import MatchConfig, match_document


class AnnotationLoopService:
    """Owns the loop state; all public methods are thread-safe."""

    def __init__(
        self,
        corpus: Sequence[Document],
        state: LoopState,
        dictionary: Dictionary,
        provider,
        out_dir: Path,
        seed: int = 0,
        claim_ttl: float = 300.0,
        eval_gold: Optional[dict[str, list[Span]]] = None,
        match_cfg: Optional[MatchConfig] = None,
        clock=time.monotonic,
    ):
        self.docs_by_id = {doc.id: doc for doc in corpus}
        self.corpus = list(corpus)
        self.state = state
        self.dictionary = dictionary
        self.provider = provider
        self.seed = seed
        self.claim_ttl = claim_ttl
        self.eval_gold = eval_gold
        self.match_cfg = match_cfg or MatchConfig()
        self.clock = clock
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.labels_journal = self.out_dir / "labels.jsonl"
        self.audit_journal = self.out_dir / "audit.jsonl"

        self.lock = threading.Lock()
        self.candidates: dict[str, Candidate] = {}
        self.claims: dict[str, float] = {}
        self.decided: list[Candidate] = []
        self.applied: dict[tuple[str, int], dict] = {}
        self.queue_order: list[str] = []
        self.metrics: Optional[dict] = None
        self.classifier: Optional[HashedLinearClassifier] = None

    # -- loop stepping ------------------------------------------------------

    def prime(self) -> None:
        """Queue the first round; replays any journaled labels so a
        restart never drops an acknowledged decision."""
        with self.lock:
            self._advance_locked()
        self._replay_journal()

    def _queued_ids(self) -> list[str]:
        return [
            cid for cid in self.queue_order if self.candidates[cid].state == "queued"
        ]

    def _advance_locked(self) -> dict:
        if self._queued_ids():
            raise QueueNotDrained("queued candidates remain")
        dict_before = len(self.dictionary)
        merged = len(self.decided)
        if self.decided:
            try:
                self.state.labeled_data, self.dictionary, _ = merge_labels(
                    self.state.labeled_data, self.decided, self.dictionary,
                    self.docs_by_id,
                )
            except ConflictError as exc:
                raise ApiError(409, str(exc)) from exc
            for candidate in self.decided:
                if candidate.assigned_type is None:
                    self.state.blocked_surfaces.add(candidate.surface.lower())
                    left, right = candidate_context(
                        self.docs_by_id[candidate.doc_id], candidate
                    )
                    self.state.negatives.append((candidate.surface, left, right))
            self.decided = []
        dict_delta = len(self.dictionary) - dict_before

        self.state.pool = _harvest(self.state, self.corpus, self.provider, self.seed)
        if not self.state.pool:
            self.state.stopped = True
            self.state.stop_reason = "pool_exhausted"
            self._write_audit(0, 0, merged, dict_delta)
            self._snapshot()
            self._refresh_metrics()
            return self._progress_locked()

        self.state.round += 1
        pool_size = len(self.state.pool)
        self.classifier = train_round_classifier(
            self.state, lambda: HashedLinearClassifier(seed=self.seed)
        )
        queued, _, _ = classify_and_queue(
            self.state.pool, self.classifier, self.docs_by_id, self.state.threshold
        )
        self.state.processed.update(c.candidate_id for c in self.state.pool)
        self.state.pool = []
        for candidate in queued:
            self.candidates[candidate.candidate_id] = candidate
            self.queue_order.append(candidate.candidate_id)
        self._write_audit(pool_size, len(queued), merged, dict_delta)
        self._snapshot()
        self._refresh_metrics()
        return self._progress_locked()

    def _write_audit(self, pool_size: int, queued: int, labeled: int, dict_delta: int) -> None:
        record = {
            "round": self.state.round,
            "pool_size": pool_size,
            "queued": queued,
            "labeled": labeled,
            "dict_delta": dict_delta,
        }
        with open(self.audit_journal, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, sort_keys=True) + "\n")

    def _snapshot(self) -> None:
        save_lookup_tables(
            self.out_dir / f"dictionary_round{self.state.round}.tsv", self.dictionary
        )
        if self.classifier is not None:
            weights = self.classifier.weights
            nonzero = {
                str(int(i)): float(weights[i]) for i in weights.nonzero()[0]
            }
            payload = {"dim": self.classifier.dim, "weights": nonzero}
            path = self.out_dir / f"classifier_round{self.state.round}.json"
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, sort_keys=True)

    def _refresh_metrics(self) -> None:
        if self.eval_gold is None:
            return
        pred = {}
        for doc_id in self.eval_gold:
            doc = self.docs_by_id.get(doc_id)
            pred[doc_id] = (
                match_document(doc, self.dictionary, self.match_cfg) if doc else []
            )
        report = evaluate(self.eval_gold, pred, "type_at_token")
        self.metrics = report.to_json()

    def _replay_journal(self) -> None:
        if not self.labels_journal.exists():
            return
        with open(self.labels_journal, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                record = json.loads(line)
                try:
                    self.submit_label(
                        record["candidate_id"],
                        record["version"],
                        record["decision"],
                        record.get("entity_type"),
                        record.get("annotator", "journal"),
                        journal=False,
                    )
                except ApiError:
                    continue  # already applied or stale; journal replay is best-effort

    # -- annotator-facing operations ---------------------------------------

    def next_candidate(self, annotator: str) -> Optional[dict]:
        with self.lock:
            now = self.clock()
            for cid in self._queued_ids():
                expiry = self.claims.get(cid)
                if expiry is not None and expiry > now:
                    continue
                self.claims[cid] = now + self.claim_ttl
                candidate = self.candidates[cid]
                doc = self.docs_by_id[candidate.doc_id]
                left, right = candidate_context(doc, candidate)
                return {
                    "candidate_id": candidate.candidate_id,
                    "version": candidate.version,
                    "doc_id": candidate.doc_id,
                    "text": doc.text,
                    "surface": candidate.surface,
                    "token_start": candidate.token_start,
                    "token_end": candidate.token_end,
                    "char_start": doc.tokens[candidate.token_start].char_start,
                    "char_end": doc.tokens[candidate.token_end - 1].char_end,
                    "left_context": left,
                    "right_context": right,
                    "classifier_confidence": candidate.classifier_confidence,
                    "provider_score": candidate.provider_score,
                    "claimed_by": annotator,
                }
            return None

    def submit_label(
        self,
        candidate_id: str,
        version: int,
        decision: str,
        entity_type: Optional[str],
        annotator: str,
        journal: bool = True,
    ) -> dict:
        if decision not in ("entity", "non-entity"):
            raise ApiError(400, f"unknown decision {decision!r}")
        if decision == "entity":
            if not entity_type:
                raise ApiError(400, "entity decision requires entity_type")
            try:
                etype = EntityType(entity_type)
            except ValueError:
                raise ApiError(400, f"unknown entity type {entity_type!r}") from None
        else:
            etype = None

        with self.lock:
            replay = self.applied.get((candidate_id, version))
            if replay is not None:
                if replay["request"] == (decision, entity_type):
                    return replay["result"]
                raise ApiError(409, "candidate already labeled differently")
            candidate = self.candidates.get(candidate_id)
            if candidate is None:
                raise ApiError(404, f"no such candidate {candidate_id!r}")
            if candidate.state != "queued":
                raise ApiError(409, f"candidate is {candidate.state}, not queued")
            if candidate.version != version:
                raise ApiError(409, "stale claim: version mismatch")

            if journal:
                record = {
                    "candidate_id": candidate_id,
                    "version": version,
                    "decision": decision,
                    "entity_type": entity_type,
                    "annotator": annotator,
                }
                with open(self.labels_journal, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record, sort_keys=True) + "\n")
                    handle.flush()
                    os.fsync(handle.fileno())

            candidate.version += 1
            candidate.labeler = annotator
            if decision == "entity":
                candidate.state = "labeled"
                candidate.assigned_type = etype
            else:
                candidate.state = "rejected"
            self.decided.append(candidate)
            self.state.human_labels += 1
            self.claims.pop(candidate_id, None)
            result = {
                "candidate_id": candidate_id,
                "version": candidate.version,
                "state": candidate.state,
            }
            self.applied[(candidate_id, version)] = {
                "request": (decision, entity_type),
                "result": result,
            }
            return result

    def advance(self) -> dict:
        with self.lock:
            return self._advance_locked()

    def _progress_locked(self) -> dict:
        states = [c.state for c in self.candidates.values()]
        return {
            "round": self.state.round,
            "pool": len(self.state.pool),
            "queued": states.count("queued"),
            "labeled": self.state.human_labels,
            "rejected": states.count("rejected"),
            "entities": states.count("labeled"),
            "dict_size": len(self.dictionary),
            "dict_counts": self.dictionary.counts(),
            "dataset_size": len(self.state.labeled_data),
            "stopped": self.state.stopped,
            "stop_reason": self.state.stop_reason,
        }

    def progress(self) -> dict:
        with self.lock:
            return self._progress_locked()


class ApiError(PipelineError):
    def __init__(self, status: int, message: str):
        self.status = status
        super().__init__(message)


class QueueNotDrained(ApiError):
    def __init__(self, message: str):
        super().__init__(409, message)


def create_app(
    service: AnnotationLoopService, static_dir: Optional[Path] = None
) -> FastAPI:
    app = FastAPI(title="annotation loop")

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse({"error": str(exc)}, status_code=exc.status)

    @app.get("/api/candidates/next")
    def candidates_next(x_annotator_id: str = Header(default="anonymous")):
        payload = service.next_candidate(x_annotator_id)
        if payload is None:
            return Response(status_code=204)
        return payload

    @app.post("/api/labels")
    async def labels(request: Request, x_annotator_id: str = Header(default="anonymous")):
        body = await request.json()
        for key in ("candidate_id", "version", "decision"):
            if key not in body:
                raise ApiError(400, f"missing field {key!r}")
        return service.submit_label(
            body["candidate_id"],
            body["version"],
            body["decision"],
            body.get("entity_type"),
            body.get("annotator", x_annotator_id),
        )

    @app.get("/api/progress")
    def progress():
        return service.progress()

    @app.post("/api/rounds/advance")
    def advance():
        return service.advance()

    @app.get("/api/metrics")
    def metrics():
        if service.metrics is None:
            return {"available": False}
        return {"available": True, "report": service.metrics}

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def build_service(cfg, prime: bool = True) -> AnnotationLoopService:
    """Wire a service from a PipelineConfig; used by the serve command."""
    from .active_learning import FixtureProvider
    from .core import dataset_from_annotations, read_annotations, read_corpus
    from .dictionary import load_lookup_tables, load_stopwords

    cfg.validate_paths("corpus", "dicts", "provider")
    corpus = read_corpus(Path(cfg.paths.corpus))
    stopwords = load_stopwords(Path(cfg.paths.stopwords) if cfg.paths.stopwords else None)
    dictionary = load_lookup_tables([Path(p) for p in cfg.paths.dicts], stopwords)
    provider = FixtureProvider.from_file(Path(cfg.paths.provider))
    if cfg.paths.eval_gold:
        annotations_gold = read_annotations(Path(cfg.paths.eval_gold))
    else:
        annotations_gold = None

    initial_spans = {}
    if cfg.paths.annotations:
        initial_spans = read_annotations(Path(cfg.paths.annotations))
    initial = dataset_from_annotations(corpus, initial_spans, name="L")
    sample_plan = None
    if cfg.loop.per_year > 0:
        sample_plan = SamplePlan(
            cfg.loop.per_year, tuple(range(cfg.loop.year_start, cfg.loop.year_end + 1))
        )
    state = LoopState(
        labeled_data=initial, sample_plan=sample_plan, threshold=cfg.loop.threshold
    )
    service = AnnotationLoopService(
        corpus=corpus,
        state=state,
        dictionary=dictionary,
        provider=provider,
        out_dir=Path(cfg.paths.out_dir),
        seed=cfg.loop.seed,
        claim_ttl=cfg.service.claim_ttl,
        eval_gold=annotations_gold,
    )
    if prime:
        service.prime()
    return service
