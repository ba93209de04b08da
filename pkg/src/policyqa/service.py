"""HTTP service over the pipeline and corpus: /v1/ask, ingest, stats, health.

Wire format is plain UTF-8 JSON except document ingest, whose request body
is a raw document bundle (the same bytes the CLI reads from disk).  Every
4xx/5xx body carries {"error": {stage, type, message}} so clients see which
stage failed instead of a bare status code.
"""

from __future__ import annotations

import logging
import threading
import time
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import kg, retrieval
from .config import Settings
from .corpus import Corpus, chunk_document, parse_bundle
from .errors import (
    BundleParseError,
    EmptyIndex,
    EmptyText,
    EndpointTimeout,
    PolicyQaError,
    StageError,
    Timeout,
    ValidationError,
)
from .gateway import EchoBackend, LlmRequest, RemoteBackend, ReplayBackend, ReplayFixture, complete
from .pipeline import QaEngine
from .prompts import QaMode
from .retrieval import VectorIndex

log = logging.getLogger(__name__)

INDEX_FILENAME = "index.tsv"


def make_backend(settings: Settings):
    if settings.llm_backend == "echo":
        return EchoBackend()
    if settings.llm_backend == "replay":
        if not settings.replay_fixture:
            raise ValidationError("replay backend needs replay_fixture set")
        return ReplayBackend(ReplayFixture(settings.replay_fixture))
    if settings.llm_backend == "remote":
        if not settings.llm_endpoint:
            raise ValidationError("remote backend needs llm_endpoint set")
        return RemoteBackend(
            settings.llm_endpoint,
            api_key=settings.llm_api_key,
            timeout_s=settings.llm_timeout_s,
        )
    raise ValidationError(f"unknown llm_backend {settings.llm_backend!r}")


class ServiceState:
    """Everything one service process holds: corpus, index, engine, lock."""

    def __init__(self, settings: Settings, persist_dir: str | Path | None = None) -> None:
        self.settings = settings
        self.persist_dir = Path(persist_dir) if persist_dir else None
        self.lock = threading.Lock()
        self.backend = make_backend(settings)

        corpus = Corpus()
        index = VectorIndex()
        if self.persist_dir and self.persist_dir.exists():
            corpus = Corpus.load(self.persist_dir)
            index_path = self.persist_dir / INDEX_FILENAME
            if index_path.exists():
                index = VectorIndex.load(index_path)
            elif corpus.chunks:
                index = retrieval.build_index(corpus.chunks)
        self.corpus = corpus
        self.index = index

        label_index = None
        fact_source = None
        if settings.kg_fixture:
            label_index = kg.load_label_fixture(settings.kg_fixture)
            fact_source = kg.FixtureFactSource(label_index)
        if settings.kg_source == "endpoint":
            fact_source = kg.EndpointFactSource(
                settings.sparql_endpoint,
                language=settings.sparql_language,
                timeout_s=settings.sparql_timeout_s,
            )

        self.engine = QaEngine(
            corpus=self.corpus,
            index=self.index,
            label_index=label_index,
            fact_source=fact_source,
            idf=kg.IdfTable.from_texts(c.text for c in corpus.chunks) if len(corpus) else None,
            k=settings.k,
            max_prompt_tokens=settings.max_prompt_tokens,
            model_id=settings.llm_model,
            max_output_tokens=settings.llm_max_output_tokens,
        )

    def persist(self) -> None:
        if self.persist_dir is None:
            return
        self.corpus.save(self.persist_dir)
        self.index.save(self.persist_dir / INDEX_FILENAME)


def _error_body(stage: str, exc: Exception) -> dict:
    return {"error": {"stage": stage, "type": type(exc).__name__, "message": str(exc)}}


def _status_for(cause: Exception) -> int:
    if isinstance(cause, EmptyIndex):
        return 409
    if isinstance(cause, (Timeout, EndpointTimeout)):
        return 504
    return 502


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="policyqa", docs_url=None, redoc_url=None)

    @app.post("/v1/ask")
    async def ask(request: Request):
        started = time.monotonic()
        try:
            body = await request.json()
        except Exception as exc:
            return JSONResponse(status_code=400, content=_error_body("request", exc))
        question = body.get("question")
        if not isinstance(question, str) or not question.strip():
            return JSONResponse(
                status_code=400,
                content=_error_body("request", ValidationError("question must be non-empty")),
            )
        try:
            mode = QaMode.parse(body.get("mode", state.settings.default_mode))
        except ValueError as exc:
            return JSONResponse(status_code=400, content=_error_body("request", exc))
        k = body.get("k", state.settings.k)
        if not isinstance(k, int) or k < 1:
            return JSONResponse(
                status_code=400,
                content=_error_body("request", ValidationError("k must be a positive integer")),
            )

        try:
            # local stages under the corpus lock; the completion runs outside it
            with state.lock:
                bundle, hits, facts = state.engine.build_prompt(question, mode, k=k)
            llm_request = LlmRequest(
                prompt=bundle.rendered,
                model_id=state.settings.llm_model,
                max_output_tokens=state.settings.llm_max_output_tokens,
            )
            try:
                response = complete(llm_request, state.backend)
            except PolicyQaError as exc:
                raise StageError("llm", exc) from exc
        except StageError as exc:
            log.warning("ask failed at %s: %s", exc.stage, exc.cause)
            return JSONResponse(
                status_code=_status_for(exc.cause), content=_error_body(exc.stage, exc.cause)
            )
        return {
            "answer": response.text,
            "mode": mode.value,
            "hits": [h.to_json() for h in hits],
            "facts": [f.to_json() for f in facts],
            "prompt_hash": response.prompt_hash,
            "latency_ms": int((time.monotonic() - started) * 1000),
        }

    @app.post("/v1/corpus/documents")
    async def ingest(request: Request, max_chars: int | None = None, overlap: int | None = None):
        try:
            raw = (await request.body()).decode("utf-8")
        except UnicodeDecodeError as exc:
            return JSONResponse(status_code=400, content=_error_body("ingest", exc))
        try:
            doc = parse_bundle(raw)
            chunks = chunk_document(
                doc,
                max_chars=max_chars or state.settings.max_chars,
                overlap_chars=overlap if overlap is not None else state.settings.overlap_chars,
            )
        except (BundleParseError, ValidationError, PolicyQaError) as exc:
            return JSONResponse(status_code=400, content=_error_body("ingest", exc))
        if state.corpus.has_document(doc.doc_id):
            return JSONResponse(
                status_code=409,
                content=_error_body(
                    "ingest", ValidationError(f"document {doc.doc_id!r} already ingested")
                ),
            )

        # embed before touching shared state so a failure leaves it intact
        vectors = []
        for chunk in chunks:
            try:
                vectors.append((chunk.chunk_id, retrieval.embed_text(chunk.text)))
            except EmptyText:
                log.warning("chunk %s has no tokens, not indexed", chunk.chunk_id)

        with state.lock:
            state.corpus.add_document(doc, chunks)
            for chunk_id, vector in vectors:
                state.index.add(chunk_id, vector)
            state.engine.idf = kg.IdfTable.from_texts(c.text for c in state.corpus.chunks)
            state.persist()
        return {"doc_id": doc.doc_id, "chunk_count": len(chunks)}

    @app.get("/v1/corpus/stats")
    async def stats():
        return state.corpus.stats()

    @app.get("/v1/health")
    async def health():
        return {
            "status": "ok",
            "backend": state.backend.name,
            "corpus_loaded": len(state.index) > 0,
        }

    return app
