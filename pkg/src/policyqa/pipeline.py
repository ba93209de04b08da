"""End-to-end question answering: retrieve, link, prompt, complete.

The engine binds a chunked corpus, its vector index, and optionally a
label index plus fact source.  Each answer runs the stages its mode needs
and nothing more: agnostic questions never touch the index, and only
rulebook_kg runs entity linking.  Failures carry the stage they happened
in so callers can report `retrieval` vs `llm` instead of a bare traceback.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from . import kg, prompts, retrieval
from .corpus import Corpus
from .errors import EmptyIndex, IndexUnavailable, PolicyQaError, StageError
from .gateway import LlmRequest, complete
from .kg import KgFact
from .prompts import ContextBlock, PromptBundle, QaMode
from .retrieval import VectorIndex

log = logging.getLogger(__name__)


@dataclass
class RetrievalHit:
    chunk_id: str
    score: float
    text: str

    def to_json(self) -> dict:
        return {"chunk_id": self.chunk_id, "score": self.score, "text": self.text}


@dataclass
class AskResult:
    answer: str
    mode: QaMode
    hits: list[RetrievalHit] = field(default_factory=list)
    facts: list[KgFact] = field(default_factory=list)
    prompt_echo: str = ""
    prompt_hash: str = ""
    backend: str = ""
    timings: dict[str, int] = field(default_factory=dict)

    def to_json(self, include_prompt: bool = False) -> dict:
        row = {
            "answer": self.answer,
            "mode": self.mode.value,
            "hits": [h.to_json() for h in self.hits],
            "facts": [f.to_json() for f in self.facts],
            "prompt_hash": self.prompt_hash,
            "backend": self.backend,
            "timings": self.timings,
        }
        if include_prompt:
            row["prompt"] = self.prompt_echo
        return row


class _StageClock:
    def __init__(self) -> None:
        self.timings: dict[str, int] = {}

    def run(self, stage: str, fn):
        started = time.monotonic()
        try:
            return fn()
        except PolicyQaError as exc:
            raise StageError(stage, exc) from exc
        finally:
            elapsed = int((time.monotonic() - started) * 1000)
            self.timings[stage] = self.timings.get(stage, 0) + elapsed


class QaEngine:
    """Answers questions over one corpus with pluggable backends."""

    def __init__(
        self,
        corpus: Corpus | None = None,
        index: VectorIndex | None = None,
        label_index: kg.LabelIndex | None = None,
        fact_source=None,
        idf: kg.IdfTable | None = None,
        k: int = retrieval.DEFAULT_K,
        max_prompt_tokens: int = prompts.DEFAULT_MAX_TOKENS,
        model_id: str = "gpt-3.5-turbo",
        max_output_tokens: int = 512,
    ) -> None:
        self.corpus = corpus
        self.index = index
        self.label_index = label_index
        self.fact_source = fact_source
        self.idf = idf
        self.k = k
        self.max_prompt_tokens = max_prompt_tokens
        self.model_id = model_id
        self.max_output_tokens = max_output_tokens

    def _retrieve(self, question: str, k: int) -> list[RetrievalHit]:
        if self.index is None or len(self.index) == 0:
            raise EmptyIndex("no corpus indexed")
        query = retrieval.embed_text(question, dim=self.index.dim)
        hits = self.index.search(query, k=k)
        enriched = []
        for hit in hits:
            text = hit.chunk_id
            if self.corpus is not None:
                try:
                    text = self.corpus.chunk_by_id(hit.chunk_id).text
                except KeyError:
                    log.warning("hit %s missing from corpus, using id as text", hit.chunk_id)
            enriched.append(RetrievalHit(chunk_id=hit.chunk_id, score=hit.score, text=text))
        return enriched

    def _gather_facts(self, question: str, clock: _StageClock) -> list[KgFact]:
        def _link():
            if self.label_index is None:
                raise IndexUnavailable("no label index configured")
            return kg.link_question(question, self.label_index, idf=self.idf)

        _, entities = clock.run("linking", _link)

        def _fetch():
            if self.fact_source is None:
                raise IndexUnavailable("no fact source configured")
            return kg.facts_for_entities(entities, self.fact_source)

        return clock.run("kg", _fetch)

    def build_prompt(
        self, question: str, mode: QaMode, k: int | None = None
    ) -> tuple[PromptBundle, list[RetrievalHit], list[KgFact]]:
        """Run every stage up to (not including) the completion call."""
        clock = _StageClock()
        bundle, hits, facts = self._build(question, mode, k or self.k, clock)
        return bundle, hits, facts

    def _build(self, question, mode, k, clock):
        hits: list[RetrievalHit] = []
        facts: list[KgFact] = []
        if mode is QaMode.AGNOSTIC:
            bundle = clock.run("prompt", lambda: prompts.build_agnostic(question))
        else:
            hits = clock.run("retrieval", lambda: self._retrieve(question, k))
            contexts = [ContextBlock(h.chunk_id, h.score, h.text) for h in hits]
            if mode is QaMode.RULEBOOK:
                bundle = clock.run("prompt", lambda: prompts.build_rulebook(question, contexts))
            else:
                facts = self._gather_facts(question, clock)
                external = [kg.fact_block(f) for f in facts]
                bundle = clock.run(
                    "prompt", lambda: prompts.build_rulebook_kg(question, contexts, external)
                )
        bundle = clock.run(
            "prompt", lambda: prompts.fit_budget(bundle, self.max_prompt_tokens)
        )
        if len(bundle.context_blocks) < len(hits):
            kept = {b.chunk_id for b in bundle.context_blocks}
            log.info("budget dropped %d context block(s)", len(hits) - len(kept))
        return bundle, hits, facts

    def answer_question(
        self, question: str, mode: QaMode, backend, k: int | None = None
    ) -> AskResult:
        clock = _StageClock()
        bundle, hits, facts = self._build(question, mode, k or self.k, clock)
        request = LlmRequest(
            prompt=bundle.rendered,
            model_id=self.model_id,
            max_output_tokens=self.max_output_tokens,
        )
        response = clock.run("llm", lambda: complete(request, backend))
        return AskResult(
            answer=response.text,
            mode=mode,
            hits=hits,
            facts=facts,
            prompt_echo=bundle.rendered,
            prompt_hash=response.prompt_hash,
            backend=response.backend,
            timings=clock.timings,
        )

    def batch_ask(
        self, questions: list[str], mode: QaMode, backend, k: int | None = None
    ) -> list[dict]:
        """Answer each question; failures become error records, not aborts."""
        records = []
        for question in questions:
            try:
                result = self.answer_question(question, mode, backend, k=k)
                row = {"question": question, **result.to_json()}
            except StageError as exc:
                log.warning("question failed at %s stage: %s", exc.stage, exc.cause)
                row = {
                    "question": question,
                    "mode": mode.value,
                    "error": {
                        "stage": exc.stage,
                        "type": type(exc.cause).__name__,
                        "message": str(exc.cause),
                    },
                }
            records.append(row)
        return records
