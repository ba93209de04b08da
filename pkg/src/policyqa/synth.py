"""Synthesized QA pairs: generate from chunks, deduplicate, review.

Five steps per pair: the corpus is already chunked (step 1); a completion
writes a question from the chunk (step 2); entities in that question are
linked and their facts fetched (step 3); a second completion adjusts the
question to use the facts (step 4, skipped verbatim when no facts exist);
a final completion answers it (step 5).  Every intermediate is kept on the
pair so the sequence stays auditable.  Pairs then go through dedup and a
plain-text human review round trip; only accepted pairs feed evaluation.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import kg
from .corpus import Corpus
from .errors import PolicyQaError, ReviewParseError, UnknownPairId
from .gateway import LlmRequest, complete
from .kg import KgEntity, KgFact

log = logging.getLogger(__name__)

NEAR_DUP_JACCARD = 0.9

STATUS_PENDING = "pending_review"
STATUS_ACCEPTED = "accepted"
STATUS_REJECTED = "rejected"
STATUSES = (STATUS_PENDING, STATUS_ACCEPTED, STATUS_REJECTED)


@dataclass
class SynthTemplates:
    """Prompt wording for the three generation completions.

    Overridable via a JSON file so the exact prompts are versioned
    configuration, not buried constants.
    """

    question: str = (
        "Write one question answerable solely from the following passage: '{passage}'"
    )
    question_variant: str = (
        "Write question {variant} of {total}, each different, answerable solely "
        "from the following passage: '{passage}'"
    )
    adjust: str = (
        "Rewrite this question so it stays answerable from the passage and uses "
        "the background: '{question} (background: {facts})' ---Passage: '{passage}'"
    )
    answer: str = (
        "Answer the question using only the passage: '{question}' ---Passage: '{passage}'"
    )

    @classmethod
    def load(cls, path: str | Path) -> "SynthTemplates":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {k: v for k, v in raw.items() if k in cls().__dict__}
        return cls(**known)


@dataclass
class SynthPair:
    pair_id: str
    chunk_id: str
    question_raw: str
    question_adjusted: str
    question: str
    answer: str
    entities: list[KgEntity] = field(default_factory=list)
    facts: list[KgFact] = field(default_factory=list)
    status: str = STATUS_PENDING

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "chunk_id": self.chunk_id,
            "question_raw": self.question_raw,
            "question_adjusted": self.question_adjusted,
            "question": self.question,
            "answer": self.answer,
            "entities": [
                {"uri": e.uri, "label": e.label, "match_score": e.match_score}
                for e in self.entities
            ],
            "facts": [f.to_json() for f in self.facts],
            "status": self.status,
        }

    @classmethod
    def from_json(cls, row: dict) -> "SynthPair":
        return cls(
            pair_id=row["pair_id"],
            chunk_id=row["chunk_id"],
            question_raw=row.get("question_raw", ""),
            question_adjusted=row.get("question_adjusted", ""),
            question=row["question"],
            answer=row["answer"],
            entities=[
                KgEntity(uri=e["uri"], label=e["label"], match_score=e["match_score"])
                for e in row.get("entities", [])
            ],
            facts=[
                KgFact(
                    subject_label=f["subject"], predicate=f["predicate"], object_text=f["text"]
                )
                for f in row.get("facts", [])
            ],
            status=row.get("status", STATUS_PENDING),
        )


@dataclass
class GenerationResult:
    pairs: list[SynthPair]
    errors: list[dict]


def generate_pairs(
    corpus: Corpus,
    backend,
    label_index: kg.LabelIndex | None,
    fact_source,
    per_chunk: int = 1,
    templates: SynthTemplates | None = None,
    idf: kg.IdfTable | None = None,
    model_id: str = "gpt-3.5-turbo",
) -> GenerationResult:
    """Generate per_chunk pending pairs for every chunk in the corpus.

    A chunk that fails any step is recorded as an error and skipped;
    generation never aborts the whole run.
    """
    if per_chunk < 1:
        raise ValueError(f"per_chunk must be >= 1, got {per_chunk}")
    templates = templates or SynthTemplates()

    def ask(prompt: str) -> str:
        return complete(LlmRequest(prompt=prompt, model_id=model_id), backend).text

    pairs: list[SynthPair] = []
    errors: list[dict] = []
    for chunk in corpus.chunks:
        for variant in range(per_chunk):
            try:
                if per_chunk == 1:
                    q_prompt = templates.question.format(passage=chunk.text)
                else:
                    q_prompt = templates.question_variant.format(
                        variant=variant + 1, total=per_chunk, passage=chunk.text
                    )
                question_raw = ask(q_prompt)

                entities: list[KgEntity] = []
                facts: list[KgFact] = []
                if label_index is not None and fact_source is not None:
                    _, entities = kg.link_question(question_raw, label_index, idf=idf)
                    facts = kg.facts_for_entities(entities, fact_source)

                if facts:
                    adjusted = ask(
                        templates.adjust.format(
                            question=question_raw,
                            facts=kg.format_external_knowledge(facts),
                            passage=chunk.text,
                        )
                    )
                else:
                    adjusted = question_raw

                answer = ask(templates.answer.format(question=adjusted, passage=chunk.text))
            except PolicyQaError as exc:
                log.warning("chunk %s variant %d failed: %s", chunk.chunk_id, variant, exc)
                errors.append(
                    {
                        "chunk_id": chunk.chunk_id,
                        "variant": variant,
                        "type": type(exc).__name__,
                        "message": str(exc),
                    }
                )
                continue
            pairs.append(
                SynthPair(
                    pair_id=f"{chunk.chunk_id}::{variant}",
                    chunk_id=chunk.chunk_id,
                    question_raw=question_raw,
                    question_adjusted=adjusted,
                    question=adjusted,
                    answer=answer,
                    entities=entities,
                    facts=facts,
                )
            )
    return GenerationResult(pairs=pairs, errors=errors)


_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)


def question_tokens(question: str) -> frozenset[str]:
    return frozenset(_PUNCT_RE.sub(" ", question.lower()).split())


def token_set_jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def dedup(pairs: list[SynthPair]) -> list[SynthPair]:
    """Drop pairs duplicating an earlier *surviving* pair.

    A pair is a duplicate when its question is byte-identical to a
    survivor's, or when the token-set Jaccard (lowercased, punctuation
    stripped) reaches the near-dup threshold.  Survivor-relative matching
    makes the operation idempotent.
    """
    kept: list[SynthPair] = []
    kept_tokens: list[frozenset[str]] = []
    for pair in pairs:
        tokens = question_tokens(pair.question)
        duplicate = False
        for other, other_tokens in zip(kept, kept_tokens):
            if pair.question == other.question:
                duplicate = True
                break
            if token_set_jaccard(tokens, other_tokens) >= NEAR_DUP_JACCARD:
                duplicate = True
                break
        if not duplicate:
            kept.append(pair)
            kept_tokens.append(tokens)
        else:
            log.debug("dropping near-duplicate pair %s", pair.pair_id)
    return kept


# --- persistence and review round trip ---


def save_pairs(pairs: list[SynthPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_json(), ensure_ascii=False) + "\n")


def load_pairs(path: str | Path) -> list[SynthPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                pairs.append(SynthPair.from_json(json.loads(line)))
    return pairs


def export_review(pairs: list[SynthPair], path: str | Path) -> None:
    """Write the editable review file: pair_id, question, answer, status."""
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(
                json.dumps(
                    {
                        "pair_id": pair.pair_id,
                        "question": pair.question,
                        "answer": pair.answer,
                        "status": pair.status,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def import_review(path: str | Path, pairs: list[SynthPair]) -> list[SynthPair]:
    """Merge an edited review file back onto the full pairs.

    Statuses (and any question/answer edits) from the file are applied by
    pair_id; audit fields stay untouched.  Pairs absent from the file keep
    their current status.
    """
    by_id = {pair.pair_id: pair for pair in pairs}
    updates: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReviewParseError(f"{path}:{ln}: {exc}") from exc
            if "pair_id" not in row:
                raise ReviewParseError(f"{path}:{ln}: missing pair_id")
            if row.get("status") not in STATUSES:
                raise ReviewParseError(
                    f"{path}:{ln}: status must be one of {STATUSES}, got {row.get('status')!r}"
                )
            if row["pair_id"] not in by_id:
                raise UnknownPairId(row["pair_id"])
            updates[row["pair_id"]] = row

    merged = []
    for pair in pairs:
        row = updates.get(pair.pair_id)
        if row is None:
            merged.append(pair)
            continue
        merged.append(
            SynthPair(
                pair_id=pair.pair_id,
                chunk_id=pair.chunk_id,
                question_raw=pair.question_raw,
                question_adjusted=pair.question_adjusted,
                question=row.get("question", pair.question),
                answer=row.get("answer", pair.answer),
                entities=pair.entities,
                facts=pair.facts,
                status=row["status"],
            )
        )
    return merged


def accepted_pairs(pairs: list[SynthPair]) -> list[SynthPair]:
    return [pair for pair in pairs if pair.status == STATUS_ACCEPTED]
