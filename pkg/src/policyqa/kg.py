"""Entity mentions, label linking, and external-knowledge facts.

Questions get mined for candidate entity mentions with a tagger-free
heuristic, mentions are linked against a label index by text matching, and
facts for linked entities come either from a live SPARQL endpoint or from a
tab-separated offline fixture.  The whole path runs without network access
in fixture mode.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass

import requests

from .errors import (
    EndpointTimeout,
    EntityNotFound,
    IndexUnavailable,
    MalformedResponse,
    ValidationError,
)

log = logging.getLogger(__name__)

MAX_MENTIONS = 5
MAX_MENTION_TOKENS = 4
MAX_FACTS = 3
FACT_BUDGET_CHARS = 600
TRIGRAM_THRESHOLD = 0.5
ELLIPSIS = "..."

DEFAULT_ENDPOINT_LANG = "en"
DEFAULT_ABSTRACT_PREDICATE = "http://dbpedia.org/ontology/abstract"

# Compact stopword + pronoun list; enough to keep function words and
# contraction fragments out of candidate mentions.
STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can cannot could did do does
    doing down during each few for from further had has have having he her
    here hers herself him himself his how i if in into is it its itself just
    many me more most much my myself no nor not now of off on once only or
    other our ours ourselves out over own same she should so some such than
    that the their theirs them themselves then there these they this those
    through to too under until up very was we were what when where which
    while who whom why will with would you your yours yourself yourselves
    d ll m re s t ve
    """.split()
)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_BREAK = (".", "?", "!", "。", "\n")


@dataclass
class EntityMention:
    surface: str
    span: tuple[int, int]


@dataclass
class KgEntity:
    uri: str
    label: str
    match_score: float


@dataclass
class KgFact:
    subject_label: str
    predicate: str
    object_text: str

    def to_json(self) -> dict:
        return {
            "subject": self.subject_label,
            "predicate": self.predicate,
            "text": self.object_text,
        }


class IdfTable:
    """Inverse document frequency over chunk texts, for ranking mentions."""

    def __init__(self, idf: dict[str, float], default: float) -> None:
        self._idf = idf
        self.default = default

    def get(self, token: str) -> float:
        return self._idf.get(token, self.default)

    @classmethod
    def from_texts(cls, texts) -> "IdfTable":
        df: dict[str, int] = {}
        n = 0
        for text in texts:
            n += 1
            for token in set(_TOKEN_RE.findall(text.lower())):
                df[token] = df.get(token, 0) + 1
        idf = {tok: math.log((1 + n) / (1 + count)) + 1.0 for tok, count in df.items()}
        default = (max(idf.values()) if idf else 1.0) + 1.0
        return cls(idf, default)


_UNIFORM_IDF = IdfTable({}, 1.0)


def _question_tokens(question: str) -> list[tuple[str, int, int]]:
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(question)]


def _sentence_initial_flags(question: str, tokens) -> list[bool]:
    flags = []
    prev_end = 0
    for i, (_, start, _) in enumerate(tokens):
        gap = question[prev_end:start]
        flags.append(i == 0 or any(b in gap for b in _SENTENCE_BREAK))
        prev_end = tokens[i][2]
    return flags


def _adjacent_flags(question: str, tokens) -> list[bool]:
    # adjacent[i] is True when tokens i and i+1 are separated by spaces only,
    # so multi-token mentions never straddle punctuation
    flags = []
    for i in range(len(tokens) - 1):
        gap = question[tokens[i][2] : tokens[i + 1][1]]
        flags.append(gap.strip(" ") == "")
    return flags


def extract_mentions(question: str, idf: IdfTable | None = None) -> list[EntityMention]:
    """Pick up to five candidate entity mentions from a question.

    Candidates are maximal capitalized runs (skipping sentence-initial
    capitals) plus 1-4 token spans of non-stopword tokens; both kinds are
    ranked by mean inverse document frequency and the survivors come back
    deduplicated in question order.
    """
    if not question.strip():
        raise ValidationError("question must be non-empty")
    if idf is None:
        idf = _UNIFORM_IDF
    tokens = _question_tokens(question)
    if not tokens:
        return []
    initial = _sentence_initial_flags(question, tokens)
    adjacent = _adjacent_flags(question, tokens)

    # candidate = (first_token_idx, last_token_idx) inclusive
    candidates: set[tuple[int, int]] = set()

    run_start = None
    for i, (tok, _, _) in enumerate(tokens):
        capital = tok[0].isupper() and not initial[i]
        joined = run_start is not None and adjacent[i - 1]
        if capital and joined:
            continue
        if run_start is not None:
            candidates.add((run_start, min(i - 1, run_start + MAX_MENTION_TOKENS - 1)))
            run_start = None
        if capital:
            run_start = i
    if run_start is not None:
        candidates.add((run_start, min(len(tokens) - 1, run_start + MAX_MENTION_TOKENS - 1)))

    for i in range(len(tokens)):
        if tokens[i][0].lower() in STOPWORDS:
            continue
        for j in range(i, min(i + MAX_MENTION_TOKENS, len(tokens))):
            if tokens[j][0].lower() in STOPWORDS:
                break
            if j > i and not adjacent[j - 1]:
                break
            candidates.add((i, j))

    scored = []
    for first, last in candidates:
        span_tokens = [tokens[t][0].lower() for t in range(first, last + 1)]
        if all(tok in STOPWORDS for tok in span_tokens):
            continue
        score = sum(idf.get(tok) for tok in span_tokens) / len(span_tokens)
        start, end = tokens[first][1], tokens[last][2]
        scored.append((score, start, end))

    scored.sort(key=lambda item: (-item[0], item[1], -(item[2] - item[1])))
    picked: list[tuple[int, int]] = []
    seen_surfaces: set[str] = set()
    for _, start, end in scored:
        surface = question[start:end]
        key = surface.casefold()
        if key in seen_surfaces:
            continue
        seen_surfaces.add(key)
        picked.append((start, end))
        if len(picked) >= MAX_MENTIONS:
            break
    picked.sort()
    return [EntityMention(surface=question[s:e], span=(s, e)) for s, e in picked]


# --- label index and linking ---


def char_trigrams(text: str) -> set[str]:
    if len(text) < 3:
        return {text} if text else set()
    return {text[i : i + 3] for i in range(len(text) - 2)}


def trigram_jaccard(a: str, b: str) -> float:
    ta, tb = char_trigrams(a), char_trigrams(b)
    if not ta or not tb:
        return 0.0
    union = len(ta | tb)
    return len(ta & tb) / union if union else 0.0


@dataclass
class LabelRow:
    label: str
    uri: str
    abstract: str


class LabelIndex:
    """Entity labels with their URIs and cached abstracts, linkable by text.

    Matching runs in three stages; an earlier stage always beats a later
    one regardless of scores:

    1. exact case-insensitive label equality, score 1.0
    2. prefix in either direction (label extends mention or vice versa),
       shortest label first, score 0.9
    3. character-trigram Jaccard, best label wins, cutoff 0.5

    Remaining ties break by casefolded label then URI, ascending.
    """

    def __init__(self, rows: list[LabelRow]) -> None:
        self.rows = sorted(rows, key=lambda r: (r.label.casefold(), r.uri))
        self._exact: dict[str, LabelRow] = {}
        for row in self.rows:
            self._exact.setdefault(row.label.casefold(), row)

    def __len__(self) -> int:
        return len(self.rows)

    def row_for_label(self, label: str) -> LabelRow | None:
        return self._exact.get(label.casefold())

    def row_for_uri(self, uri: str) -> LabelRow | None:
        for row in self.rows:
            if row.uri == uri:
                return row
        return None

    def link(self, mention: EntityMention) -> KgEntity | None:
        if not self.rows:
            raise IndexUnavailable("label index is empty")
        needle = mention.surface.strip().casefold()
        if not needle:
            return None

        exact = self._exact.get(needle)
        if exact is not None:
            return KgEntity(uri=exact.uri, label=exact.label, match_score=1.0)

        prefix_hits = [
            row
            for row in self.rows
            if row.label.casefold().startswith(needle)
            or needle.startswith(row.label.casefold())
        ]
        if prefix_hits:
            best = min(prefix_hits, key=lambda r: (len(r.label), r.label.casefold(), r.uri))
            return KgEntity(uri=best.uri, label=best.label, match_score=0.9)

        best_row = None
        best_score = -1.0
        for row in self.rows:
            score = trigram_jaccard(needle, row.label.casefold())
            if score > best_score:
                best_row, best_score = row, score
        if best_row is None or best_score < TRIGRAM_THRESHOLD:
            return None
        return KgEntity(uri=best_row.uri, label=best_row.label, match_score=best_score)


def load_label_fixture(path) -> LabelIndex:
    """Read a `label<TAB>uri<TAB>abstract` fixture file into a LabelIndex."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise ValidationError(f"{path}:{ln}: expected label<TAB>uri<TAB>abstract")
            rows.append(LabelRow(label=parts[0], uri=parts[1], abstract=parts[2]))
    return LabelIndex(rows)


# --- fact sources ---


def truncate_fact_text(text: str, budget: int = FACT_BUDGET_CHARS) -> str:
    """Cap fact text at the budget, cutting on a word boundary with an ellipsis."""
    if len(text) <= budget:
        return text
    cut = text[: budget - len(ELLIPSIS)]
    space = cut.rfind(" ")
    if space > 0:
        cut = cut[:space]
    return cut.rstrip() + ELLIPSIS


def _predicate_short_name(predicate_uri: str) -> str:
    tail = predicate_uri.rsplit("/", 1)[-1]
    return tail.rsplit("#", 1)[-1]


class FixtureFactSource:
    """Serves abstracts straight from the label fixture; fully offline."""

    def __init__(self, index: LabelIndex, fact_budget: int = FACT_BUDGET_CHARS) -> None:
        self.index = index
        self.fact_budget = fact_budget

    def facts_for(self, entity: KgEntity) -> list[KgFact]:
        row = self.index.row_for_uri(entity.uri) or self.index.row_for_label(entity.label)
        if row is None:
            raise EntityNotFound(entity.label)
        if not row.abstract:
            return []
        return [
            KgFact(
                subject_label=row.label,
                predicate="abstract",
                object_text=truncate_fact_text(row.abstract, self.fact_budget),
            )
        ]


class EndpointFactSource:
    """Fetches predicate values over SPARQL (HTTP GET, JSON bindings)."""

    def __init__(
        self,
        endpoint_url: str,
        language: str = DEFAULT_ENDPOINT_LANG,
        predicates: list[str] | None = None,
        timeout_s: float = 10.0,
        fact_budget: int = FACT_BUDGET_CHARS,
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint_url = endpoint_url
        self.language = language
        self.predicates = predicates or [DEFAULT_ABSTRACT_PREDICATE]
        self.timeout_s = timeout_s
        self.fact_budget = fact_budget
        self.session = session or requests.Session()

    def _query(self, sparql: str) -> dict:
        last_exc: Exception | None = None
        for attempt in range(2):
            try:
                resp = self.session.get(
                    self.endpoint_url,
                    params={"query": sparql, "format": "application/sparql-results+json"},
                    timeout=self.timeout_s,
                )
                resp.raise_for_status()
                return resp.json()
            except requests.Timeout as exc:
                last_exc = exc
                log.warning("sparql timeout (attempt %d): %s", attempt + 1, exc)
            except (requests.RequestException, json.JSONDecodeError) as exc:
                raise MalformedResponse(str(exc)) from exc
        raise EndpointTimeout(str(last_exc))

    def facts_for(self, entity: KgEntity) -> list[KgFact]:
        facts = []
        for predicate in self.predicates:
            sparql = (
                f"SELECT ?o WHERE {{ <{entity.uri}> <{predicate}> ?o . "
                f'FILTER (lang(?o) = "{self.language}") }}'
            )
            payload = self._query(sparql)
            try:
                bindings = payload["results"]["bindings"]
            except (KeyError, TypeError) as exc:
                raise MalformedResponse("missing results.bindings") from exc
            for binding in bindings:
                try:
                    value = binding["o"]["value"]
                except (KeyError, TypeError) as exc:
                    raise MalformedResponse("binding missing o.value") from exc
                facts.append(
                    KgFact(
                        subject_label=entity.label,
                        predicate=_predicate_short_name(predicate),
                        object_text=truncate_fact_text(value, self.fact_budget),
                    )
                )
        return facts


def fetch_facts(entity: KgEntity, source) -> list[KgFact]:
    return source.facts_for(entity)


def fact_block(fact: KgFact) -> str:
    return f"{fact.subject_label} | {fact.predicate} | {fact.object_text}"


def format_external_knowledge(facts: list[KgFact]) -> str:
    """Render facts as `subject | predicate | text` segments joined by `...`."""
    return ELLIPSIS.join(fact_block(f) for f in facts)


def link_question(
    question: str, index: LabelIndex, idf: IdfTable | None = None
) -> tuple[list[EntityMention], list[KgEntity]]:
    """Extract mentions and link them, deduplicating entities by URI."""
    mentions = extract_mentions(question, idf=idf)
    entities: list[KgEntity] = []
    seen_uris: set[str] = set()
    for mention in mentions:
        entity = index.link(mention)
        if entity is None or entity.uri in seen_uris:
            continue
        seen_uris.add(entity.uri)
        entities.append(entity)
    return mentions, entities


def facts_for_entities(entities: list[KgEntity], source, max_facts: int = MAX_FACTS) -> list[KgFact]:
    """Collect facts across entities up to the cap; entities without facts are skipped."""
    facts: list[KgFact] = []
    for entity in entities:
        if len(facts) >= max_facts:
            break
        try:
            fetched = fetch_facts(entity, source)
        except EntityNotFound:
            log.info("no facts for linked entity %s", entity.label)
            continue
        facts.extend(fetched[: max_facts - len(facts)])
    return facts


def gather_external_knowledge(
    question: str,
    index: LabelIndex,
    source,
    idf: IdfTable | None = None,
    max_facts: int = MAX_FACTS,
) -> tuple[list[EntityMention], list[KgEntity], list[KgFact]]:
    """Run extract -> link -> fetch for one question, capped at max_facts."""
    mentions, entities = link_question(question, index, idf=idf)
    facts = facts_for_entities(entities, source, max_facts=max_facts)
    return mentions, entities, facts
