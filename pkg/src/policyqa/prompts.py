"""Prompt construction for the three answering modes.

Three shapes, fixed wording:

* agnostic: the bare instruction plus the quoted question.
* rulebook: the same instruction, then ``, base on the context:`` and the
  quoted context blocks.  (The wording "base on" is intentional; downstream
  fixtures are keyed on these exact bytes.)
* rulebook_kg: a longer instruction, then ``---Context:`` and
  ``---External information:`` sections.

Rendering is a pure function of the bundle fields, so a bundle can be
re-rendered, trimmed, and hashed reproducibly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .errors import BudgetTooSmall, EmptyQuestion, NoContext

BASE_INDICATOR = "Answer the question in a short and concise way"
KG_INDICATOR = (
    "Answer the question in a short and concise way based on the context "
    "and external information"
)
RULEBOOK_JOINER = ", base on the context:"
CONTEXT_MARKER = "---Context:"
EXTERNAL_MARKER = "---External information:"

DEFAULT_MAX_TOKENS = 3000


class QaMode(str, enum.Enum):
    AGNOSTIC = "agnostic"
    RULEBOOK = "rulebook"
    RULEBOOK_KG = "rulebook_kg"

    @classmethod
    def parse(cls, value: str) -> "QaMode":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(
                f"unknown mode {value!r}; expected one of {[m.value for m in cls]}"
            ) from None


def indicator_for(mode: QaMode) -> str:
    return KG_INDICATOR if mode is QaMode.RULEBOOK_KG else BASE_INDICATOR


def estimate_tokens(text: str) -> int:
    """Cheap deterministic token proxy: one token per 4 characters, rounded up."""
    return math.ceil(len(text) / 4)


@dataclass
class ContextBlock:
    chunk_id: str
    score: float
    text: str


@dataclass
class PromptBundle:
    mode: QaMode
    indicator: str
    question: str
    context_blocks: list[ContextBlock] = field(default_factory=list)
    external_blocks: list[str] = field(default_factory=list)
    rendered: str = ""


def _quoted(blocks: list[str]) -> str:
    # single quotes, space separated; internal quotes left as-is on purpose
    return " ".join(f"'{b}'" for b in blocks)


def _section(marker: str, blocks: list[str]) -> str:
    body = _quoted(blocks)
    return f"{marker} {body}" if body else marker


def render_prompt(
    mode: QaMode,
    question: str,
    context_blocks: list[ContextBlock],
    external_blocks: list[str],
) -> str:
    indicator = indicator_for(mode)
    head = f"{indicator}: '{question}'"
    if mode is QaMode.AGNOSTIC:
        return head
    context_texts = [b.text for b in context_blocks]
    if mode is QaMode.RULEBOOK:
        body = _quoted(context_texts)
        return f"{head}{RULEBOOK_JOINER} {body}" if body else f"{head}{RULEBOOK_JOINER}"
    return " ".join(
        [
            head,
            _section(CONTEXT_MARKER, context_texts),
            _section(EXTERNAL_MARKER, external_blocks),
        ]
    )


def _make_bundle(
    mode: QaMode,
    question: str,
    context_blocks: list[ContextBlock] | None = None,
    external_blocks: list[str] | None = None,
) -> PromptBundle:
    if not question or not question.strip():
        raise EmptyQuestion("question must be non-empty")
    contexts = sorted(context_blocks or [], key=lambda b: -b.score)
    externals = list(external_blocks or [])
    return PromptBundle(
        mode=mode,
        indicator=indicator_for(mode),
        question=question,
        context_blocks=contexts,
        external_blocks=externals,
        rendered=render_prompt(mode, question, contexts, externals),
    )


def build_agnostic(question: str) -> PromptBundle:
    return _make_bundle(QaMode.AGNOSTIC, question)


def build_rulebook(question: str, contexts: list[ContextBlock]) -> PromptBundle:
    if not contexts:
        raise NoContext("rulebook mode needs at least one context block")
    return _make_bundle(QaMode.RULEBOOK, question, context_blocks=contexts)


def build_rulebook_kg(
    question: str, contexts: list[ContextBlock], external: list[str]
) -> PromptBundle:
    if not contexts:
        raise NoContext("rulebook_kg mode needs at least one context block")
    return _make_bundle(
        QaMode.RULEBOOK_KG, question, context_blocks=contexts, external_blocks=external
    )


def fit_budget(bundle: PromptBundle, max_tokens: int = DEFAULT_MAX_TOKENS) -> PromptBundle:
    """Trim a bundle until its rendered form fits the token budget.

    Whole blocks only: context blocks go first, lowest score first (ties
    drop the later block), then external blocks from the end.  The
    indicator and question are never touched; if stripping everything still
    does not fit, the budget is simply too small for the question.
    """
    if estimate_tokens(bundle.rendered) <= max_tokens:
        return bundle
    contexts = list(bundle.context_blocks)
    externals = list(bundle.external_blocks)
    while True:
        rendered = render_prompt(bundle.mode, bundle.question, contexts, externals)
        if estimate_tokens(rendered) <= max_tokens:
            return replace(
                bundle,
                context_blocks=contexts,
                external_blocks=externals,
                rendered=rendered,
            )
        if contexts:
            drop = min(range(len(contexts)), key=lambda i: (contexts[i].score, -i))
            contexts.pop(drop)
        elif externals:
            externals.pop()
        else:
            raise BudgetTooSmall(
                f"even the bare prompt needs {estimate_tokens(rendered)} tokens, "
                f"budget is {max_tokens}"
            )
