"""Prompt rendering: the three mode shapes, and budget trimming properties."""

from __future__ import annotations

import random

import pytest

from conftest import LIFESTYLE_ABSTRACT, LIFESTYLE_CONTEXT, NOTIFY_PROVISION
from policyqa.errors import BudgetTooSmall, EmptyQuestion, NoContext
from policyqa.prompts import (
    CONTEXT_MARKER,
    EXTERNAL_MARKER,
    RULEBOOK_JOINER,
    ContextBlock,
    QaMode,
    build_agnostic,
    build_rulebook,
    build_rulebook_kg,
    estimate_tokens,
    fit_budget,
    render_prompt,
)


def _norm(text: str) -> str:
    return " ".join(text.split())


# ---------------------------------------------------------------------------
# golden renderings

NOTIFY_QUESTION = "When will I be notified of payment reason change?"

DIABETES_QUESTION = (
    "He was hospitalized for a week due to diabetes. "
    "how much is his benefit amount her allowance?"
)

LIFESTYLE_FACT_BLOCK = f"lifestyle disease | abstract | {LIFESTYLE_ABSTRACT}"


def test_agnostic_prompt_golden():
    bundle = build_agnostic(NOTIFY_QUESTION)
    expected = (
        "Answer the question in a short and concise way: "
        "'When will I be notified of payment reason change?'"
    )
    assert bundle.rendered == expected


def test_rulebook_prompt_golden():
    bundle = build_rulebook(
        NOTIFY_QUESTION, [ContextBlock("doc#0", 0.8, NOTIFY_PROVISION)]
    )
    expected = (
        "Answer the question in a short and concise way: "
        "'When will I be notified of payment reason change?', "
        f"base on the context: '{NOTIFY_PROVISION}'"
    )
    assert _norm(bundle.rendered) == _norm(expected)


def test_rulebook_kg_prompt_golden():
    bundle = build_rulebook_kg(
        DIABETES_QUESTION,
        [ContextBlock("doc#1", 0.9, LIFESTYLE_CONTEXT)],
        [LIFESTYLE_FACT_BLOCK],
    )
    expected = (
        "Answer the question in a short and concise way based on the context "
        f"and external information: '{DIABETES_QUESTION}' "
        f"---Context: '{LIFESTYLE_CONTEXT}' "
        f"---External information: '{LIFESTYLE_FACT_BLOCK}'"
    )
    assert _norm(bundle.rendered) == _norm(expected)


def test_two_context_blocks_render_side_by_side():
    bundle = build_rulebook(
        "What changes?",
        [ContextBlock("a", 0.9, "first block"), ContextBlock("b", 0.5, "second block")],
    )
    assert bundle.rendered.endswith(", base on the context: 'first block' 'second block'")


# ---------------------------------------------------------------------------
# mode separation


WORDS = ["payment", "benefit", "surgery", "claim", "notice", "renewal", "deadline"]


def _suite_question(rng: random.Random, i: int) -> str:
    return f"Question {i}: is the {rng.choice(WORDS)} {rng.choice(WORDS)} covered?"


def _suite_contexts(rng: random.Random) -> list[ContextBlock]:
    return [
        ContextBlock(f"c{j}", 1.0 - j * 0.1, " ".join(rng.choice(WORDS) for _ in range(8)))
        for j in range(rng.randint(1, 3))
    ]


def test_mode_separation_over_generated_suite():
    rng = random.Random(13)
    for i in range(50):
        question = _suite_question(rng, i)
        contexts = _suite_contexts(rng)
        externals = [f"entity | abstract | note {i}"] if i % 2 else []

        agnostic = build_agnostic(question).rendered
        assert CONTEXT_MARKER not in agnostic
        assert EXTERNAL_MARKER not in agnostic
        assert RULEBOOK_JOINER not in agnostic

        rulebook = build_rulebook(question, contexts).rendered
        assert rulebook.count(RULEBOOK_JOINER) == 1
        assert CONTEXT_MARKER not in rulebook
        assert EXTERNAL_MARKER not in rulebook

        kg = build_rulebook_kg(question, contexts, externals).rendered
        assert kg.count(CONTEXT_MARKER) == 1
        assert kg.count(EXTERNAL_MARKER) == 1
        assert kg.index(CONTEXT_MARKER) < kg.index(EXTERNAL_MARKER)
        assert RULEBOOK_JOINER not in kg


def test_question_appears_exactly_once_in_every_mode():
    question = "Is the zq1 benefit payable?"
    contexts = [ContextBlock("c0", 0.9, "the benefit is payable on request")]
    for bundle in (
        build_agnostic(question),
        build_rulebook(question, contexts),
        build_rulebook_kg(question, contexts, ["e | abstract | note"]),
    ):
        assert bundle.rendered.count(question) == 1


def test_context_text_lands_verbatim_in_the_prompt():
    contexts = [
        ContextBlock("c0", 0.9, "Article 7. The Company shall pay the fee."),
        ContextBlock("c1", 0.4, "Article 9. Claims expire after two years."),
    ]
    bundle = build_rulebook_kg("What expires?", contexts, [])
    for block in contexts:
        assert f"'{block.text}'" in bundle.rendered


def test_contexts_order_by_score_stable():
    contexts = [
        ContextBlock("a", 0.5, "a text"),
        ContextBlock("b", 0.9, "b text"),
        ContextBlock("c", 0.5, "c text"),
    ]
    bundle = build_rulebook("q?", contexts)
    assert [b.chunk_id for b in bundle.context_blocks] == ["b", "a", "c"]
    assert bundle.rendered.index("b text") < bundle.rendered.index("a text")
    assert bundle.rendered.index("a text") < bundle.rendered.index("c text")


def test_empty_external_section_renders_bare_marker():
    bundle = build_rulebook_kg("q?", [ContextBlock("c", 1.0, "ctx")], [])
    assert bundle.rendered.endswith(EXTERNAL_MARKER)


def test_context_modes_require_context():
    with pytest.raises(NoContext):
        build_rulebook("q?", [])
    with pytest.raises(NoContext):
        build_rulebook_kg("q?", [], ["ext"])


def test_empty_question_is_rejected_everywhere():
    for build in (build_agnostic, lambda q: build_rulebook(q, [ContextBlock("c", 1, "t")])):
        with pytest.raises(EmptyQuestion):
            build("")
        with pytest.raises(EmptyQuestion):
            build("   ")


def test_mode_parse():
    assert QaMode.parse("rulebook_kg") is QaMode.RULEBOOK_KG
    with pytest.raises(ValueError):
        QaMode.parse("turbo")


def test_token_estimate_rounds_up():
    assert estimate_tokens("") == 0
    assert estimate_tokens("abcd") == 1
    assert estimate_tokens("abcde") == 2
    assert estimate_tokens("x" * 4000) == 1000


# ---------------------------------------------------------------------------
# budget trimming


def _random_bundle(rng: random.Random):
    question = f"Is item {rng.randint(0, 999)} covered under the policy?"
    contexts = [
        ContextBlock(
            f"c{j}",
            rng.choice([0.2, 0.5, 0.5, 0.9]),
            "w" + " word" * rng.randint(4, 40),
        )
        for j in range(rng.randint(1, 5))
    ]
    externals = [f"e{j} | abstract | detail {'x' * rng.randint(4, 60)}" for j in range(rng.randint(0, 3))]
    if rng.random() < 0.3:
        return build_rulebook(question, contexts)
    return build_rulebook_kg(question, contexts, externals)


def _check_fit(bundle, fitted, budget):
    kept_ctx = len(fitted.context_blocks)
    kept_ext = len(fitted.external_blocks)
    assert estimate_tokens(fitted.rendered) <= budget
    # whole blocks only, dropped from the low-score end / the back
    assert fitted.context_blocks == bundle.context_blocks[:kept_ctx]
    assert fitted.external_blocks == bundle.external_blocks[:kept_ext]
    if kept_ext < len(bundle.external_blocks):
        assert kept_ctx == 0  # externals only go once contexts are gone
    assert fitted.rendered == render_prompt(
        bundle.mode, bundle.question, fitted.context_blocks, fitted.external_blocks
    )
    # minimality: adding back the next block would blow the budget
    if kept_ext < len(bundle.external_blocks):
        bigger = render_prompt(
            bundle.mode, bundle.question, [], bundle.external_blocks[: kept_ext + 1]
        )
        assert estimate_tokens(bigger) > budget
    elif kept_ctx < len(bundle.context_blocks):
        bigger = render_prompt(
            bundle.mode,
            bundle.question,
            bundle.context_blocks[: kept_ctx + 1],
            bundle.external_blocks,
        )
        assert estimate_tokens(bigger) > budget


def test_fit_budget_properties_over_random_bundles():
    rng = random.Random(37)
    for _ in range(60):
        bundle = _random_bundle(rng)
        full = estimate_tokens(bundle.rendered)
        bare = estimate_tokens(render_prompt(bundle.mode, bundle.question, [], []))
        budget = rng.randint(max(1, bare - 3), full + 5)
        try:
            fitted = fit_budget(bundle, budget)
        except BudgetTooSmall:
            assert bare > budget
            continue
        _check_fit(bundle, fitted, budget)
        again = fit_budget(fitted, budget)
        assert again.rendered == fitted.rendered


def test_fit_budget_is_identity_when_it_fits():
    bundle = build_rulebook("q?", [ContextBlock("c", 1.0, "short context")])
    assert fit_budget(bundle, 1000) is bundle


def test_fit_budget_drops_lowest_score_first_ties_later():
    contexts = [
        ContextBlock("hi", 0.9, "k" * 40),
        ContextBlock("lo-early", 0.5, "k" * 40),
        ContextBlock("lo-late", 0.5, "k" * 40),
    ]
    bundle = build_rulebook("which survives?", contexts)
    budget = estimate_tokens(bundle.rendered) - 1  # forces exactly one drop
    fitted = fit_budget(bundle, budget)
    assert [b.chunk_id for b in fitted.context_blocks] == ["hi", "lo-early"]


def test_fit_budget_keeps_larger_budgets_superset():
    bundle = build_rulebook_kg(
        "q?",
        [ContextBlock(f"c{j}", 0.9 - j * 0.1, "word " * 30) for j in range(4)],
        ["e | abstract | " + "y" * 50],
    )
    small = fit_budget(bundle, 40)
    large = fit_budget(bundle, 80)
    assert len(small.context_blocks) <= len(large.context_blocks)
    assert len(small.external_blocks) <= len(large.external_blocks)


def test_fit_budget_too_small_raises():
    bundle = build_agnostic("a question far longer than four tokens of budget")
    with pytest.raises(BudgetTooSmall):
        fit_budget(bundle, 2)
