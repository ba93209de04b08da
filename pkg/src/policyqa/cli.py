"""Command-line interface: ingest, index, kg, ask, synth, eval, serve."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import evaluation, kg, reporting, retrieval, synth
from .config import Settings, load_settings
from .corpus import Corpus, chunk_document, load_bundle
from .errors import PolicyQaError, StageError
from .prompts import QaMode
from .service import INDEX_FILENAME, ServiceState
from .retrieval import VectorIndex

log = logging.getLogger(__name__)


def _apply_overrides(settings: Settings, **overrides) -> Settings:
    for name, value in overrides.items():
        if value is not None:
            setattr(settings, name, value)
    return settings


def _state(settings: Settings, corpus_dir: str | None) -> ServiceState:
    if corpus_dir is not None:
        settings.corpus_dir = corpus_dir
    return ServiceState(settings, persist_dir=settings.corpus_dir)


def _echo_json(row: dict) -> None:
    click.echo(json.dumps(row, ensure_ascii=False))


@click.group()
@click.option("--config", "config_path", default=None, help="JSON settings file.")
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
@click.pass_context
def main(ctx, config_path, verbose):
    """Question answering over policy rulebooks."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = load_settings(config_path)


# --- corpus ---


@main.command()
@click.argument("bundles", nargs=-1, required=True)
@click.option("--max-chars", type=int, default=None, help="Chunk size limit.")
@click.option("--overlap", type=int, default=None, help="Chunk overlap in chars.")
@click.option("--out", "out_dir", required=True, help="Corpus directory to write.")
@click.pass_obj
def ingest(settings: Settings, bundles, max_chars, overlap, out_dir):
    """Chunk document bundles into a corpus directory."""
    _apply_overrides(settings, max_chars=max_chars, overlap_chars=overlap)
    corpus = Corpus()
    for path in bundles:
        doc = load_bundle(path)
        chunks = chunk_document(
            doc, max_chars=settings.max_chars, overlap_chars=settings.overlap_chars
        )
        corpus.add_document(doc, chunks)
        click.echo(f"{doc.doc_id}: {len(chunks)} chunks ({len(doc.tables)} tables)")
    corpus.save(out_dir)
    stats = corpus.stats()
    click.echo(
        f"wrote {stats['chunks']} chunks from {stats['documents']} documents to {out_dir}"
    )


@main.group()
def index():
    """Build or query the vector index for a corpus."""


@index.command("build")
@click.argument("corpus_dir")
def index_build(corpus_dir):
    corpus = Corpus.load(corpus_dir)
    if not corpus.chunks:
        raise click.ClickException(f"no chunks found in {corpus_dir}")
    vectors = retrieval.build_index(corpus.chunks)
    vectors.save(Path(corpus_dir) / INDEX_FILENAME)
    click.echo(f"indexed {len(vectors)} chunks into {corpus_dir}/{INDEX_FILENAME}")


@index.command("query")
@click.argument("corpus_dir")
@click.option("--q", "question", required=True, help="Query text.")
@click.option("-k", type=int, default=None, help="Number of hits.")
@click.pass_obj
def index_query(settings: Settings, corpus_dir, question, k):
    corpus = Corpus.load(corpus_dir)
    vectors = VectorIndex.load(Path(corpus_dir) / INDEX_FILENAME)
    hits = vectors.search(retrieval.embed_text(question), k=k or settings.k)
    for hit in hits:
        text = corpus.chunk_by_id(hit.chunk_id).text.replace("\n", " ")
        snippet = text if len(text) <= 100 else text[:100] + "..."
        click.echo(f"{hit.chunk_id}\t{hit.score:.6f}\t{snippet}")


# --- knowledge graph ---


@main.group("kg")
def kg_group():
    """Entity linking and external-knowledge facts."""


@kg_group.command("link")
@click.option("--q", "question", required=True, help="Question to link.")
@click.option("--fixture", default=None, help="Label fixture (label<TAB>uri<TAB>abstract).")
@click.pass_obj
def kg_link(settings: Settings, question, fixture):
    _apply_overrides(settings, kg_fixture=fixture)
    if not settings.kg_fixture:
        raise click.ClickException("no label fixture configured (--fixture or kg_fixture)")
    label_index = kg.load_label_fixture(settings.kg_fixture)
    mentions, entities = kg.link_question(question, label_index)
    for mention in mentions:
        _echo_json({"mention": mention.surface, "span": list(mention.span)})
    for entity in entities:
        _echo_json(
            {"uri": entity.uri, "label": entity.label, "match_score": entity.match_score}
        )


@kg_group.command("facts")
@click.option("--entity", "entity_label", required=True, help="Entity label.")
@click.option(
    "--source",
    type=click.Choice(["fixture", "endpoint"]),
    default="fixture",
    show_default=True,
)
@click.option("--fixture", default=None, help="Label fixture path.")
@click.pass_obj
def kg_facts(settings: Settings, entity_label, source, fixture):
    _apply_overrides(settings, kg_fixture=fixture)
    label_index = None
    if settings.kg_fixture:
        label_index = kg.load_label_fixture(settings.kg_fixture)

    uri = f"http://dbpedia.org/resource/{entity_label.replace(' ', '_')}"
    label = entity_label
    if label_index is not None:
        row = label_index.row_for_label(entity_label)
        if row is not None:
            uri, label = row.uri, row.label
    entity = kg.KgEntity(uri=uri, label=label, match_score=1.0)

    if source == "fixture":
        if label_index is None:
            raise click.ClickException("fixture source needs --fixture or kg_fixture")
        fact_source = kg.FixtureFactSource(label_index)
    else:
        fact_source = kg.EndpointFactSource(
            settings.sparql_endpoint,
            language=settings.sparql_language,
            timeout_s=settings.sparql_timeout_s,
        )
    try:
        facts = kg.fetch_facts(entity, fact_source)
    except PolicyQaError as exc:
        raise click.ClickException(str(exc)) from exc
    for fact in facts:
        click.echo(kg.fact_block(fact))


# --- asking ---


_MODE_CHOICE = click.Choice([m.value for m in QaMode])


@main.command()
@click.option("--q", "question", required=True, help="The question to answer.")
@click.option("--mode", type=_MODE_CHOICE, default=None)
@click.option("-k", type=int, default=None)
@click.option("--backend", type=click.Choice(["remote", "replay", "echo"]), default=None)
@click.option("--corpus-dir", default=None)
@click.option("--show-prompt", is_flag=True, help="Print the rendered prompt to stderr.")
@click.pass_obj
def ask(settings: Settings, question, mode, k, backend, corpus_dir, show_prompt):
    """Answer one question in the chosen mode."""
    _apply_overrides(settings, llm_backend=backend)
    state = _state(settings, corpus_dir)
    try:
        result = state.engine.answer_question(
            question,
            QaMode.parse(mode or settings.default_mode),
            state.backend,
            k=k,
        )
    except StageError as exc:
        raise click.ClickException(f"{exc.stage} stage failed: {exc.cause}") from exc
    if show_prompt:
        click.echo(result.prompt_echo, err=True)
    click.echo(result.answer)


@main.command("ask-batch")
@click.argument("questions_file")
@click.option("--mode", type=_MODE_CHOICE, default=None)
@click.option("-k", type=int, default=None)
@click.option("--backend", type=click.Choice(["remote", "replay", "echo"]), default=None)
@click.option("--corpus-dir", default=None)
@click.option("--out", "out_path", required=True, help="Transcript JSONL to write.")
@click.pass_obj
def ask_batch(settings: Settings, questions_file, mode, k, backend, corpus_dir, out_path):
    """Answer every question in a JSONL file; one transcript record each."""
    _apply_overrides(settings, llm_backend=backend)
    state = _state(settings, corpus_dir)
    questions = []
    with open(questions_file, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            questions.append(row["question"] if isinstance(row, dict) else str(row))
    records = state.engine.batch_ask(
        questions, QaMode.parse(mode or settings.default_mode), state.backend, k=k
    )
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    failed = sum(1 for r in records if "error" in r)
    click.echo(f"wrote {len(records)} records to {out_path} ({failed} failed)")


# --- synthesized dataset ---


@main.group("synth")
def synth_group():
    """Generate, deduplicate, and review synthesized QA pairs."""


@synth_group.command("generate")
@click.argument("corpus_dir")
@click.option("--backend", type=click.Choice(["remote", "replay", "echo"]), default=None)
@click.option("--per-chunk", type=int, default=1, show_default=True)
@click.option("--templates", "templates_path", default=None, help="JSON template overrides.")
@click.option("--out", "out_path", required=True)
@click.pass_obj
def synth_generate(settings: Settings, corpus_dir, backend, per_chunk, templates_path, out_path):
    _apply_overrides(settings, llm_backend=backend)
    state = _state(settings, corpus_dir)
    templates = synth.SynthTemplates.load(templates_path) if templates_path else None
    result = synth.generate_pairs(
        state.corpus,
        state.backend,
        state.engine.label_index,
        state.engine.fact_source,
        per_chunk=per_chunk,
        templates=templates,
        idf=state.engine.idf,
        model_id=settings.llm_model,
    )
    synth.save_pairs(result.pairs, out_path)
    click.echo(f"generated {len(result.pairs)} pairs ({len(result.errors)} chunk errors)")
    for err in result.errors:
        click.echo(f"  {err['chunk_id']}: {err['type']}: {err['message']}", err=True)


@synth_group.command("dedup")
@click.argument("pairs_file")
@click.option("--out", "out_path", required=True)
def synth_dedup(pairs_file, out_path):
    pairs = synth.load_pairs(pairs_file)
    kept = synth.dedup(pairs)
    synth.save_pairs(kept, out_path)
    click.echo(f"kept {len(kept)} of {len(pairs)} pairs")


@synth_group.command("export-review")
@click.argument("pairs_file")
@click.option("--out", "out_path", required=True)
def synth_export_review(pairs_file, out_path):
    pairs = synth.load_pairs(pairs_file)
    synth.export_review(pairs, out_path)
    click.echo(f"exported {len(pairs)} pairs for review to {out_path}")


@synth_group.command("import-review")
@click.argument("pairs_file")
@click.argument("review_file")
@click.option("--out", "out_path", required=True)
def synth_import_review(pairs_file, review_file, out_path):
    pairs = synth.load_pairs(pairs_file)
    try:
        merged = synth.import_review(review_file, pairs)
    except PolicyQaError as exc:
        raise click.ClickException(str(exc)) from exc
    synth.save_pairs(merged, out_path)
    accepted = len(synth.accepted_pairs(merged))
    click.echo(f"imported review: {accepted} accepted of {len(merged)}")


@synth_group.command("export-dataset")
@click.argument("pairs_file")
@click.option("--corpus-dir", default=None, help="Used to flag table-sourced pairs.")
@click.option("--out", "out_path", required=True)
def synth_export_dataset(pairs_file, corpus_dir, out_path):
    """Write accepted pairs as a gold evaluation dataset."""
    pairs = synth.load_pairs(pairs_file)
    table_ids: set[str] = set()
    if corpus_dir:
        corpus = Corpus.load(corpus_dir)
        table_ids = {c.chunk_id for c in corpus.chunks if c.kind == "table"}
    gold = evaluation.gold_pairs_from_synth(pairs, table_chunk_ids=table_ids)
    evaluation.save_dataset(gold, out_path)
    click.echo(f"wrote {len(gold)} gold pairs to {out_path}")


# --- evaluation ---


@main.group("eval")
def eval_group():
    """Run datasets, record judgments, and build reports."""


@eval_group.command("run")
@click.argument("dataset_file")
@click.option("--modes", default="agnostic,rulebook,rulebook_kg", show_default=True)
@click.option("--backend", type=click.Choice(["remote", "replay", "echo"]), default=None)
@click.option("-k", type=int, default=None)
@click.option("--corpus-dir", default=None)
@click.option("--out", "out_path", required=True)
@click.pass_obj
def eval_run(settings: Settings, dataset_file, modes, backend, k, corpus_dir, out_path):
    _apply_overrides(settings, llm_backend=backend)
    state = _state(settings, corpus_dir)
    dataset = evaluation.load_dataset(dataset_file)
    mode_list = [QaMode.parse(m.strip()) for m in modes.split(",") if m.strip()]
    records = evaluation.run_eval(state.engine, dataset, mode_list, state.backend, k=k)
    evaluation.save_transcript(records, out_path)
    failed = sum(1 for r in records if "error" in r)
    click.echo(f"wrote {len(records)} transcript records to {out_path} ({failed} failed)")


@eval_group.command("judge")
@click.argument("transcript_file")
@click.option(
    "--import",
    "import_path",
    default=None,
    help="Batch judgment rows (JSONL) instead of interactive prompts.",
)
@click.option("--judge-id", default="judge1", show_default=True)
@click.option("--out", "out_path", required=True)
def eval_judge(transcript_file, import_path, judge_id, out_path):
    """Attach human judgments to a transcript."""
    transcript = evaluation.load_transcript(transcript_file)
    if import_path:
        with open(import_path, encoding="utf-8") as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        try:
            judgments = evaluation.merge_judgments(transcript, rows)
        except PolicyQaError as exc:
            raise click.ClickException(str(exc)) from exc
    else:
        if not sys.stdin.isatty():
            raise click.ClickException("no terminal for interactive judging; use --import")
        judgments = _judge_interactively(transcript, judge_id)
    evaluation.save_judgments(judgments, out_path)
    click.echo(f"wrote {len(judgments)} judgments to {out_path}")


def _judge_interactively(transcript, judge_id):
    judgments = []
    for record in transcript:
        if "error" in record:
            click.echo(f"[{record['pair_id']}/{record['mode']}] failed: skipping")
            continue
        click.echo()
        click.echo(f"Q: {record['question']}")
        click.echo(f"gold: {record['gold_answer']}")
        click.echo(f"[{record['mode']}] answer: {record['answer']}")
        answerable = click.confirm("answerable?", default=True)
        complete_ = click.confirm("complete?", default=True) if answerable else False
        correct = answerable and complete_
        if correct:
            category = evaluation.NO_ERROR
        else:
            choices = [
                c
                for c in evaluation.ERROR_CATEGORIES
                if c != "wrong_context" or record["mode"] != QaMode.AGNOSTIC.value
            ]
            category = click.prompt(
                "error category", type=click.Choice(choices), default=choices[0]
            )
        rows = [
            {
                "pair_id": record["pair_id"],
                "mode": record["mode"],
                "answerable": answerable,
                "complete": complete_,
                "correct": correct,
                "error_category": category,
                "judge_id": judge_id,
            }
        ]
        judgments.extend(evaluation.merge_judgments(transcript, rows))
    return judgments


@eval_group.command("report")
@click.argument("judgments_file")
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text")
@click.option(
    "--out-dir",
    default=None,
    help="Write report file plus figures here instead of printing.",
)
def eval_report(judgments_file, fmt, out_dir):
    judgments = evaluation.load_judgments(judgments_file)
    try:
        report = evaluation.build_report(judgments)
    except PolicyQaError as exc:
        raise click.ClickException(str(exc)) from exc
    if out_dir:
        written = reporting.write_report(report, out_dir, fmt=fmt)
        for path in written:
            click.echo(str(path))
    elif fmt == "csv":
        click.echo(reporting.render_csv(report), nl=False)
    else:
        click.echo(reporting.render_text(report), nl=False)


# --- service ---


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--corpus-dir", default=None)
@click.option("--backend", type=click.Choice(["remote", "replay", "echo"]), default=None)
@click.pass_obj
def serve(settings: Settings, host, port, corpus_dir, backend):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    _apply_overrides(settings, llm_backend=backend, corpus_dir=corpus_dir)
    state = ServiceState(settings, persist_dir=settings.corpus_dir)
    uvicorn.run(create_app(state), host=host, port=port)


if __name__ == "__main__":
    main()
