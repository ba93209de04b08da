"""Shared fixtures: a small insurance rulebook corpus and offline KG data.

The corpus is one women's medical insurance rulebook with a benefits table;
it is small enough to chunk and embed in milliseconds but covers every
retrieval target the question fixtures need.  The label fixture mirrors the
`label<TAB>uri<TAB>abstract` file format used in production.
"""

from __future__ import annotations

import socket

import pytest

from policyqa.corpus import Corpus, SourceDocument, TableGrid, chunk_document
from policyqa.kg import FixtureFactSource, IdfTable, LabelIndex, LabelRow
from policyqa.pipeline import QaEngine
from policyqa.retrieval import build_index

# ---------------------------------------------------------------------------
# rulebook corpus

LIFESTYLE_CONTEXT = (
    "Hospitalization benefits for lifestyle-related diseases, Payment amount, "
    "The following amount per hospitalization (daily amount of hospitalization "
    "benefits) x number of days of hospitalization during the insurance period "
    "for treatment of lifestyle-related diseases listed on the left"
)

NOTIFY_PROVISION = (
    "2. If the Company changes the provisions concerning the grounds for "
    "payment of advanced medical care benefits, etc. pursuant to the "
    "provisions of Paragraph 1, the Company shall notify the policyholder of "
    "such change at least two months prior to the date of such change."
)

POLICY_BODY = f"""Article 1. (Benefits covered) Under this rider the Company pays hospitalization benefits, radiation treatment benefits, advanced medical care benefits, bone marrow donor benefits, and breast reconstruction benefits to the insured.
Article 4. (Hospitalization benefits) When the insured is hospitalized during the insurance period for the treatment of an illness, the Company shall pay hospitalization benefits of the daily hospitalization amount for each day of hospitalization.
{LIFESTYLE_CONTEXT}.
Article 6. (Radiation treatment benefits) When the insured undergoes radiation treatment for the treatment of an illness during the insurance period, the Company shall pay a radiation treatment benefit of the daily hospitalization amount multiplied by ten per course of treatment.
Article 7. (Advanced medical care benefits) When the insured receives advanced medical care during the insurance period, the Company shall pay the technical fee for that care as advanced medical care benefits, up to a total of 20 million yen over the whole insurance period.
{NOTIFY_PROVISION}
Article 10. (Bone marrow donor benefits) When the insured donates bone marrow through a registered donor program during the insurance period, the Company shall pay the bone marrow donor benefit. Payment of the bone marrow donor benefit shall be made only once during the insurance period.
Article 12. (Breast reconstruction benefits) When the insured undergoes breast reconstruction surgery at a hospital or clinic during the insurance period following surgery for breast cancer, the Company shall pay breast reconstruction benefits for that surgery."""


def womens_insurance_grid() -> TableGrid:
    return TableGrid(
        table_name="Women's Specific Insurance",
        row_labels=[
            "Female Specific Surgery Benefits",
            "Breast Reconstruction Benefits",
        ],
        column_labels=["Details of benefits"],
        cells=[
            ["Surgery involving the breast, uterus"],
            ["Breast reconstruction surgery for the breast"],
        ],
    )


def make_policy_document(doc_id: str = "womens-medical") -> SourceDocument:
    return SourceDocument(
        doc_id=doc_id,
        title="Women's Medical Insurance Rulebook",
        body_text=POLICY_BODY,
        tables=[womens_insurance_grid()],
    )


@pytest.fixture
def policy_doc() -> SourceDocument:
    return make_policy_document()


def make_policy_corpus(max_chars: int = 400, overlap_chars: int = 80) -> Corpus:
    doc = make_policy_document()
    corpus = Corpus()
    corpus.add_document(doc, chunk_document(doc, max_chars=max_chars, overlap_chars=overlap_chars))
    return corpus


@pytest.fixture
def policy_corpus() -> Corpus:
    return make_policy_corpus()


@pytest.fixture
def policy_index(policy_corpus):
    return build_index(policy_corpus.chunks)


# ---------------------------------------------------------------------------
# knowledge-graph fixtures

LIFESTYLE_ABSTRACT = (
    "... lead to heart disease, stroke, obesity, type II diabetes and lung cancer...."
)

DBPEDIA = "http://dbpedia.org/resource/"


def label_fixture_rows() -> list[LabelRow]:
    return [
        LabelRow("lifestyle disease", f"{DBPEDIA}Lifestyle_disease", LIFESTYLE_ABSTRACT),
        LabelRow(
            "Diabetes",
            f"{DBPEDIA}Diabetes",
            "Diabetes mellitus is a chronic condition in which the body cannot "
            "properly regulate blood sugar levels.",
        ),
        LabelRow(
            "Radiation therapy",
            f"{DBPEDIA}Radiation_therapy",
            "Radiation therapy is a cancer treatment that uses ionizing "
            "radiation to destroy malignant cells.",
        ),
        LabelRow(
            "Bone marrow",
            f"{DBPEDIA}Bone_marrow",
            "Bone marrow is the soft tissue inside bones that produces blood cells.",
        ),
        LabelRow(
            "Breast reconstruction",
            f"{DBPEDIA}Breast_reconstruction",
            "Breast reconstruction rebuilds the shape of a breast after a mastectomy.",
        ),
        LabelRow(
            "Insurance",
            f"{DBPEDIA}Insurance",
            "Insurance is a means of protection from financial loss.",
        ),
        # empty abstract on purpose: entities can link yet carry no facts
        LabelRow("Stroke", f"{DBPEDIA}Stroke", ""),
    ]


def write_label_fixture(path, rows: list[LabelRow] | None = None) -> None:
    rows = rows if rows is not None else label_fixture_rows()
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(f"{row.label}\t{row.uri}\t{row.abstract}\n")


@pytest.fixture
def label_index() -> LabelIndex:
    return LabelIndex(label_fixture_rows())


@pytest.fixture
def fact_source(label_index) -> FixtureFactSource:
    return FixtureFactSource(label_index)


@pytest.fixture
def kg_fixture_file(tmp_path):
    path = tmp_path / "labels.tsv"
    write_label_fixture(path)
    return path


# ---------------------------------------------------------------------------
# the assembled engine

@pytest.fixture
def engine(policy_corpus, policy_index, label_index, fact_source) -> QaEngine:
    return QaEngine(
        corpus=policy_corpus,
        index=policy_index,
        label_index=label_index,
        fact_source=fact_source,
        idf=IdfTable.from_texts(c.text for c in policy_corpus.chunks),
    )


# ---------------------------------------------------------------------------
# network guard

@pytest.fixture
def no_network(monkeypatch):
    """Make any socket connection attempt fail the test immediately."""

    def _blocked(self, *args, **kwargs):
        raise AssertionError("network access attempted during an offline test")

    monkeypatch.setattr(socket.socket, "connect", _blocked)
