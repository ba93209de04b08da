"""Retrieval-augmented QA over insurance policy rulebooks.

Questions are answered in one of three modes: model-only, grounded in
retrieved rulebook chunks, or additionally enriched with knowledge-graph
facts about entities mentioned in the question.
"""

from .corpus import Chunk, Corpus, SourceDocument, TableGrid, chunk_document, serialize_table
from .gateway import EchoBackend, ReplayBackend, ReplayFixture, prompt_hash
from .pipeline import AskResult, QaEngine
from .prompts import QaMode, build_agnostic, build_rulebook, build_rulebook_kg

__version__ = "0.1.0"

__all__ = [
    "AskResult",
    "Chunk",
    "Corpus",
    "EchoBackend",
    "QaEngine",
    "QaMode",
    "ReplayBackend",
    "ReplayFixture",
    "SourceDocument",
    "TableGrid",
    "build_agnostic",
    "build_rulebook",
    "build_rulebook_kg",
    "chunk_document",
    "prompt_hash",
    "serialize_table",
    "__version__",
]
