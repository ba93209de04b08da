"""Exception types shared across the package."""


class PolicyQaError(Exception):
    """Base class for all package errors."""


# --- corpus ingestion ---

class DimensionMismatch(PolicyQaError):
    """Table cell matrix does not match its row/column label counts."""


class InvalidChunkParams(PolicyQaError):
    """Chunking parameters violate max_chars > overlap_chars >= 0."""


class BundleParseError(PolicyQaError):
    """Document bundle file is malformed."""


class ValidationError(PolicyQaError):
    """A domain object violates one of its invariants."""


# --- retrieval ---

class EmptyText(PolicyQaError):
    """Text has no alphanumeric content to embed."""


class DuplicateChunkId(PolicyQaError):
    """Chunk id already present in the index."""


class EmptyIndex(PolicyQaError):
    """Retrieval attempted against an index with no entries."""


# --- knowledge graph ---

class IndexUnavailable(PolicyQaError):
    """Label index has not been built or cannot be read."""


class EntityNotFound(PolicyQaError):
    """Entity has no record in the fact fixture."""


class EndpointTimeout(PolicyQaError):
    """Knowledge-graph endpoint did not answer in time."""


class MalformedResponse(PolicyQaError):
    """Endpoint answered with a body we cannot interpret."""


# --- prompting ---

class EmptyQuestion(PolicyQaError):
    """Question is empty after stripping."""


class NoContext(PolicyQaError):
    """A context-bearing prompt was requested with no context blocks."""


class BudgetTooSmall(PolicyQaError):
    """Token budget cannot hold even the indicator and question."""


# --- llm gateway ---

class GatewayError(PolicyQaError):
    """Base class for completion-backend failures."""


class RateLimited(GatewayError):
    """Remote backend kept refusing after all retries."""


class AuthFailure(GatewayError):
    """Remote backend rejected the credentials."""


class ReplayMiss(GatewayError):
    """Prompt hash absent from the replay fixture."""


class Timeout(GatewayError):
    """Remote backend did not answer in time."""


class FixtureWriteError(GatewayError):
    """Replay fixture could not be persisted."""


# --- pipeline / evaluation ---

class StageError(PolicyQaError):
    """A pipeline stage failed; carries which stage for error attribution."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class ReviewParseError(PolicyQaError):
    """Review file row is malformed or has an unknown status."""


class UnknownPairId(PolicyQaError):
    """Review row references a pair id that does not exist."""


class EmptySelection(PolicyQaError):
    """Accuracy requested over an empty judgment selection."""


class MissingMode(PolicyQaError):
    """Delta requested for a mode absent from the report."""


class NoFailures(PolicyQaError):
    """Error distribution requested but no incorrect judgments exist."""
