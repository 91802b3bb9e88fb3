"""Exception hierarchy shared across the package."""


class IntentAmpError(Exception):
    """Base class for all package-specific errors."""


# --- backend errors ---------------------------------------------------------

class UnknownToken(IntentAmpError):
    """A token id (or surface) is not part of the active vocabulary."""


class BackendUnavailable(IntentAmpError):
    """A remote backend could not be reached or the transport failed."""


class QueryTimeout(BackendUnavailable):
    """A remote query exceeded its configured deadline."""


class ProtocolViolation(IntentAmpError):
    """A remote peer sent a malformed frame or a contract-violating reply."""


class ScenarioMiss(IntentAmpError):
    """A scripted backend has no entry for the queried context and no fallback."""


class EmptyCorpus(IntentAmpError):
    """An n-gram backend was asked to train on an empty corpus."""


# --- masking errors ---------------------------------------------------------

class SpanNotFound(IntentAmpError):
    """No intent span matches the requested template pattern."""


class OverlappingSpans(IntentAmpError):
    """Located spans overlap, which the masking contract forbids."""


class InvalidSpan(IntentAmpError):
    """A span is empty, out of bounds, or overlaps another span."""


class UnknownConstraint(IntentAmpError):
    """The requested constraint is not active in the problem instance."""


# --- decoding errors --------------------------------------------------------

class LengthMismatch(IntentAmpError):
    """Two logit vectors that must be the same length are not."""


class AlphaOutOfRange(IntentAmpError):
    """An amplification strength falls outside [0, 1]."""


class EmptyBeam(IntentAmpError):
    """Beam expansion produced no candidates (should be impossible)."""


# --- benchmark generator errors ---------------------------------------------

class InfeasibleSpec(IntentAmpError):
    """No output value can satisfy the sampled constraints on all test inputs."""


class ExhaustedSpace(IntentAmpError):
    """More distinct instances were requested than feasible specs exist."""


# --- evaluator errors -------------------------------------------------------

class LiteralParseError(IntentAmpError):
    """Text is not a literal in the canonical return-value grammar."""


class DatasetMismatch(IntentAmpError):
    """Run records reference a different dataset manifest than the one given."""


class BaselineMissing(IntentAmpError):
    """The designated baseline mode is absent from the reports being compared."""
