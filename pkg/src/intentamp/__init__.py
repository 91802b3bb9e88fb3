"""Intent-amplified decoding with a multi-strength ensemble, plus a
constraint-compliance benchmark generator and evaluator."""

from . import errors
from .backends import LogitBackend, NgramBackend, ScriptedBackend, ScriptedScenario, train_ngram
from .benchgen import ConstraintSpec, DatasetManifest, ProblemInstance, generate_dataset
from .decoding import (
    AmplificationGrid,
    CandidateToken,
    DecodeConfig,
    Hypothesis,
    amplify,
    decode_beam,
    decode_fixed_alpha,
    decode_greedy,
    decode_intent_coding,
    decode_nucleus,
    ensemble_step,
    extract_intent_delta,
    run_decode,
)
from .evaluate import (
    EvalReport,
    GradeResult,
    ReturnValue,
    check_constraints,
    compare_modes,
    evaluate_run,
    parse_return_value,
)
from .masking import (
    IntentSpan,
    PromptPair,
    build_masked_prompt,
    locate_intent_span,
    mask_single_constraint,
)
from .vocab import Vocabulary, segment

__version__ = "0.1.0"
