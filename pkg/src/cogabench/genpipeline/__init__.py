"""Affordance-script generation: prompting, verification, and registry."""

from .client import (
    ChatClient,
    Exchange,
    LiveClient,
    MockClient,
    RecordedClient,
    make_client,
    save_transcript,
)
from .generate import GenerationResult, extract_code, parse_name_list, run_generation
from .grid import overlay_grid
from .pipeline import (
    MAX_ITERATIONS,
    MAX_RUNS,
    Candidate,
    PipelineResult,
    generate_and_verify,
    register_script,
    registered_script,
    select_best,
)
from .templates import extract_templates, load_prompt, parse_bbox
from .verifyloop import (
    CaseResult,
    CritiqueVerdict,
    TestCase,
    VerificationReport,
    load_test_cases,
    make_test_cases,
    parse_verdict,
    verify,
)

__all__ = [
    "ChatClient",
    "Exchange",
    "LiveClient",
    "MockClient",
    "RecordedClient",
    "make_client",
    "save_transcript",
    "GenerationResult",
    "extract_code",
    "parse_name_list",
    "run_generation",
    "overlay_grid",
    "MAX_ITERATIONS",
    "MAX_RUNS",
    "Candidate",
    "PipelineResult",
    "generate_and_verify",
    "register_script",
    "registered_script",
    "select_best",
    "extract_templates",
    "load_prompt",
    "parse_bbox",
    "CaseResult",
    "CritiqueVerdict",
    "TestCase",
    "VerificationReport",
    "load_test_cases",
    "make_test_cases",
    "parse_verdict",
    "verify",
]
