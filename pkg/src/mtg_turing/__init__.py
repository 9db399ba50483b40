"""A two-player Magic: The Gathering board that computes a universal Turing
machine, with a direct interpreter run in lockstep as the verification oracle."""

from .machine import (
    BLANK,
    SYMBOLS,
    RuleCardSpec,
    TmConfig,
    TmState,
    TmTape,
    load_default_program,
    load_manifest,
    tm_run,
    tm_step,
    validate_program,
)
from .compiler import BoardRecipe, build_initial_state
from .engine import GameEngine, EngineError, ForcedMoveViolation
from .verify import extract_config, lockstep_verify, audit_forced_moves

__version__ = "0.1.0"

__all__ = [
    "BLANK",
    "SYMBOLS",
    "BoardRecipe",
    "EngineError",
    "ForcedMoveViolation",
    "GameEngine",
    "RuleCardSpec",
    "TmConfig",
    "TmState",
    "TmTape",
    "audit_forced_moves",
    "build_initial_state",
    "extract_config",
    "load_default_program",
    "load_manifest",
    "lockstep_verify",
    "tm_run",
    "tm_step",
    "validate_program",
    "__version__",
]
