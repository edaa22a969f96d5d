from ._prefsig import (
    BackendError,
    ConfigError,
    EvalError,
    Model,
    PersistenceError,
    TrainingError,
    align,
    animals,
    binomial_stderr,
    eval_questions,
    full_run,
    generate_prompts,
    preference_shift,
    pretrain_world,
    read_pairs,
)

__all__ = [
    "BackendError",
    "ConfigError",
    "EvalError",
    "Model",
    "PersistenceError",
    "TrainingError",
    "align",
    "animals",
    "binomial_stderr",
    "eval_questions",
    "full_run",
    "generate_prompts",
    "preference_shift",
    "pretrain_world",
    "read_pairs",
]
