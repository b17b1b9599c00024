"""Embedding-level training harness: synthetic data, trainers and run orchestration."""
from app.services.training.experiment_service import (
    FileSource,
    execute,
    prepare_training_data,
    run_sweep,
)
from app.services.training.synthetic_service import (
    SyntheticSource,
    make_synthetic_embeddings,
    split_dataset,
)
from app.services.training.trainer_service import (
    cosine_lr,
    run_baseline,
    run_experiment,
    run_nlprompt,
)

__all__ = [
    "FileSource",
    "execute",
    "prepare_training_data",
    "run_sweep",
    "SyntheticSource",
    "make_synthetic_embeddings",
    "split_dataset",
    "cosine_lr",
    "run_baseline",
    "run_experiment",
    "run_nlprompt",
]
