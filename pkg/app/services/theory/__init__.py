"""Synthetic prompt-learning model, its training dynamics and the CE/MAE suite."""
from app.services.theory.dynamics_service import (
    coefficient_update,
    decompose_prompt,
    expected_update_ratios,
    expected_updates,
    measure_test_loss,
    reconstruct_prompt,
    sample_dataset,
    setup_run,
    train_prompt,
)
from app.services.theory.prompt_model import (
    analytic_gradient,
    batch_loss,
    build_feature_basis,
    build_prompt_model,
    forward,
    sigma_prime,
    text_encode,
)
from app.services.theory.suite_service import ratio_table, run_theorem_suite

__all__ = [
    "coefficient_update",
    "decompose_prompt",
    "expected_update_ratios",
    "expected_updates",
    "measure_test_loss",
    "reconstruct_prompt",
    "sample_dataset",
    "setup_run",
    "train_prompt",
    "analytic_gradient",
    "batch_loss",
    "build_feature_basis",
    "build_prompt_model",
    "forward",
    "sigma_prime",
    "text_encode",
    "ratio_table",
    "run_theorem_suite",
]
