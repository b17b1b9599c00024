"""Two-class prompt model: encoder, gradient, decomposition and training dynamics."""
import math

import numpy as np
import pytest

from app.core.errors import (
    DegenerateBasisError,
    EmptyDatasetError,
    InvalidInputError,
    NoiseSpecError,
    RatioDomainError,
)
from app.schemas.theory import FeatureBasis, PromptModel, SyntheticSample, TheoryConfig
from app.services.theory import (
    analytic_gradient,
    batch_loss,
    build_feature_basis,
    coefficient_update,
    decompose_prompt,
    expected_update_ratios,
    expected_updates,
    forward,
    measure_test_loss,
    ratio_table,
    reconstruct_prompt,
    run_theorem_suite,
    sample_dataset,
    setup_run,
    text_encode,
    train_prompt,
)
from app.services.theory.prompt_model import kink_distance

SMALL = TheoryConfig(n=40, n_test=200, m=8, L=3, p_noise=0.2, seed=3)


def _two_dim_model(p):
    basis = FeatureBasis(mu=[1.0, 0.0], xis=np.zeros((0, 2)))
    return PromptModel(basis=basis, p=p, p_plus=[1.0, 0.0], p_minus=[-1.0, 0.0])


def _numeric_gradient(model, batch, kind, h=1e-5):
    grad = np.zeros(model.basis.m)
    for k in range(model.basis.m):
        step = np.zeros(model.basis.m)
        step[k] = h
        grad[k] = (batch_loss(model, batch, kind, model.p + step)
                   - batch_loss(model, batch, kind, model.p - step)) / (2 * h)
    return grad


def test_text_encode_zero_prompt():
    """A zero learnable prompt encodes to zero for both classes."""
    model, _, _ = setup_run(SMALL)
    zero = model.with_prompt(np.zeros(SMALL.m))
    assert np.all(text_encode(zero, 1) == 0)
    assert np.all(text_encode(zero, -1) == 0)


def test_text_encode_zero_class_prompt_is_linear():
    """With W p_c = 0 the encoder returns W p."""
    basis = build_feature_basis(6, 2, np.random.default_rng(0))
    p = np.random.default_rng(1).standard_normal(6)
    model = PromptModel(basis=basis, p=p, p_plus=np.zeros(6), p_minus=np.zeros(6))
    np.testing.assert_allclose(text_encode(model, 1), basis.rows @ p, atol=1e-12)


def test_text_encode_rejects_other_labels():
    """Only +1 and -1 are classes."""
    model, _, _ = setup_run(SMALL)
    with pytest.raises(InvalidInputError):
        text_encode(model, 0)


def test_sample_dataset_without_noise_or_spread():
    """p = 0 keeps labels; sigma_p = 0 leaves only the label coordinate."""
    samples = sample_dataset(50, 0.0, 0.0, 4, seed=2)
    assert all(s.y_tilde == s.y for s in samples)
    assert all(np.array_equal(s.g, [s.y, 0, 0, 0, 0]) for s in samples)


def test_sample_dataset_flip_fraction():
    """About 30% of 20000 observed labels are flipped."""
    samples = sample_dataset(20_000, 0.3, 0.5, 2, seed=8)
    flipped = np.mean([s.y_tilde != s.y for s in samples])
    assert 0.28 <= flipped <= 0.32


def test_sample_dataset_is_deterministic():
    """The same seed gives the same samples."""
    first = sample_dataset(10, 0.2, 0.5, 3, seed=4)
    second = sample_dataset(10, 0.2, 0.5, 3, seed=4)
    assert all(np.array_equal(a.g, b.g) and a.y_tilde == b.y_tilde
               for a, b in zip(first, second))


def test_sample_dataset_rejects_large_noise():
    """p above one half is refused."""
    with pytest.raises(NoiseSpecError):
        sample_dataset(5, 0.6, 0.5, 2, seed=0)


def test_sample_must_carry_its_label():
    """The first feature coordinate is the true label."""
    with pytest.raises(ValueError):
        SyntheticSample(y=1, g=[-1.0, 0.0], y_tilde=1)


def test_forward_zero_prompt_is_uniform():
    """Both similarities vanish at p = 0."""
    model, train, _ = setup_run(SMALL)
    sims, s = forward(model.with_prompt(np.zeros(SMALL.m)), train[0])
    assert sims == (0.0, 0.0)
    np.testing.assert_allclose(s.entries, [0.5, 0.5])


def test_forward_probabilities_sum_to_one():
    """Softmax output stays on the simplex."""
    model, train, _ = setup_run(SMALL)
    for sample in train[:5]:
        _, s = forward(model, sample)
        assert abs(s[0] + s[1] - 1.0) < 1e-12


@pytest.mark.parametrize("kind", ["ce", "mae"])
def test_analytic_gradient_matches_finite_differences(kind):
    """Away from kinks the gradient agrees with central differences."""
    model, train, _ = setup_run(SMALL)
    model = model.with_prompt(0.1 * np.random.default_rng(5).standard_normal(SMALL.m))
    assert kink_distance(model) > 1e-3
    analytic = analytic_gradient(model, train, kind)
    numeric = _numeric_gradient(model, train, kind)
    assert np.linalg.norm(analytic - numeric) <= 1e-5 * np.linalg.norm(numeric)


def test_analytic_gradient_single_sample_by_hand():
    """m = 2, L = 0: the gradient is -2 l' along mu."""
    model = _two_dim_model([0.3, 0.7])
    sample = SyntheticSample(y=1, g=[1.0], y_tilde=1)
    s_minus = 1.0 / (1.0 + math.exp(0.6))
    ce = analytic_gradient(model, [sample], "ce")
    mae = analytic_gradient(model, [sample], "mae")
    np.testing.assert_allclose(ce, [-2.0 * s_minus, 0.0], atol=1e-12)
    np.testing.assert_allclose(mae, [-4.0 * (1 - s_minus) * s_minus, 0.0], atol=1e-12)


def test_mae_gradient_vanishes_on_confident_clean_batch():
    """Saturated correct predictions contribute nothing under MAE."""
    basis = build_feature_basis(4, 1, np.random.default_rng(2))
    mu = basis.mu
    model = PromptModel(basis=basis, p=25 * mu, p_plus=50 * mu, p_minus=-50 * mu)
    batch = [SyntheticSample(y=1, g=[1.0, 0.0], y_tilde=1),
             SyntheticSample(y=-1, g=[-1.0, 0.0], y_tilde=-1)]
    assert np.linalg.norm(analytic_gradient(model, batch, "mae")) < 1e-12


def test_decompose_pure_directions():
    """p = mu gives beta = |mu|^2; p = p0 outside the span gives alpha = 1."""
    basis = build_feature_basis(6, 2, np.random.default_rng(0))
    rows = basis.rows
    p0 = np.random.default_rng(1).standard_normal(6)
    p0 = p0 - rows.T @ (rows @ p0)
    alpha, beta, phi = decompose_prompt(basis.mu, p0, basis)
    assert alpha == pytest.approx(0.0, abs=1e-12)
    assert beta == pytest.approx(1.0)
    assert phi == pytest.approx((0.0, 0.0), abs=1e-12)
    alpha, beta, phi = decompose_prompt(p0, p0, basis)
    assert alpha == pytest.approx(1.0)
    assert beta == pytest.approx(0.0, abs=1e-12)
    assert phi == pytest.approx((0.0, 0.0), abs=1e-12)


def test_decompose_round_trip():
    """Any p in span(basis, p0) is rebuilt exactly."""
    rng = np.random.default_rng(7)
    basis = build_feature_basis(10, 4, rng)
    p0 = rng.standard_normal(10)
    p = 0.7 * p0 + rng.standard_normal(5) @ basis.rows
    alpha, beta, phi = decompose_prompt(p, p0, basis)
    assert alpha == pytest.approx(0.7)
    assert np.linalg.norm(reconstruct_prompt(alpha, beta, phi, p0, basis) - p) <= 1e-10


def test_decompose_degenerate_initialization():
    """An initial prompt inside the basis span cannot anchor alpha."""
    basis = build_feature_basis(5, 2, np.random.default_rng(0))
    with pytest.raises(DegenerateBasisError):
        decompose_prompt(basis.mu, basis.mu + basis.xis[0], basis)


def test_coefficient_update_matches_one_gradient_step():
    """The predicted beta and phi increments equal those of the actual step."""
    model, train, _ = setup_run(SMALL)
    eta = 0.05
    p0 = model.p
    stepped = p0 - eta * analytic_gradient(model, train, "ce")
    _, beta0, phi0 = decompose_prompt(p0, p0, model.basis)
    _, beta1, phi1 = decompose_prompt(stepped, p0, model.basis)
    delta_beta, delta_phi = coefficient_update(model, train, "ce", eta)
    assert beta1 - beta0 == pytest.approx(delta_beta, abs=1e-12)
    np.testing.assert_allclose(np.subtract(phi1, phi0), delta_phi, atol=1e-12)


def test_zero_iterations_keep_initialization():
    """Only the starting record, with alpha = 1."""
    trajectory = train_prompt(SMALL.model_copy(update={"iters": 0}))
    assert len(trajectory.records) == 1
    assert trajectory.final.alpha == pytest.approx(1.0)
    assert trajectory.final.iteration == 0


@pytest.mark.parametrize("kind", ["ce", "mae"])
def test_clean_training_drives_beta_up(kind):
    """Without noise beta never decreases over the first 100 steps."""
    config = TheoryConfig(loss_kind=kind, n=200, n_test=200, p_noise=0.0, iters=100)
    betas = [record.beta for record in train_prompt(config).records]
    assert np.all(np.diff(betas) >= -1e-12)
    assert betas[-1] > betas[0]


def test_flipped_labels_drive_beta_down():
    """With every label flipped beta moves the other way."""
    config = TheoryConfig(n=200, n_test=200, iters=100, flip_all=True)
    betas = [record.beta for record in train_prompt(config).records]
    assert np.all(np.diff(betas) <= 1e-12)
    assert betas[-1] < betas[0]


def test_trajectory_stays_in_span():
    """The decomposition reconstructs every iterate."""
    trajectory = train_prompt(SMALL.model_copy(update={"iters": 30, "eta": 0.05}))
    assert max(record.reconstruction_error for record in trajectory.records) <= 1e-10


def test_test_error_of_untrained_prompt_is_a_coin_flip():
    """p = 0 predicts +1 everywhere, so the error is the share of -1 labels."""
    model, _, test = setup_run(TheoryConfig(n=10, n_test=2000, m=8, L=3))
    error = measure_test_loss(model.with_prompt(np.zeros(8)), test)
    assert 0.45 <= error <= 0.55


def test_test_error_with_dominant_beta():
    """A prompt along mu classifies every sample correctly."""
    model, _, test = setup_run(SMALL)
    assert measure_test_loss(model.with_prompt(0.9 * model.basis.mu), test) == 0.0


def test_test_error_is_invariant_to_duplication():
    """Averaging is unchanged when every sample appears twice."""
    model, _, test = setup_run(SMALL)
    assert measure_test_loss(model, test + test) == measure_test_loss(model, test)


def test_test_error_needs_samples():
    """An empty test set is an error."""
    model, _, _ = setup_run(SMALL)
    with pytest.raises(EmptyDatasetError):
        measure_test_loss(model, [])


def test_ratios_without_noise():
    """At p = 0 both ratios equal 1/(2 E[s_y])."""
    beta_ratio, phi_ratio = expected_update_ratios(0.8, 0.0)
    assert beta_ratio == pytest.approx(0.625)
    assert phi_ratio == pytest.approx(0.625)


def test_ratios_reference_point():
    """E[s_y] = 0.8, p = 0.1."""
    beta_ratio, phi_ratio = expected_update_ratios(0.8, 0.1)
    assert beta_ratio == pytest.approx(0.390625, abs=1e-12)
    assert phi_ratio == pytest.approx(0.4375, abs=1e-12)


def test_beta_ratio_is_the_quotient_of_expected_updates():
    """The closed form equals the CE over MAE beta increments."""
    for mean_s_y, p in [(0.8, 0.1), (0.7, 0.05), (0.95, 0.02)]:
        updates = expected_updates(mean_s_y, p, mu_norm_sq=1.0, sigma_p=0.5, d=10,
                                   eta=0.01)
        beta_ratio, _ = expected_update_ratios(mean_s_y, p)
        assert beta_ratio == pytest.approx(updates["beta_ce"] / updates["beta_mae"])


@pytest.mark.parametrize("mean_s_y,p",
                         [(0.75, 0.25), (0.4, 0.1), (1.0, 0.1), (0.8, 0.5)])
def test_ratios_outside_their_domain(mean_s_y, p):
    """Boundary and out-of-range parameters are rejected."""
    with pytest.raises(RatioDomainError):
        expected_update_ratios(mean_s_y, p)


def test_ratio_table_skips_invalid_cells():
    """Cells with p >= 1 - E[s_y] are left out."""
    cells = ratio_table([0.8], [0.0, 0.1, 0.25])
    assert [cell.p_noise for cell in cells] == [0.0, 0.1]
    assert not cells[0].chain_holds


def test_theorem_suite_small():
    """Outcomes come back in seed order with fractions in [0, 1]."""
    config = TheoryConfig(n=40, n_test=100, m=8, L=3, p_noise=0.3, iters=20)
    summary = run_theorem_suite(config, [2, 0, 1])
    assert [outcome.seed for outcome in summary.outcomes] == [0, 1, 2]
    assert 0.0 <= summary.mae_not_worse_fraction <= 1.0
    assert 0.0 <= summary.mean_ce_error <= 1.0


def test_theorem_suite_needs_seeds():
    """No seeds, no suite."""
    with pytest.raises(InvalidInputError):
        run_theorem_suite(SMALL, [])


def test_theory_config_needs_room_for_initialization():
    """m must leave a direction outside the basis."""
    with pytest.raises(ValueError):
        TheoryConfig(m=4, L=3)
