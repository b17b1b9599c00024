import math

import numpy as np
import pytest

from app.core.errors import InfiniteLossError, InvalidInputError, LengthMismatchError
from app.schemas.losses import LossKind, LossReport, ProbVector
from app.services.loss_service import (
    batch_losses,
    ce_loss,
    gce_loss,
    gradient_coefficient,
    harmonized_loss,
    logit_gradient,
    loss_derivative,
    mae_loss,
    softmax,
    softmax_rows,
)

S_Y_POINTS = [0.1, 0.3, 0.5, 0.7, 0.9]


def _binary(s_y):
    return ProbVector(entries=[s_y, 1.0 - s_y])


def test_softmax_equal_logits_uniform():
    """Equal logits give the uniform vector."""
    assert np.allclose(softmax([2.0, 2.0, 2.0, 2.0]).entries, 0.25)


def test_softmax_extreme_logit():
    """A very negative logit gets almost no mass."""
    s = softmax([0.0, -1e9])
    assert s[0] == pytest.approx(1.0)
    assert s[1] == pytest.approx(0.0, abs=1e-12)


def test_softmax_shift_invariance():
    """Adding a constant to all logits changes nothing."""
    x = np.array([0.3, -1.2, 4.0, 0.0])
    assert np.allclose(softmax(x).entries, softmax(x + 7).entries, atol=1e-12, rtol=0)


def test_softmax_rejects_nonfinite():
    """Infinite logits are refused."""
    with pytest.raises(InvalidInputError):
        softmax([0.0, np.inf])


def test_prob_vector_must_sum_to_one():
    """Entries off the simplex fail validation."""
    with pytest.raises(ValueError):
        ProbVector(entries=[0.5, 0.6])


def test_ce_loss_values():
    """One-hot gives 0, uniform gives log C."""
    assert ce_loss(ProbVector(entries=[0.0, 1.0, 0.0]), 1) == 0.0
    assert ce_loss(ProbVector(entries=[0.25] * 4), 2) == pytest.approx(math.log(4))
    assert ce_loss(ProbVector(entries=[0.25, 0.75]), 0) == pytest.approx(1.3862943611)


def test_ce_loss_infinite():
    """A zero target probability is an explicit error unless clamped."""
    s = ProbVector(entries=[1.0, 0.0])
    with pytest.raises(InfiniteLossError):
        ce_loss(s, 1)
    assert ce_loss(s, 1, clamp=True) == pytest.approx(-math.log(1e-12))


def test_mae_loss_simplex_identity():
    """MAE equals 2(1 - s_y) on the simplex."""
    rng = np.random.default_rng(5)
    for _ in range(20):
        s = ProbVector(entries=rng.dirichlet(np.ones(6)))
        y = int(rng.integers(6))
        assert abs(mae_loss(s, y) - 2 * (1 - s[y])) < 1e-12
    assert mae_loss(ProbVector(entries=[0.2] * 5), 0) == pytest.approx(2 * (1 - 1 / 5))


def test_gce_loss_values():
    """GCE at q = 1 is 1 - s_y; at q = 0.7 the standard form."""
    assert gce_loss(_binary(0.3), 0, q=1.0) == pytest.approx(0.7)
    expected = (1 - 0.5**0.7) / 0.7
    assert gce_loss(_binary(0.5), 0, q=0.7) == pytest.approx(expected, abs=1e-12)
    assert gce_loss(ProbVector(entries=[1.0, 0.0]), 0, q=0.4) == 0.0


def test_gce_rejects_bad_exponent():
    """q must lie in (0, 1]."""
    with pytest.raises(InvalidInputError):
        gce_loss(_binary(0.5), 0, q=0.0)


def test_harmonized_degenerate_masks():
    """All clean is summed CE, all noisy is summed MAE."""
    probs = np.array([[0.7, 0.2, 0.1], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]])
    targets = np.array([0, 2, 1])
    clean = harmonized_loss(probs, targets, np.ones(3, dtype=bool))
    noisy = harmonized_loss(probs, targets, np.zeros(3, dtype=bool))
    assert clean.total == pytest.approx(batch_losses(probs, targets, LossKind.CE).sum())
    mae = batch_losses(probs, targets, LossKind.MAE)
    assert noisy.total == pytest.approx(mae.sum())
    assert clean.kind is LossKind.HARMONIZED


def test_harmonized_mixed_batch():
    """One clean and one noisy sample add up."""
    probs = [ProbVector(entries=[0.8, 0.2]), ProbVector(entries=[0.4, 0.6])]
    report = harmonized_loss(probs, [0, 0], [True, False])
    expected = ce_loss(probs[0], 0) + mae_loss(probs[1], 0)
    assert report.total == pytest.approx(expected, abs=1e-12)
    assert report.per_sample.tolist() == pytest.approx([-math.log(0.8), 1.2])


def test_harmonized_permutation_equivariant():
    """Permuting the batch permutes the per-sample losses."""
    rng = np.random.default_rng(2)
    probs = rng.dirichlet(np.ones(4), size=8)
    targets = rng.integers(4, size=8)
    mask = rng.random(8) < 0.5
    order = rng.permutation(8)
    base = harmonized_loss(probs, targets, mask)
    permuted = harmonized_loss(probs[order], targets[order], mask[order])
    assert np.allclose(permuted.per_sample, base.per_sample[order])
    assert permuted.total == pytest.approx(base.total)


def test_harmonized_length_mismatch():
    """Mask and targets must match the batch."""
    with pytest.raises(LengthMismatchError):
        harmonized_loss(np.full((2, 2), 0.5), [0, 1], [True])


def test_loss_report_total_checked():
    """A report whose total disagrees with its parts is invalid."""
    with pytest.raises(ValueError):
        LossReport(total=1.0, per_sample=[0.2, 0.2], kind=LossKind.CE)


def test_gradient_coefficients():
    """Direct values of the binary coefficients."""
    assert gradient_coefficient(0.5, "ce") == pytest.approx(0.5)
    assert gradient_coefficient(0.5, "mae") == pytest.approx(0.5)
    assert gradient_coefficient(0.1, "ce") == pytest.approx(0.9)
    assert gradient_coefficient(0.1, "mae") == pytest.approx(0.18)


def test_gradient_coefficient_limits():
    """Near s_y = 0 CE stays near 1 while MAE vanishes; MAE never exceeds one half."""
    assert gradient_coefficient(1e-6, LossKind.CE) == pytest.approx(1.0, abs=1e-5)
    assert gradient_coefficient(1e-6, LossKind.MAE) < 1e-5
    grid = np.linspace(0.01, 0.99, 99)
    assert np.max(gradient_coefficient(grid, LossKind.MAE)) <= 0.5 + 1e-12


@pytest.mark.parametrize("s_y", [0.0, 1.0, -0.2])
def test_gradient_coefficient_domain(s_y):
    """s_y must be strictly inside (0, 1)."""
    with pytest.raises(InvalidInputError):
        gradient_coefficient(s_y, LossKind.CE)


@pytest.mark.parametrize("kind", [LossKind.CE, LossKind.MAE, LossKind.GCE])
def test_loss_derivative_matches_central_difference(kind):
    """Closed-form d loss / d s_y agrees with finite differences."""
    h = 1e-6
    for s_y in S_Y_POINTS:
        plus = batch_losses(np.array([[s_y + h, 1 - s_y - h]]), [0], kind)[0]
        minus = batch_losses(np.array([[s_y - h, 1 - s_y + h]]), [0], kind)[0]
        numeric = (plus - minus) / (2 * h)
        assert loss_derivative(s_y, kind) == pytest.approx(numeric, abs=1e-6)


def test_losses_non_increasing_in_target_probability():
    """Raising s_y never raises CE or MAE."""
    grid = np.linspace(0.05, 0.95, 19)
    probs = np.column_stack([grid, 1 - grid])
    targets = np.zeros(grid.size, dtype=int)
    for kind in (LossKind.CE, LossKind.MAE):
        assert np.all(np.diff(batch_losses(probs, targets, kind)) <= 0)


@pytest.mark.parametrize("kind", [LossKind.CE, LossKind.MAE, LossKind.GCE])
def test_logit_gradient_matches_finite_difference(kind):
    """The analytic logit gradient agrees with differences of the loss."""
    logits = np.array([[0.4, -0.3, 1.1], [2.0, 0.1, -0.5]])
    targets = np.array([2, 1])
    analytic = logit_gradient(softmax_rows(logits), targets, kind)
    h = 1e-6
    numeric = np.zeros_like(logits)
    for i in range(logits.shape[0]):
        for c in range(logits.shape[1]):
            up, down = logits.copy(), logits.copy()
            up[i, c] += h
            down[i, c] -= h
            upper = batch_losses(softmax_rows(up), targets, kind)[i]
            lower = batch_losses(softmax_rows(down), targets, kind)[i]
            numeric[i, c] = (upper - lower) / (2 * h)
    assert np.allclose(analytic, numeric, atol=1e-6)


def test_batch_losses_refuses_harmonized():
    """The harmonized loss needs a mask."""
    with pytest.raises(InvalidInputError):
        batch_losses(np.full((1, 2), 0.5), [0], LossKind.HARMONIZED)
