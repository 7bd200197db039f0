import numpy as np
import pytest

from tvsim.concept_space import build_concept_basis, build_dictionary
from tvsim.datagen import sample_dataset
from tvsim.gradients import (
    analytic_grads,
    batch_grads,
    batch_grads_and_loss,
    complex_step_grads,
    fd_grads,
    grad_check,
    grad_coefficients,
    residual_direction,
    residual_direction_expanded,
)
from tvsim.model import forward, init_params
from tvsim.types import GradTriple


def _instance(kind, seed):
    basis = build_concept_basis(8, 2, 4, seed=seed)
    dictionary = build_dictionary(basis)
    rng = np.random.default_rng(seed)
    (sample,) = sample_dataset(kind, basis, 1, J=2, M=3, sigma_p=0.05, x_a=0.1, rng=rng)
    params = init_params(8, 0.5, 0.5, seed=seed + 100)
    return params, sample, dictionary


@pytest.mark.parametrize("kind", ["icl", "qa", "qa_icl"])
def test_analytic_gradient_matches_the_complex_step_entrywise(kind):
    for seed in range(3):
        params, sample, dictionary = _instance(kind, seed)
        report = grad_check(params, sample, dictionary)
        assert report["max_rel_error"] <= 1e-6, report


@pytest.mark.parametrize("kind", ["icl", "qa", "qa_icl"])
def test_central_differences_agree_at_two_steps_and_with_the_complex_step(kind):
    params, sample, dictionary = _instance(kind, 1)
    exact = complex_step_grads(params, sample, dictionary).as_dict()
    coarse = fd_grads(params, sample, dictionary, 1e-4).as_dict()
    fine = fd_grads(params, sample, dictionary, 1e-5).as_dict()
    for name in exact:
        assert np.allclose(coarse[name], fine[name], rtol=0.0, atol=1e-7)
        assert np.allclose(fine[name], exact[name], rtol=0.0, atol=1e-9)


def test_strict_check_flags_a_wrong_small_entry(monkeypatch):
    # a 1e-3 relative error on the smallest non-negligible entry must show up
    import tvsim.gradients as gradients_module

    params, sample, dictionary = _instance("icl", 3)
    exact = complex_step_grads(params, sample, dictionary)
    mag = np.abs(exact.g_V)
    idx = np.unravel_index(np.argmin(np.where(mag > 1e-8, mag, np.inf)), mag.shape)
    skewed = np.array(exact.g_V, copy=True)
    skewed[idx] *= 1.001

    monkeypatch.setattr(
        gradients_module,
        "analytic_grads",
        lambda *a, **k: GradTriple(g_K=exact.g_K, g_Q=exact.g_Q, g_V=skewed),
    )
    report = grad_check(params, sample, dictionary)
    assert report["W_V"] == pytest.approx(1e-3, rel=1e-2)
    assert report["W_K"] <= 1e-6


def test_residual_direction_forms_agree():
    params, sample, dictionary = _instance("icl", 7)
    trace = forward(params, sample, dictionary)
    assert np.allclose(
        residual_direction(trace, dictionary, sample.target_index),
        residual_direction_expanded(trace, dictionary, sample.target_index),
    )


def test_batch_gradient_is_mean_of_sample_gradients():
    basis = build_concept_basis(8, 2, 4, seed=1)
    dictionary = build_dictionary(basis)
    samples = sample_dataset("icl", basis, 4, J=2, M=3, sigma_p=0.05, x_a=0.1, rng=np.random.default_rng(1))
    params = init_params(8, 0.5, 0.5, seed=2)

    grads, loss = batch_grads_and_loss(params, samples, dictionary)
    singles = [analytic_grads(params, s, dictionary) for s in samples]
    assert np.allclose(grads.g_V, np.mean([g.g_V for g in singles], axis=0))
    assert np.allclose(grads.g_K, np.mean([g.g_K for g in singles], axis=0))
    assert np.allclose(grads.g_Q, np.mean([g.g_Q for g in singles], axis=0))
    assert loss > 0

    threaded = batch_grads(params, samples, dictionary, threads=3)
    assert np.array_equal(threaded.g_V, grads.g_V)
    assert np.array_equal(threaded.g_K, grads.g_K)


def test_l2_term_adds_scaled_weights():
    params, sample, dictionary = _instance("qa", 2)
    plain = analytic_grads(params, sample, dictionary)
    reg = analytic_grads(params, sample, dictionary, lam=0.1)
    assert np.allclose(reg.g_V - plain.g_V, 0.1 * params.W_V)
    assert np.allclose(reg.g_Q - plain.g_Q, 0.1 * params.W_Q)


def test_value_gradient_is_orthogonal_to_h0_direction():
    params, sample, dictionary = _instance("icl", 4)
    trace = forward(params, sample, dictionary)
    g_V = analytic_grads(params, sample, dictionary).g_V
    # every column of g_V is a multiple of the projected residual
    assert np.allclose(trace.h0 @ g_V, 0.0, atol=1e-12)


def test_coefficients_cover_key_positions():
    params, sample, dictionary = _instance("icl", 5)
    coef = grad_coefficients(params, sample, dictionary)
    assert coef.iota.shape == (sample.length - 1,)
    assert coef.pi.sum() == pytest.approx(1.0)
    assert coef.omega.sum() == pytest.approx(1.0)


def test_invalid_inputs():
    params, sample, dictionary = _instance("icl", 0)
    with pytest.raises(ValueError, match="step must be > 0"):
        fd_grads(params, sample, dictionary, 0.0)
    with pytest.raises(ValueError, match="complex step must be > 0"):
        complex_step_grads(params, sample, dictionary, 0.0)
    with pytest.raises(ValueError, match="oracle must be"):
        grad_check(params, sample, dictionary, oracle="forward")
    with pytest.raises(ValueError, match="non-empty batch"):
        batch_grads(params, [], dictionary)
