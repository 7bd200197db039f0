import numpy as np
import pytest

from tvsim.concept_space import build_concept_basis, build_dictionary
from tvsim.datagen import sample_icl_prompt
from tvsim.errors import DegenerateNormError
from tvsim.model import (
    attention_entropy,
    attention_weights,
    cross_entropy,
    forward,
    hidden_state,
    init_params,
    log_softmax,
    predict,
    softmax,
)
from tvsim.types import ICL, ForwardTrace, ModelParams, Sample


def _setup(seed=0):
    basis = build_concept_basis(16, 2, 4, seed=seed)
    dictionary = build_dictionary(basis)
    sample = sample_icl_prompt(basis, J=3, sigma_p=0.01, x_a=0.1, rng=np.random.default_rng(seed))
    return basis, dictionary, sample


def test_softmax_is_shift_invariant_and_stable():
    x = np.array([1000.0, 1001.0, 999.0])
    p = softmax(x)
    assert p.sum() == pytest.approx(1.0)
    assert np.allclose(p, softmax(x - 1000.0))
    assert np.allclose(np.exp(log_softmax(x)), p)


def test_init_params_scales_and_seed():
    params = init_params(6, 0.0, 0.5, seed=3)
    assert not params.W_K.any()
    assert not params.W_Q.any()
    assert params.W_V.std() > 0
    again = init_params(6, 0.0, 0.5, seed=3)
    assert np.array_equal(params.W_V, again.W_V)
    with pytest.raises(ValueError, match="init scales"):
        init_params(6, -1.0, 0.5, seed=0)


def test_zero_key_query_gives_uniform_attention_over_keys_only():
    _, _, sample = _setup()
    d = sample.columns.shape[0]
    params = ModelParams(W_K=np.zeros((d, d)), W_Q=np.zeros((d, d)), W_V=np.eye(d))
    pi = attention_weights(params, sample)
    assert pi.shape == (sample.length - 1,)
    assert np.allclose(pi, 1.0 / (sample.length - 1))
    _, z, h0 = hidden_state(params, sample)
    assert np.allclose(z, sample.keys.mean(axis=1))
    assert np.allclose(h0, z)


def test_forward_adds_query_to_normalized_attention_output():
    _, dictionary, sample = _setup(1)
    params = init_params(16, 0.3, 0.3, seed=1)
    trace = forward(params, sample, dictionary)
    assert trace.h0_norm == pytest.approx(np.linalg.norm(trace.h0))
    assert np.allclose(trace.h, trace.h0 / trace.h0_norm + sample.query)
    assert np.allclose(trace.logits, dictionary.tokens @ trace.h)
    assert trace.omega.sum() == pytest.approx(1.0)
    assert cross_entropy(trace, sample.target_index) >= 0.0
    assert 0 <= predict(trace) < dictionary.size


def test_zero_value_matrix_is_degenerate():
    _, dictionary, sample = _setup()
    d = sample.columns.shape[0]
    params = ModelParams(W_K=np.eye(d), W_Q=np.eye(d), W_V=np.zeros((d, d)))
    with pytest.raises(DegenerateNormError, match="layer norm undefined"):
        forward(params, sample, dictionary)


def test_cross_entropy_rejects_out_of_range_target():
    _, dictionary, sample = _setup()
    trace = forward(init_params(16, 0.1, 0.1, seed=0), sample, dictionary)
    with pytest.raises(ValueError, match="target_index"):
        cross_entropy(trace, dictionary.size)


def test_attention_entropy_bounds():
    assert attention_entropy(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.0)
    assert attention_entropy(np.full(4, 0.25)) == pytest.approx(np.log(4))


def _trace(logits):
    logits = np.asarray(logits, dtype=np.float64)
    zero = np.zeros(2)
    return ForwardTrace(pi=np.ones(1), z=zero, h0=zero, h0_norm=1.0, h=zero, logits=logits, omega=softmax(logits))


def test_cross_entropy_hand_values():
    # 7K+K' tokens for K=2, K'=100
    assert cross_entropy(_trace(np.zeros(114)), 5) == pytest.approx(np.log(114))
    assert cross_entropy(_trace(np.zeros(114)), 5) == pytest.approx(4.7362, abs=1e-4)
    assert cross_entropy(_trace([1.0, 0.0, 0.0]), 0) == pytest.approx(0.5514, abs=1e-4)


def test_predict_takes_lowest_index_on_ties_and_ignores_positive_scale():
    assert predict(_trace(np.full(9, 0.3))) == 0
    logits = np.random.default_rng(3).standard_normal(20)
    first = predict(_trace(logits))
    for c in (1e-3, 0.5, 7.0, 1e4):
        assert predict(_trace(c * logits)) == first


def test_two_keys_with_log_two_logit_gap_split_two_to_one():
    # keys e1 and e2, query (ln 2, 0); identity K and Q turn the query into the logits
    columns = np.array([[1.0, 0.0, np.log(2.0)], [0.0, 1.0, 0.0]])
    sample = Sample(columns=columns, kind=ICL, co_task=0, label_sign=1, target_index=0)
    params = ModelParams(W_K=np.eye(2), W_Q=np.eye(2), W_V=np.eye(2))
    assert np.allclose(attention_weights(params, sample), [2.0 / 3.0, 1.0 / 3.0])
