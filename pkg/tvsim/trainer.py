"""
Gradient-descent training loop.

One epoch is one full-batch step (or, in minibatch mode, one pass over a
fresh permutation of the training set in batches of `batch_size`):

    W_V <- W_V - eta * q_V * grad_V
    W_K <- W_K - eta * grad_K
    W_Q <- W_Q - eta * grad_Q

The log records epoch 0, every `log_every` epochs and the last epoch. With
`early_stopping` on, training ends at the first logged epoch where the best
0-1 loss over the configured test distributions is at most `epsilon`.

Every random draw comes from one of five streams spawned from
`SeedSequence(seed)`: basis, init, train data, held-out data, batch order.
"""
# tvsim/trainer.py
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from tqdm import tqdm

from tvsim.concept_space import build_concept_basis, build_dictionary
from tvsim.config import SETTINGS
from tvsim.datagen import sample_dataset
from tvsim.diagnostics.losses import EvalSummary, cosine_summary, evaluate_samples
from tvsim.diagnostics.probes import probe_summary, projection_probe
from tvsim.errors import DegenerateNormError
from tvsim.gradients import batch_grads_and_loss
from tvsim.model import init_params
from tvsim.schema import TrainConfig
from tvsim.train_log import TrainLog, TrainLogRow
from tvsim.types import ConceptBasis, Dictionary, GradTriple, ModelParams, Sample

logger = logging.getLogger(__name__)

CE_INCREASE_TOL = 1e-6
_STREAMS = ("basis", "init", "train", "heldout", "batch")


@dataclass(frozen=True, eq=False)
class TrainingSetup:
    """Everything drawn before the first update."""

    basis: ConceptBasis
    dictionary: Dictionary
    init: ModelParams
    train_samples: list[Sample]
    heldout: dict[str, list[Sample]]
    batch_rng: np.random.Generator
    seeds: dict[str, int] = field(default_factory=dict)


def _stream_seeds(seed: int) -> dict[str, int]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: int(child.generate_state(1, dtype=np.uint64)[0]) for name, child in zip(_STREAMS, children)}


def setup_training(config: TrainConfig) -> TrainingSetup:
    seeds = _stream_seeds(config.seed)
    basis = build_concept_basis(config.d, config.K, config.K_prime, seeds["basis"])
    dictionary = build_dictionary(basis, config.x_a)
    params = init_params(config.d, config.sigma0, config.sigma1, seeds["init"])

    train_rng = np.random.default_rng(seeds["train"])
    train_samples = sample_dataset(
        config.train_dist,
        basis,
        config.N,
        J=config.J,
        M=config.M,
        sigma_p=config.sigma_p,
        x_a=config.x_a,
        rng=train_rng,
    )

    heldout_rng = np.random.default_rng(seeds["heldout"])
    heldout = {
        dist: sample_dataset(
            dist,
            basis,
            config.eval_size,
            J=config.J_star,
            M=config.M,
            sigma_p=config.sigma_p_star,
            x_a=config.x_a,
            rng=heldout_rng,
        )
        for dist in config.test_dists
    }
    logger.info(
        "setup: train_dist=%s N=%d held-out=%s d=%d K=%d K'=%d",
        config.train_dist,
        config.N,
        {k: len(v) for k, v in heldout.items()},
        config.d,
        config.K,
        config.K_prime,
    )
    return TrainingSetup(
        basis=basis,
        dictionary=dictionary,
        init=params,
        train_samples=train_samples,
        heldout=heldout,
        batch_rng=np.random.default_rng(seeds["batch"]),
        seeds=seeds,
    )


def apply_update(params: ModelParams, grads: GradTriple, eta: float, q_V: float) -> ModelParams:
    return ModelParams(
        W_K=params.W_K - eta * grads.g_K,
        W_Q=params.W_Q - eta * grads.g_Q,
        W_V=params.W_V - (eta * q_V) * grads.g_V,
    )


def _log_row(
    epoch: int,
    params: ModelParams,
    config: TrainConfig,
    setup: TrainingSetup,
    threads: int,
) -> tuple[TrainLogRow, dict[str, EvalSummary]]:
    train_eval = evaluate_samples(params, setup.train_samples, setup.dictionary, threads=threads)
    summaries = {
        dist: evaluate_samples(params, samples, setup.dictionary, threads=threads)
        for dist, samples in setup.heldout.items()
    }
    first = config.test_dists[0]
    probes = probe_summary(projection_probe(params, setup.basis), config.K)
    cos = cosine_summary(params, setup.heldout[first][: config.probe_samples], setup.basis, threads=threads)
    row = TrainLogRow(
        epoch=epoch,
        train_ce=train_eval.mean_ce,
        test01={dist: s.zero_one for dist, s in summaries.items()},
        aVa=list(probes["aVa"]),
        bVb=list(probes["bVb"]),
        aKQa=list(probes["aKQa"]),
        bKQb=list(probes["bKQb"]),
        v_cross_max=float(probes["v_cross_max"]),
        kq_cross_max=float(probes["kq_cross_max"]),
        cos_a_star=cos["cos_a_star"],
        cos_b_max=cos["cos_b_max"],
        cos_other_max=cos["cos_other_max"],
        attn_max=summaries[first].attn_max,
        attn_entropy=summaries[first].attn_entropy,
        confidence=summaries[first].confidence,
    )
    return row, summaries


def _epoch_batches(samples: Sequence[Sample], config: TrainConfig, rng: np.random.Generator) -> list[list[Sample]]:
    if config.batch_mode == "full":
        return [list(samples)]
    order = rng.permutation(len(samples))
    size = int(config.batch_size or len(samples))
    return [[samples[i] for i in order[start : start + size]] for start in range(0, len(samples), size)]


def train(
    config: TrainConfig,
    *,
    threads: int = 1,
    progress: bool | None = None,
    log: TrainLog | None = None,
    setup: TrainingSetup | None = None,
) -> tuple[ModelParams, TrainLog]:
    """
    Runs up to `config.T` epochs and returns the final parameters and the log.

    A caller-supplied `log` is filled in place, so rows logged before an
    error survive it. DegenerateNormError is re-raised with the epoch attached.
    """
    setup = setup or setup_training(config)
    log = log if log is not None else TrainLog(K=config.K)
    show = SETTINGS.PROGRESS if progress is None else progress
    params = setup.init

    def record(epoch: int) -> bool:
        try:
            row, summaries = _log_row(epoch, params, config, setup, threads)
        except DegenerateNormError as exc:
            raise exc.with_context(epoch=epoch) from exc
        log.append(row)
        best = min(s.zero_one for s in summaries.values())
        logger.debug("epoch %d: train_ce=%.6f test01=%s", epoch, row.train_ce, row.test01)
        return config.early_stopping and best <= config.epsilon

    log.final_epoch = 0
    if record(0):
        log.stopped_early = True
        logger.info("stopped at epoch 0: test 0-1 loss already <= epsilon=%g", config.epsilon)
        return params, log

    prev_loss: float | None = None
    epochs = tqdm(range(1, config.T + 1), desc=f"train[{config.train_dist}]", disable=not show, leave=False)
    for epoch in epochs:
        try:
            for batch in _epoch_batches(setup.train_samples, config, setup.batch_rng):
                grads, loss = batch_grads_and_loss(params, batch, setup.dictionary, lam=config.lam, threads=threads)
                params = apply_update(params, grads, config.eta, config.q_V)
        except DegenerateNormError as exc:
            raise exc.with_context(epoch=epoch) from exc

        if config.batch_mode == "full":
            # loss was measured before this epoch's step
            if prev_loss is not None and loss > prev_loss + CE_INCREASE_TOL:
                log.ce_increases += 1
                level = logging.WARNING if log.ce_increases == 1 else logging.DEBUG
                logger.log(level, "train CE rose from %.8f to %.8f before epoch %d", prev_loss, loss, epoch)
            prev_loss = loss

        log.final_epoch = epoch
        if epoch % config.log_every == 0 or epoch == config.T:
            if record(epoch):
                log.stopped_early = True
                logger.info("early stop at epoch %d (epsilon=%g)", epoch, config.epsilon)
                break
            epochs.set_postfix(ce=f"{log.rows[-1].train_ce:.4f}")

    if log.ce_increases > 1:
        logger.info("train CE rose on %d of %d full-batch epochs", log.ce_increases, log.final_epoch)
    return params, log


def training_scales(config: TrainConfig) -> dict[str, float | None]:
    """
    Reference magnitudes for a run: the early per-epoch growth of
    a_k^T W_V a_k, and the shortest test prompt length that drives the
    0-1 loss below epsilon.
    """
    denom = config.sigma1 * math.sqrt(config.d) * config.M * config.K
    slope = config.eta * config.q_V / denom if denom > 0 else None
    j_min = None
    if config.epsilon > 0 and config.K >= 2:
        j_min = math.log(1.0 / config.epsilon) / (2.0 * math.log(config.K))
    return {"value_slope": slope, "J_star_min": j_min}
