"""Seeded training loop with two Adam groups and best-validation selection.

Each epoch shuffles the training records with a counter-based generator
keyed by (seed, epoch), so the visit order is reproducible regardless of how
batches are consumed. Every batch encodes both modalities on a fresh tape,
solves the per-sample token-motif transport (a constant for the backward
pass), builds the active per-level batch matrices, and applies one Adam step
per parameter group: text-tower parameters use ``lr_text``, everything else
``lr_rest``. The checkpoint with the best validation hits@1 (text to
molecule, test-only pool) is retained.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint, checkpoint_from_model
from .config import RunConfig
from .data import Record
from .encoders import Vocabulary
from .errors import ContractError
from .losses import batch_matrix, contrastive_cce, total_loss
from .model import OrmaModel
from .optim import AdamState, adam_step
from .ot import align_tokens, cost_matrix, fuse_multitokens, ipot
from .retrieval import run_retrieval
from .tensor import Tape, Tensor, backward, matmul

logger = logging.getLogger(__name__)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    val_hits1: float | None


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[EpochStats]
    best_epoch: int
    best_val_hits1: float


def epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    """Counter-based shuffle: an independent Philox stream per (seed, epoch)."""
    bit_gen = np.random.Philox(key=np.array([seed, epoch], dtype=np.uint64))
    return np.random.Generator(bit_gen).permutation(n)


def _batch_loss(model: OrmaModel, batch, config: RunConfig) -> Tensor:
    """Forward pass for one batch; returns the recorded scalar loss."""
    sentences, token_mats = [], []
    molecules, atom_mats, motif_mats = [], [], []
    for ids, hetero in batch:
        sentence, tokens = model.encode_text_ids(ids)
        molecule, atoms, motifs = model.encode_hetero(hetero)
        sentences.append(sentence)
        token_mats.append(tokens)
        molecules.append(molecule)
        atom_mats.append(atoms)
        motif_mats.append(motifs)

    level_inputs = {}
    if "ta" in config.levels:
        level_inputs["ta"] = (token_mats, atom_mats)
    if "mm" in config.levels:
        fused = []
        for tokens, motifs in zip(token_mats, motif_mats):
            cost = cost_matrix(tokens.data, motifs.data)
            plan = ipot(cost, cfg=model.ipot_cfg)
            alignment = align_tokens(plan, cost, mode=config.align_mode)
            averaging = fuse_multitokens(tokens.data, alignment).averaging
            fused.append(matmul(Tensor(averaging), tokens))
        level_inputs["mm"] = (fused, motif_mats)
    if "sm" in config.levels:
        level_inputs["sm"] = (sentences, molecules)

    level_losses = {}
    for level, (text_side, mol_side) in level_inputs.items():
        matrix = batch_matrix(level, text_side, mol_side,
                              temperature=config.temperature,
                              grad_through_norm=config.grad_through_norm)
        level_losses[level] = contrastive_cce(matrix)
    return total_loss(level_losses, config.weights(), config.levels)


def train(config: RunConfig, train_records: list[Record],
          valid_records: list[Record], validate_every: int = 1) -> TrainResult:
    """Train from scratch and return the best-validation checkpoint."""
    config.validate()
    if len(train_records) < 2:
        raise ContractError("training needs at least two records")
    if not valid_records:
        raise ContractError("validation split is empty")

    vocab = Vocabulary.build([rec.description for rec in train_records])
    model = OrmaModel.from_config(config, vocab)

    prepared = [(model.text_ids(rec.description),
                 model.prepare_molecule(rec.smiles))
                for rec in train_records]

    named = model.enc.named()
    name_of = {id(tensor): name for name, tensor in named.items()}
    text_params = {n: t for n, t in named.items() if n.startswith("text.")}
    rest_params = {n: t for n, t in named.items() if not n.startswith("text.")}
    text_state = AdamState(lr=config.lr_text)
    rest_state = AdamState(lr=config.lr_rest)

    history: list[EpochStats] = []
    best_val = -1.0
    best_epoch = 0
    best_ckpt = None
    start = time.time()

    for epoch in range(1, config.epochs + 1):
        order = epoch_permutation(config.seed, epoch, len(prepared))
        batch_losses = []
        for lo in range(0, len(order), config.batch_size):
            chunk = order[lo:lo + config.batch_size]
            if chunk.size < 2:
                continue  # contrastive losses need at least one negative
            batch = [prepared[i] for i in chunk]
            with Tape():
                loss = _batch_loss(model, batch, config)
                grads = backward(loss)
            by_name = {name_of[id(t)]: g for t, g in grads.items()
                       if id(t) in name_of}
            adam_step(text_params, by_name, text_state)
            adam_step(rest_params, by_name, rest_state)
            batch_losses.append(float(loss.data))

        epoch_loss = float(np.mean(batch_losses)) if batch_losses else float("nan")
        val_hits1 = None
        if epoch % validate_every == 0 or epoch == config.epochs:
            report = run_retrieval("t2m", model, valid_records, ks=(1,))
            val_hits1 = report.hits_at[1]
            if val_hits1 > best_val:
                best_val = val_hits1
                best_epoch = epoch
                best_ckpt = checkpoint_from_model(model)
        history.append(EpochStats(epoch=epoch, loss=epoch_loss,
                                  val_hits1=val_hits1))
        logger.info("epoch %d/%d  loss %.6f  val hits@1 %s  (%.1fs)",
                    epoch, config.epochs, epoch_loss,
                    "-" if val_hits1 is None else f"{100 * val_hits1:.1f}%",
                    time.time() - start)

    assert best_ckpt is not None
    return TrainResult(checkpoint=best_ckpt, history=history,
                       best_epoch=best_epoch, best_val_hits1=best_val)
