"""End-to-end model wiring: molecule preparation, both encoder towers, and
gradient-free pair scoring for retrieval.

Training encodes through the gradient tape (tensor outputs); retrieval uses
the same forward passes without an active tape and scores candidate pairs
with the compiled kernels. The multitoken-motif similarity of a pair always
solves the transport problem between that pair's tokens and motifs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import RunConfig
from .encoders import (EncoderParams, Vocabulary, encode_molecule, encode_text,
                       init_encoder_params, tokenize_text)
from .hetero import HeteroGraph, build_hetero_graph
from .losses import LevelSimilarities
from .motifs import decompose
from .ot import IpotConfig
from .smiles import parse_smiles
from .tensor import Tensor


@dataclass
class TextRep:
    """Evaluation-side text representation (plain arrays)."""

    sentence: np.ndarray      # (d,)
    tokens: np.ndarray        # (N_t, d)


@dataclass
class MolRep:
    """Evaluation-side molecule representation (plain arrays)."""

    molecule: np.ndarray      # (d,)
    atoms: np.ndarray         # (N_a, d)
    motifs: np.ndarray        # (N_m, d)


class OrmaModel:
    """Bundle of config, vocabulary, and encoder parameters."""

    def __init__(self, config: RunConfig, vocab: Vocabulary, enc: EncoderParams,
                 ipot_cfg: IpotConfig | None = None):
        self.config = config
        self.vocab = vocab
        self.enc = enc
        self.ipot_cfg = ipot_cfg or IpotConfig()

    @classmethod
    def from_config(cls, config: RunConfig, vocab: Vocabulary) -> "OrmaModel":
        enc = init_encoder_params(
            vocab_size=len(vocab), d=config.d, f0=config.f0,
            max_text_len=config.max_text_len, seed=config.seed)
        return cls(config, vocab, enc)

    # -- structure preparation ------------------------------------------------

    def prepare_molecule(self, smiles: str) -> HeteroGraph:
        graph = parse_smiles(smiles)
        partition = decompose(graph)
        return build_hetero_graph(graph, partition,
                                  bond_edges=self.config.bond_edges)

    def text_ids(self, text: str) -> np.ndarray:
        return tokenize_text(text, self.vocab,
                             max_text_len=self.config.max_text_len)

    # -- tape-aware forward passes (Tensor outputs) ---------------------------

    def encode_text_ids(self, ids: np.ndarray) -> tuple[Tensor, Tensor]:
        return encode_text(ids, self.enc)

    def encode_hetero(self, hetero: HeteroGraph) -> tuple[Tensor, Tensor, Tensor]:
        return encode_molecule(hetero, self.enc)

    # -- evaluation path (numpy outputs, no tape) ------------------------------

    def text_rep(self, text: str) -> TextRep:
        sentence, tokens = self.encode_text_ids(self.text_ids(text))
        return TextRep(sentence=sentence.data[0].copy(),
                       tokens=np.ascontiguousarray(tokens.data))

    def mol_rep(self, smiles: str) -> MolRep:
        molecule, atoms, motifs = self.encode_hetero(self.prepare_molecule(smiles))
        return MolRep(molecule=molecule.data[0].copy(),
                      atoms=np.ascontiguousarray(atoms.data),
                      motifs=np.ascontiguousarray(motifs.data))

    def pair_similarities(self, text: TextRep, mol: MolRep) -> LevelSimilarities:
        """All three level similarities for one text-molecule pair."""
        s_sm = kernels.vector_cosine(text.sentence, mol.molecule)
        s_ta = float(kernels.fine_similarity_value(text.tokens, mol.atoms))
        cost = 1.0 - kernels.pairwise_cosine(text.tokens, mol.motifs)
        cfg = self.ipot_cfg
        plan, _viol, _it, _hist, _obj = kernels.ipot_solve(
            cost, np.full(cost.shape[0], 1.0 / cost.shape[0]),
            np.full(cost.shape[1], 1.0 / cost.shape[1]),
            cfg.outer, cfg.inner, cfg.prox, cfg.tol)
        assign = kernels.align_from_plan(plan, cost,
                                         self.config.align_mode == "mass")
        fused, _ids = kernels.group_means(text.tokens, assign, cost.shape[1])
        s_mm = float(kernels.fine_similarity_value(fused, mol.motifs))
        return LevelSimilarities(s_ta=s_ta, s_mm=s_mm, s_sm=s_sm)
