"""Command-line entry point.

Subcommands: ``parse``, ``decompose``, ``graph``, ``align``, ``train``,
``retrieve``, ``eval``. Machine-readable results go to stdout, logs to
stderr. Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .checkpoint import load_checkpoint, model_from_checkpoint, save_checkpoint
from .config import RunConfig, load_config
from .data import load_dataset
from .encoders import Vocabulary, load_external_embeddings, text_tokens
from .errors import InputError, OrmaError
from .hetero import build_hetero_graph
from .losses import LEVELS
from .model import OrmaModel, TextRep
from .motifs import RULES, decompose, match_rule, motif_signature
from .ot import align_tokens, cost_matrix, fuse_multitokens, ipot
from .retrieval import DIRECTIONS, run_retrieval
from .smiles import parse_smiles
from .train import train

logger = logging.getLogger("orma")


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--beta", type=float)
    sub.add_argument("--temperature", type=float)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    sub.add_argument("--lr-text", type=float, dest="lr_text")
    sub.add_argument("--lr-rest", type=float, dest="lr_rest")
    sub.add_argument("--d", type=int)
    sub.add_argument("--f0", type=int)
    sub.add_argument("--max-text-len", type=int, dest="max_text_len")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--bond-edges", action=argparse.BooleanOptionalAction,
                     dest="bond_edges", default=None)
    sub.add_argument("--align-mode", choices=("mass", "paper-form"),
                     dest="align_mode")
    sub.add_argument("--levels", help=f"comma list from {','.join(LEVELS)}")
    sub.add_argument("--pool", choices=("test", "full"))
    sub.add_argument("--grad-through-norm", action=argparse.BooleanOptionalAction,
                     dest="grad_through_norm", default=None)


_CONFIG_KEYS = ("alpha", "beta", "temperature", "epochs", "batch_size",
                "lr_text", "lr_rest", "d", "f0", "max_text_len", "seed",
                "bond_edges", "align_mode", "levels", "pool",
                "grad_through_norm")


def _config_from_args(args) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in _CONFIG_KEYS}
    if overrides.get("levels") is not None:
        overrides["levels"] = tuple(
            part.strip() for part in overrides["levels"].split(",") if part.strip())
    return load_config(getattr(args, "config", None), overrides)


def build_parser() -> _Parser:
    parser = _Parser(prog="orma",
                     description="cross-modal text-molecule retrieval toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("parse", parents=[], help="parse a SMILES string")
    p.add_argument("smiles")
    p.add_argument("--allow-fragments", action="store_true")
    p.add_argument("--strict-valence", action="store_true")

    p = subs.add_parser("decompose", help="partition a molecule into motifs")
    p.add_argument("smiles", nargs="?")
    p.add_argument("--rules", action="store_true",
                   help="print the cleavage rule table and exit")

    p = subs.add_parser("graph", help="print the heterogeneous graph")
    p.add_argument("smiles")
    p.add_argument("--bond-edges", action="store_true")

    p = subs.add_parser("align", help="align text tokens to molecule motifs")
    p.add_argument("text")
    p.add_argument("smiles")
    p.add_argument("--checkpoint", help="score with a trained model")
    _add_config_flags(p)

    p = subs.add_parser("train", help="train a model")
    p.add_argument("--train", required=True, dest="train_file")
    p.add_argument("--valid", required=True, dest="valid_file")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--validate-every", type=int, default=1)
    _add_config_flags(p)

    for name in ("retrieve", "eval"):
        p = subs.add_parser(name, help="rank candidates and report metrics")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--queries", required=True)
        p.add_argument("--corpus", help="extra records forming the full pool")
        if name == "retrieve":
            p.add_argument("--direction", choices=DIRECTIONS, default="t2m")
        p.add_argument("--pool", choices=("test", "full"))
        p.add_argument("--k", default="1,5,10",
                       help="comma-separated cutoffs (default 1,5,10)")
        p.add_argument("--tsv", action="store_true",
                       help="append machine-readable metric lines")
        p.add_argument("--text-embeddings",
                       help="embedding exchange file overriding the text tower")
    return parser


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_parse(args) -> int:
    graph = parse_smiles(args.smiles, allow_fragments=args.allow_fragments,
                         strict_valence=args.strict_valence)
    print(f"atoms ({graph.n_atoms}):")
    for atom in graph.atoms:
        print(f"  {atom.index:>3}  {atom.element:<2}  charge={atom.charge:+d}  "
              f"aromatic={'yes' if atom.aromatic else 'no':<3}  "
              f"ring={'yes' if atom.in_ring else 'no':<3}  degree={atom.degree}")
    print(f"bonds ({len(graph.bonds)}):")
    for i, bond in enumerate(graph.bonds):
        print(f"  {i:>3}  {bond.a}-{bond.b}  {bond.order:<8}  "
              f"ring={'yes' if bond.in_ring else 'no'}")
    print(f"rings ({len(graph.rings)}):")
    for ring in graph.rings:
        print(f"  {'-'.join(str(a) for a in ring)}")
    return 0


def _cmd_decompose(args) -> int:
    if args.rules:
        print("cleavage rules (acyclic, single-order, non-aromatic bonds):")
        for name, text in RULES:
            print(f"  {name}: {text}")
        return 0
    if not args.smiles:
        raise InputError("decompose needs a SMILES argument (or --rules)")
    graph = parse_smiles(args.smiles)
    part = decompose(graph)
    print(f"motifs ({part.n_motifs}):")
    for idx, motif in enumerate(part.motifs):
        atoms = ",".join(str(a) for a in sorted(motif))
        print(f"  {idx:>3}  atoms=[{atoms}]  "
              f"signature={motif_signature(graph, motif)}")
    print(f"cleaved bonds ({len(part.cleaved_bonds)}):")
    for bond_id in part.cleaved_bonds:
        bond = graph.bonds[bond_id]
        print(f"  {bond_id:>3}  {bond.a}-{bond.b}  "
              f"rule={match_rule(graph, bond_id)}")
    return 0


def _cmd_graph(args) -> int:
    graph = parse_smiles(args.smiles)
    hetero = build_hetero_graph(graph, decompose(graph),
                                bond_edges=args.bond_edges)
    print(f"nodes ({hetero.n_nodes}): {hetero.n_atoms} atoms, "
          f"{hetero.n_motifs} motifs, 1 molecule")
    for idx, kind in enumerate(hetero.node_kind):
        label = hetero.atom_elements[idx] if kind == "atom" else ""
        print(f"  {idx:>3}  {kind:<8} {label}")
    print(f"edges ({len(hetero.edges)}):")
    for a, b, kind in hetero.edges:
        print(f"  {a:>3} - {b:<3}  {kind}")
    return 0


def _cmd_align(args) -> int:
    if args.checkpoint:
        model = model_from_checkpoint(load_checkpoint(args.checkpoint))
    else:
        config = _config_from_args(args)
        vocab = Vocabulary.build([args.text])
        model = OrmaModel.from_config(config, vocab)
    text = model.text_rep(args.text)
    mol = model.mol_rep(args.smiles)
    words = text_tokens(args.text)[:model.config.max_text_len - 1]
    cost = cost_matrix(text.tokens, mol.motifs)
    plan = ipot(cost, cfg=model.ipot_cfg)
    alignment = align_tokens(plan, cost, mode=model.config.align_mode)
    fused = fuse_multitokens(text.tokens, alignment)

    print(f"transport plan ({plan.matrix.shape[0]} tokens x "
          f"{plan.matrix.shape[1]} motifs, violation "
          f"{plan.marginal_violation:.2e}):")
    for i, row in enumerate(plan.matrix):
        cells = " ".join(f"{v:.4f}" for v in row)
        print(f"  {words[i]:>15}  {cells}")
    print("alignment:")
    for i, motif_idx in enumerate(alignment.target_of):
        print(f"  token {i} ({words[i]}) -> motif {motif_idx}")
    print("groups:")
    for row, motif_idx in enumerate(fused.motif_index):
        members = ", ".join(words[t] for t in alignment.groups[motif_idx])
        print(f"  motif {motif_idx}: {members}")
    return 0


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    train_load = load_dataset(args.train_file)
    valid_load = load_dataset(args.valid_file)
    logger.info("train records: %d used, %d skipped; valid: %d used, %d skipped",
                len(train_load.records), train_load.n_skipped,
                len(valid_load.records), valid_load.n_skipped)
    result = train(config, train_load.records, valid_load.records,
                   validate_every=args.validate_every)
    save_checkpoint(args.out, result.checkpoint)
    print(f"records_used\t{len(train_load.records)}")
    print(f"records_skipped\t{train_load.n_skipped}")
    print(f"best_epoch\t{result.best_epoch}")
    print(f"best_val_hits1\t{result.best_val_hits1}")
    print(f"checkpoint\t{args.out}")
    return 0


def _parse_ks(raw: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise InputError(f"bad --k list: {raw!r}") from exc
    if not ks or any(k < 1 for k in ks):
        raise InputError(f"bad --k list: {raw!r}")
    return ks


def _load_text_overrides(path: str | None, model) -> dict[str, TextRep] | None:
    if not path:
        return None
    ids, reps = load_external_embeddings(path, expect_width=model.config.d)
    return {rec_id: TextRep(sentence=reps.sentence[i], tokens=reps.tokens[i])
            for i, rec_id in enumerate(ids)}


def _run_directions(args, directions) -> int:
    model = model_from_checkpoint(load_checkpoint(args.checkpoint))
    queries = load_dataset(args.queries).records
    pool_mode = args.pool or model.config.pool
    pool = None
    if pool_mode == "full":
        if not args.corpus:
            raise InputError("--pool full needs --corpus")
        pool = load_dataset(args.corpus).records
        have = {rec.id for rec in pool}
        pool = pool + [rec for rec in queries if rec.id not in have]
    ks = _parse_ks(args.k)
    overrides = _load_text_overrides(args.text_embeddings, model)
    for direction in directions:
        report = run_retrieval(direction, model, queries, pool=pool, ks=ks,
                               text_overrides=overrides)
        print(f"[{direction}] pool={pool_mode} "
              f"candidates={len(pool) if pool else len(queries)}")
        for line in report.lines():
            print(f"  {line}")
        if args.tsv:
            for line in report.tsv_lines():
                print(f"{direction}\t{line}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "parse":
            return _cmd_parse(args)
        if args.command == "decompose":
            return _cmd_decompose(args)
        if args.command == "graph":
            return _cmd_graph(args)
        if args.command == "align":
            return _cmd_align(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "retrieve":
            return _run_directions(args, (args.direction,))
        if args.command == "eval":
            return _run_directions(args, DIRECTIONS)
        raise InputError(f"unknown command {args.command!r}")
    except SystemExit:
        raise
    except InputError as exc:
        logger.error("%s", exc)
        return 1
    except OrmaError as exc:
        logger.error("internal error: %s", exc)
        return 2
    except Exception as exc:  # pragma: no cover - safety net
        logger.exception("unexpected error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
