"""Dataset ingestion and synthetic corpora.

The on-disk format is UTF-8 text with one record per line, three
tab-separated fields ``id <TAB> smiles <TAB> description``; lines starting
with ``#`` are headers/comments. Records whose SMILES does not parse are
skipped and counted rather than failing the load; structurally malformed
lines fail with their line number.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import DatasetError, InputError, ParseError
from .smiles import parse_smiles

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Record:
    id: str
    smiles: str
    description: str


@dataclass
class DatasetLoad:
    """Load outcome with skip accounting: every input record is either used
    or listed in ``skipped``."""

    records: list[Record]
    skipped: list[tuple[int, str, str]] = field(default_factory=list)

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)


def parse_records(text: str, source: str = "<dataset>") -> DatasetLoad:
    records: list[Record] = []
    skipped: list[tuple[int, str, str]] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise DatasetError(
                f"{source}:{lineno}: expected 3 tab-separated fields, "
                f"got {len(parts)}")
        rec_id, smiles, description = (p.strip() for p in parts)
        if not rec_id or not smiles or not description:
            raise DatasetError(f"{source}:{lineno}: empty field")
        if rec_id in seen_ids:
            raise DatasetError(f"{source}:{lineno}: duplicate id {rec_id!r}")
        seen_ids.add(rec_id)
        try:
            parse_smiles(smiles)
        except (ParseError, InputError) as exc:
            skipped.append((lineno, rec_id, str(exc)))
            continue
        records.append(Record(id=rec_id, smiles=smiles, description=description))
    if not records:
        raise DatasetError(f"{source}: no usable records")
    return DatasetLoad(records=records, skipped=skipped)


def load_dataset(path: str) -> DatasetLoad:
    """Read a dataset file, skipping unparseable-SMILES records with a log."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    load = parse_records(text, source=path)
    if load.skipped:
        logger.warning("%s: skipped %d record(s) with unparseable SMILES",
                       path, load.n_skipped)
    return load


def write_dataset(path: str, records: list[Record]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# id\tsmiles\tdescription\n")
        for rec in records:
            fh.write(f"{rec.id}\t{rec.smiles}\t{rec.description}\n")


# ---------------------------------------------------------------------------
# synthetic planted-correspondence corpus

_BACKBONES = (
    ("C", "methane-like core"),
    ("CC", "ethane chain"),
    ("CCC", "propane chain"),
    ("CCCC", "butane chain"),
    ("CCCCC", "pentane chain"),
    ("CC(C)C", "branched isobutane frame"),
    ("C=C", "ethylene unit"),
    ("C#C", "alkyne rod"),
    ("c1ccccc1", "benzene ring"),
    ("C1CC1", "cyclopropane ring"),
    ("C1CCC1", "cyclobutane ring"),
    ("C1CCCC1", "cyclopentane ring"),
    ("C1CCCCC1", "cyclohexane ring"),
    ("c1ccncc1", "pyridine ring"),
)

_DECORATIONS = (
    ("O", "hydroxyl oxygen"),
    ("N", "amine nitrogen"),
    ("C(=O)O", "carboxylic acid group"),
    ("C(=O)N", "amide group"),
    ("S", "thiol sulfur"),
    ("Cl", "chloro substituent"),
    ("Br", "bromo substituent"),
    ("F", "fluoro substituent"),
    ("OC", "methoxy group"),
    ("C#N", "nitrile group"),
)

_MARKERS = (
    "alpha", "bravo", "carbon", "delta", "echo", "foxtrot", "golf", "hotel",
    "india", "juliet", "kilo", "lima", "mike", "november", "oscar", "papa",
    "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey",
    "xray", "yankee", "zulu",
)


def planted_records(n: int) -> list[Record]:
    """Deterministic list of distinct text-molecule pairs.

    Each record pairs a unique small molecule with a description carrying a
    unique marker word plus structure-derived phrasing, so a trained model
    has both coarse and fine signals to exploit.
    """
    pairs = []
    seen = set()
    for backbone, backbone_name in _BACKBONES:
        for decoration, decoration_name in _DECORATIONS:
            smiles = backbone + decoration
            if smiles in seen:
                continue
            try:
                parse_smiles(smiles)
            except (ParseError, InputError):
                continue
            seen.add(smiles)
            pairs.append((smiles, backbone_name, decoration_name))
    if n > len(pairs):
        raise DatasetError(
            f"planted corpus supports at most {len(pairs)} records, asked {n}")
    records = []
    for i, (smiles, backbone_name, decoration_name) in enumerate(pairs[:n]):
        marker = _MARKERS[i % len(_MARKERS)]
        suffix = i // len(_MARKERS)
        tag = f"{marker}{suffix}" if suffix else marker
        description = (f"specimen {tag} built on a {backbone_name} "
                       f"bearing a {decoration_name}")
        records.append(Record(id=f"m{i:03d}", smiles=smiles,
                              description=description))
    return records
