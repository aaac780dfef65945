import pytest

from orma.errors import ContractError
from orma.motifs import (MotifPartition, cleavable_bonds, decompose,
                         match_rule, motif_signature)
from orma.smiles import MolGraph, parse_smiles
from util import smiles_corpus


def bond_key(graph, bond_id):
    bond = graph.bonds[bond_id]
    return frozenset((bond.a, bond.b))


class TestCleavableBonds:
    def test_ethanol_heteroatom_rule(self):
        g = parse_smiles("CCO")
        hits = cleavable_bonds(g)
        assert [bond_key(g, i) for i in hits] == [frozenset((1, 2))]
        assert match_rule(g, hits[0]) == "R3"

    def test_benzene_has_none(self):
        assert cleavable_bonds(parse_smiles("c1ccccc1")) == []

    def test_toluene_ring_attachment(self):
        g = parse_smiles("Cc1ccccc1")
        hits = cleavable_bonds(g)
        assert [bond_key(g, i) for i in hits] == [frozenset((0, 1))]
        assert match_rule(g, hits[0]) == "R1"

    def test_carbonyl_heteroatom_rule(self):
        g = parse_smiles("CC(=O)N")  # acetamide: C(=O)-N matches R2
        hits = {bond_key(g, i): match_rule(g, i) for i in cleavable_bonds(g)}
        assert hits[frozenset((1, 3))] == "R2"

    def test_ring_linker_rule(self):
        g = parse_smiles("c1ccccc1-c1ccccc1")
        hits = {bond_key(g, i): match_rule(g, i) for i in cleavable_bonds(g)}
        assert hits == {frozenset((5, 6)): "R4"}

    def test_double_and_aromatic_bonds_never_cleaved(self):
        g = parse_smiles("C=CC#N")
        for bond_id in cleavable_bonds(g):
            assert g.bonds[bond_id].order == "single"


class TestDecompose:
    def test_benzene_single_motif(self):
        part = decompose(parse_smiles("c1ccccc1"))
        assert part.n_motifs == 1
        assert part.motifs[0] == frozenset(range(6))

    def test_ethanol_two_motifs(self):
        part = decompose(parse_smiles("CCO"))
        assert sorted(sorted(m) for m in part.motifs) == [[0, 1], [2]]

    def test_single_atom(self):
        part = decompose(parse_smiles("C"))
        assert part.n_motifs == 1 and part.motifs[0] == frozenset({0})

    def test_exact_partition_on_corpus(self):
        for smiles in smiles_corpus(200):
            g = parse_smiles(smiles)
            part = decompose(g)
            assert sum(len(m) for m in part.motifs) == g.n_atoms, smiles
            assert set(part.motif_of) == set(range(g.n_atoms)), smiles
            for atom, motif_idx in part.motif_of.items():
                assert atom in part.motifs[motif_idx]

    def test_rings_never_split(self):
        for smiles in smiles_corpus(200):
            g = parse_smiles(smiles)
            part = decompose(g)
            for ring in g.rings:
                motifs = {part.motif_of[a] for a in ring}
                assert len(motifs) == 1, smiles

    def test_motifs_connected(self):
        for smiles in smiles_corpus(200):
            g = parse_smiles(smiles)
            part = decompose(g)
            for motif in part.motifs:
                seen = set()
                stack = [next(iter(motif))]
                while stack:
                    u = stack.pop()
                    if u in seen:
                        continue
                    seen.add(u)
                    stack.extend(v for v, _ in g.neighbors(u)
                                 if v in motif and v not in seen)
                assert seen == set(motif), smiles

    def test_no_cleaved_bond_is_a_ring_bond(self):
        for smiles in smiles_corpus(200):
            g = parse_smiles(smiles)
            for bond_id in decompose(g).cleaved_bonds:
                assert not g.bonds[bond_id].in_ring

    def test_idempotent_on_induced_subgraphs(self):
        for smiles in ("CCO", "CC(=O)NCCc1ccccc1", "Cc1ccc(O)cc1",
                       "c1ccccc1-c1ccccc1", "CCOC(=O)C"):
            g = parse_smiles(smiles)
            part = decompose(g)
            for motif in part.motifs:
                sub = _induced_subgraph(g, sorted(motif))
                assert decompose(sub).n_motifs == 1, (smiles, sorted(motif))

    def test_deterministic(self):
        for smiles in ("CC(=O)NCCc1ccccc1", "CCOC(=O)C"):
            first = decompose(parse_smiles(smiles))
            second = decompose(parse_smiles(smiles))
            assert first.motifs == second.motifs
            assert first.cleaved_bonds == second.cleaved_bonds


def _induced_subgraph(g, atoms):
    from orma.smiles import Atom, Bond

    remap = {a: i for i, a in enumerate(atoms)}
    sub_atoms = []
    for a in atoms:
        src = g.atoms[a]
        sub_atoms.append(Atom(index=remap[a], element=src.element,
                              aromatic=src.aromatic, charge=src.charge,
                              in_ring=src.in_ring))
    sub_bonds = [Bond(a=remap[b.a], b=remap[b.b], order=b.order,
                      in_ring=b.in_ring)
                 for b in g.bonds if b.a in remap and b.b in remap]
    sub = MolGraph(atoms=sub_atoms, bonds=sub_bonds)
    for atom in sub.atoms:
        atom.degree = sum(1 for b in sub.bonds if atom.index in (b.a, b.b))
    return sub


class TestSignature:
    def test_two_carbon_single_bond(self):
        g = parse_smiles("CCO")
        assert motif_signature(g, frozenset({0, 1})) == "C2|s1"

    def test_benzene(self):
        g = parse_smiles("c1ccccc1")
        assert motif_signature(g, frozenset(range(6))) == "C6|a6"

    def test_identical_motifs_share_signatures(self):
        ga = parse_smiles("CCO")
        gb = parse_smiles("OCC")
        sig_a = motif_signature(ga, frozenset({0, 1}))
        sig_b = motif_signature(gb, frozenset({1, 2}))
        assert sig_a == sig_b

    def test_empty_motif_rejected(self):
        with pytest.raises(ContractError):
            motif_signature(parse_smiles("C"), frozenset())
