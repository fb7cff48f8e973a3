"""Tests for path enumeration, hashing, bit fingerprints, and similarity metrics."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from molvae.chem import BondType, permute
from molvae.corpus import random_molecule
from molvae.fingerprint import (
    Fingerprint,
    FpConfig,
    LengthMismatch,
    ZeroVector,
    canonical_path_key,
    cosine,
    dice,
    enumerate_paths,
    fnv1a64,
    latent_similarity,
    path_fingerprint,
    pooled_vector,
    splitmix64,
    tanimoto,
)
from molvae.smiles import parse_smiles
from molvae.vaemodel import init_model_params


def fp_of(bits, nbits=2048):
    return Fingerprint(bits=frozenset(bits), nbits=nbits)


# -- path enumeration ----------------------------------------------------


def test_path_count_linear_chain():
    # A path graph with n atoms has n-k paths of k bonds.
    mol = parse_smiles("CCCCC")
    for k in range(1, 5):
        paths = enumerate_paths(mol, k, k)
        assert len(paths) == 5 - k


def test_path_count_ring():
    # A 6-cycle has 6 paths of each length 1..5 and 6 closed 6-bond walks
    # collapsing under the bond-set... each 6-bond simple bond path revisits
    # the start atom; there are 6 of them (one per starting edge direction
    # pair), still 6 after reversal dedup.
    mol = parse_smiles("C1CCCCC1")
    for k in range(1, 6):
        assert len(enumerate_paths(mol, k, k)) == 6
    assert len(enumerate_paths(mol, 6, 6)) == 6


def test_paths_match_bruteforce_on_random_molecules():
    def brute(mol, min_len, max_len):
        adj = [[] for _ in range(mol.n_atoms)]
        for slot, (i, j, _) in enumerate(mol.bonds):
            adj[i].append((j, slot))
            adj[j].append((i, slot))
        out = set()

        def walk(path, used):
            nbonds = len(used)
            if min_len <= nbonds:
                fwd = tuple(path)
                out.add(min(fwd, tuple(reversed(fwd))))
            if nbonds == max_len:
                return
            for nxt, slot in adj[path[-1]]:
                if slot not in used:
                    walk(path + [slot, nxt], used | {slot})

        for s in range(mol.n_atoms):
            walk([s], frozenset())
        return out

    rng = np.random.default_rng(7)
    for _ in range(20):
        mol = random_molecule(rng, int(rng.integers(2, 9)))
        assert enumerate_paths(mol, 1, 4) == brute(mol, 1, 4)


def test_paths_deduplicate_reversal():
    mol = parse_smiles("CCO")
    paths = enumerate_paths(mol, 2, 2)
    assert len(paths) == 1  # C-C-O seen once, not once per direction


def test_single_atom_has_no_paths():
    assert enumerate_paths(parse_smiles("C"), 1, 7) == set()


# -- canonical keys ------------------------------------------------------


def test_canonical_key_direction_independent():
    mol = parse_smiles("NC=O")
    (path,) = enumerate_paths(mol, 2, 2)
    key = canonical_path_key(mol, path)
    rev = canonical_path_key(mol, tuple(reversed(path)))
    assert key == rev
    assert key == min("N-C=O", "O=C-N")


def test_canonical_key_marks_aromatic_atoms_lowercase():
    mol = parse_smiles("c1ccccc1")
    keys = {canonical_path_key(mol, p) for p in enumerate_paths(mol, 1, 1)}
    assert keys == {"c:c"}


def test_canonical_key_bond_symbols():
    mol = parse_smiles("C#N")
    (path,) = enumerate_paths(mol, 1, 1)
    assert canonical_path_key(mol, path) == "C#N"


# -- hashing -------------------------------------------------------------


def test_fnv1a64_reference_values():
    # Published FNV-1a 64-bit test vectors.
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_splitmix64_deterministic_and_64bit():
    g1, g2 = splitmix64(42), splitmix64(42)
    seq1 = [next(g1) for _ in range(5)]
    seq2 = [next(g2) for _ in range(5)]
    assert seq1 == seq2
    assert all(0 <= v < 2**64 for v in seq1)
    assert len(set(seq1)) == 5


def test_splitmix64_reference_value():
    # splitmix64(0) first output, per the published reference sequence.
    assert next(splitmix64(0)) == 0xE220A8397B1DCDAF


# -- fingerprints --------------------------------------------------------


def test_fingerprint_deterministic():
    mol = parse_smiles("CC(=O)Oc1ccccc1C(=O)O")
    f1 = path_fingerprint(mol)
    f2 = path_fingerprint(mol)
    assert f1.bits == f2.bits


def test_fingerprint_invariant_under_atom_renumbering():
    rng = np.random.default_rng(3)
    for _ in range(10):
        mol = random_molecule(rng, int(rng.integers(3, 10)))
        perm = list(rng.permutation(mol.n_atoms))
        assert path_fingerprint(mol).bits == path_fingerprint(permute(mol, perm)).bits


def test_fingerprint_bits_in_range_and_density():
    f = path_fingerprint(parse_smiles("CCO"), FpConfig(nbits=64))
    assert all(0 <= b < 64 for b in f.bits)
    assert f.density == f.on_count / 64


def test_fingerprint_bits_per_hash_bound():
    cfg = FpConfig(bits_per_hash=2)
    mol = parse_smiles("CCO")
    npaths = len(enumerate_paths(mol, cfg.min_path, cfg.max_path))
    f = path_fingerprint(mol, cfg)
    assert 0 < f.on_count <= 2 * npaths


def test_single_atom_fingerprint_is_empty():
    assert path_fingerprint(parse_smiles("C")).on_count == 0


def test_to_hex_layout():
    f = fp_of({0, 15}, nbits=16)
    # Bit 0 is the high bit of the first digit; bit 15 the low bit of the last.
    assert f.to_hex() == "8001"
    assert fp_of(set(), nbits=16).to_hex() == "0000"


# -- similarity metrics --------------------------------------------------


def test_metric_hand_values():
    a = fp_of({1, 2, 3})
    b = fp_of({2, 3, 4, 5})
    assert tanimoto(a, b) == pytest.approx(2 / 5)
    assert dice(a, b) == pytest.approx(4 / 7)
    assert cosine(a, b) == pytest.approx(2 / np.sqrt(12))


def test_metric_identity():
    a = fp_of({5, 6})
    assert tanimoto(a, a) == 1.0
    assert dice(a, a) == 1.0
    assert cosine(a, a) == 1.0


def test_metric_disjoint_sets():
    a, b = fp_of({1}), fp_of({2})
    assert tanimoto(a, b) == 0.0
    assert dice(a, b) == 0.0
    assert cosine(a, b) == 0.0


def test_metric_empty_conventions():
    e = fp_of(set())
    a = fp_of({1})
    for m in (tanimoto, dice, cosine):
        assert m(e, e) == 1.0
        assert m(e, a) == 0.0
        assert m(a, e) == 0.0


def test_metric_length_mismatch():
    with pytest.raises(LengthMismatch):
        tanimoto(fp_of({1}, nbits=64), fp_of({1}, nbits=128))


@settings(max_examples=500, deadline=None)
@given(
    st.sets(st.integers(0, 255), max_size=64),
    st.sets(st.integers(0, 255), max_size=64),
)
def test_metric_axioms(bits_a, bits_b):
    a, b = fp_of(bits_a, 256), fp_of(bits_b, 256)
    t, d, c = tanimoto(a, b), dice(a, b), cosine(a, b)
    for v in (t, d, c):
        assert 0.0 <= v <= 1.0
    assert t <= d + 1e-12
    assert t <= c + 1e-12
    assert tanimoto(b, a) == t
    assert dice(b, a) == d
    assert cosine(b, a) == c


# -- latent metric -------------------------------------------------------


def test_latent_similarity_symmetric_and_self_one():
    store = init_model_params(seed=0)
    a = parse_smiles("CCO")
    b = parse_smiles("c1ccccc1")
    assert latent_similarity(a, a, store) == 1.0
    assert latent_similarity(a, b, store) == latent_similarity(b, a, store)


def test_latent_similarity_range():
    store = init_model_params(seed=0)
    a = parse_smiles("CCO")
    b = parse_smiles("CC(=O)Oc1ccccc1C(=O)O")
    v = latent_similarity(a, b, store)
    # Normalized vectors differ by at most 2, so similarity is at least 1/3.
    assert 1.0 / 3.0 <= v <= 1.0


def test_pooled_vector_shape_and_sum():
    store = init_model_params(seed=0)
    mol = parse_smiles("CCO")
    g = pooled_vector(mol, store)
    assert g.shape == (64,)
    assert g.sum() == pytest.approx(3.0, abs=1e-9)
