"""Path-based bit fingerprints, classical similarity metrics, latent metric."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import encoder
from .chem import BondType, MolGraph
from .numkernel import ParamStore

_BOND_CHAR = {
    BondType.SINGLE: "-",
    BondType.DOUBLE: "=",
    BondType.TRIPLE: "#",
    BondType.AROMATIC: ":",
}


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class FpConfig:
    min_path: int = 1
    max_path: int = 7
    bits_per_hash: int = 2
    nbits: int = 2048
    # Stored for reporting only; the fingerprint length stays fixed.
    target_density: float = 0.3


@dataclass(frozen=True)
class Fingerprint:
    bits: frozenset[int]
    nbits: int

    @property
    def on_count(self) -> int:
        return len(self.bits)

    @property
    def density(self) -> float:
        return self.on_count / self.nbits

    def to_hex(self) -> str:
        """Hex string, nbits/4 chars; bit 0 is the high bit of the first digit."""
        buf = bytearray(self.nbits // 8)
        for b in self.bits:
            buf[b // 8] |= 0x80 >> (b % 8)
        return buf.hex()


# A bond path: (atom0, bond0, atom1, bond1, ..., atomK) as index tuples.
BondPath = tuple[int, ...]


def enumerate_paths(mol: MolGraph, min_len: int = 1, max_len: int = 7) -> set[tuple]:
    """All simple bond paths of min_len..max_len bonds, deduplicated under reversal.

    Bonds may not repeat within a path; atoms may (rings). Each path is a
    tuple of alternating atom indices and bond-slot indices.
    """
    bond_list = list(mol.bonds)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(mol.n_atoms)]
    for slot, (i, j, _) in enumerate(bond_list):
        adj[i].append((j, slot))
        adj[j].append((i, slot))

    found: set[tuple] = set()

    def canonical(path: list[int]) -> tuple:
        fwd = tuple(path)
        rev = tuple(reversed(path))
        return min(fwd, rev)

    def extend(path: list[int], used: set[int], nbonds: int) -> None:
        if nbonds >= min_len:
            found.add(canonical(path))
        if nbonds == max_len:
            return
        tail = path[-1]
        for nxt, slot in adj[tail]:
            if slot in used:
                continue
            path.append(slot)
            path.append(nxt)
            used.add(slot)
            extend(path, used, nbonds + 1)
            used.discard(slot)
            path.pop()
            path.pop()

    for start in range(mol.n_atoms):
        extend([start], set(), 0)
    return found


def canonical_path_key(mol: MolGraph, path: tuple) -> str:
    """Alternating element/bond rendering, lexicographic min over direction.

    Atoms carrying an aromatic bond are rendered lower-case.
    """
    aromatic = set()
    for i, j, t in mol.bonds:
        if t == BondType.AROMATIC:
            aromatic.update((i, j))
    bond_list = list(mol.bonds)

    def render(seq: tuple) -> str:
        parts = []
        for pos, idx in enumerate(seq):
            if pos % 2 == 0:
                sym = mol.atoms[idx].element
                parts.append(sym.lower() if idx in aromatic else sym)
            else:
                parts.append(_BOND_CHAR[bond_list[idx][2]])
        return "".join(parts)

    return min(render(path), render(tuple(reversed(path))))


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def splitmix64(state: int):
    """Deterministic 64-bit generator used to place fingerprint bits."""
    mask = 0xFFFFFFFFFFFFFFFF
    while True:
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        yield z ^ (z >> 31)


def path_fingerprint(mol: MolGraph, cfg: FpConfig = FpConfig()) -> Fingerprint:
    """Hash every canonical path key and set bits_per_hash bits per key."""
    bits: set[int] = set()
    for path in enumerate_paths(mol, cfg.min_path, cfg.max_path):
        key = canonical_path_key(mol, path)
        gen = splitmix64(fnv1a64(key.encode("ascii")))
        for _ in range(cfg.bits_per_hash):
            bits.add(next(gen) % cfg.nbits)
    return Fingerprint(bits=frozenset(bits), nbits=cfg.nbits)


def _counts(a: Fingerprint, b: Fingerprint) -> tuple[int, int, int]:
    if a.nbits != b.nbits:
        raise LengthMismatch(f"fingerprint lengths {a.nbits} vs {b.nbits}")
    return len(a.bits & b.bits), len(a.bits), len(b.bits)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    c, na, nb = _counts(a, b)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    return c / (na + nb - c)


def dice(a: Fingerprint, b: Fingerprint) -> float:
    c, na, nb = _counts(a, b)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    return 2.0 * c / (na + nb)


def cosine(a: Fingerprint, b: Fingerprint) -> float:
    c, na, nb = _counts(a, b)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    return c / np.sqrt(na * nb)


class ZeroVector(ArithmeticError):
    pass


def pooled_vector(mol: MolGraph, store: ParamStore) -> np.ndarray:
    """Deterministic pooled molecule vector (softmax pooling over Mu)."""
    from .vaemodel import MolTensors  # local import avoids a module cycle

    mt = MolTensors.from_mol(mol)
    mu, _ = encoder.encode(mt.features, mt.adjacency, store, mt.mean_mats)
    return encoder.pool(mu, store).data


def latent_similarity(mol1: MolGraph, mol2: MolGraph, store: ParamStore) -> float:
    """Similarity 1/(1+d) from the distance between normalized pooled vectors."""
    sims = []
    for mol in (mol1, mol2):
        g = pooled_vector(mol, store)
        norm = np.linalg.norm(g)
        if norm == 0.0:
            raise ZeroVector("pooled vector has zero norm")
        sims.append(g / norm)
    d = float(np.linalg.norm(sims[0] - sims[1]))
    return 1.0 / (1.0 + d)
