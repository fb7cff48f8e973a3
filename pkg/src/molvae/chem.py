"""Molecular graph data model: atoms, typed bonds, tensors, valence rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

ELEMENTS = ("H", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I")
ELEMENT_INDEX = {sym: i for i, sym in enumerate(ELEMENTS)}

# Allowed total valence (bond order sum + implicit hydrogens) per element at
# zero formal charge.
DEFAULT_VALENCES: dict[str, tuple[int, ...]] = {
    "H": (1,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "F": (1,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

FEATURE_DIM = 32


class ChemError(ValueError):
    """Base class for molecular graph construction errors."""


class UnknownElement(ChemError):
    pass


class SelfLoop(ChemError):
    pass


class DuplicateBond(ChemError):
    pass


class IndexOutOfRange(ChemError):
    pass


class BondType(IntEnum):
    SINGLE = 0
    DOUBLE = 1
    TRIPLE = 2
    AROMATIC = 3

    @property
    def weight(self) -> float:
        return _BOND_WEIGHTS[self]


_BOND_WEIGHTS = {
    BondType.SINGLE: 1.0,
    BondType.DOUBLE: 2.0,
    BondType.TRIPLE: 3.0,
    BondType.AROMATIC: 1.5,
}

N_BOND_TYPES = 4


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    implicit_h: int = 0


@dataclass(frozen=True)
class MolGraph:
    """Undirected molecular graph; node order is fixed at construction."""

    atoms: tuple[Atom, ...]
    bonds: tuple[tuple[int, int, BondType], ...]

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def neighbors(self, i: int) -> list[tuple[int, BondType]]:
        out = []
        for a, b, t in self.bonds:
            if a == i:
                out.append((b, t))
            elif b == i:
                out.append((a, t))
        return out

    def degree(self, i: int) -> int:
        return sum(1 for a, b, _ in self.bonds if i in (a, b))

    def bond_order_sum(self, i: int) -> float:
        return sum(t.weight for a, b, t in self.bonds if i in (a, b))


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    offending: tuple[int, ...]


def allowed_valences(element: str, formal_charge: int) -> tuple[int, ...]:
    """Allowed total valences; charge adjustment applies to N and O only."""
    base = DEFAULT_VALENCES.get(element)
    if base is None:
        return ()
    if formal_charge == 0:
        return base
    if element in ("N", "O") and -2 <= formal_charge <= 2:
        return tuple(v + formal_charge for v in base if v + formal_charge > 0)
    return ()


def build(atoms: Sequence[Atom], bonds: Iterable[tuple[int, int, BondType]]) -> MolGraph:
    """Validate and canonicalize a molecular graph."""
    for a in atoms:
        if a.element not in ELEMENT_INDEX:
            raise UnknownElement(f"unknown element symbol {a.element!r}")
        if not -2 <= a.formal_charge <= 2:
            raise ChemError(f"formal charge {a.formal_charge} outside [-2, +2]")
        if not 0 <= a.implicit_h <= 4:
            raise ChemError(f"implicit hydrogen count {a.implicit_h} outside [0, 4]")
    n = len(atoms)
    canon: dict[tuple[int, int], BondType] = {}
    for i, j, t in bonds:
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"bond ({i}, {j}) references a missing atom")
        if i == j:
            raise SelfLoop(f"self-bond on atom {i}")
        key = (min(i, j), max(i, j))
        if key in canon:
            raise DuplicateBond(f"duplicate bond between atoms {key[0]} and {key[1]}")
        canon[key] = BondType(t)
    ordered = tuple((i, j, canon[(i, j)]) for i, j in sorted(canon))
    return MolGraph(atoms=tuple(atoms), bonds=ordered)


def adjacency_tensor(mol: MolGraph) -> np.ndarray:
    """One-hot symmetric N x N x 4 bond tensor with a zero diagonal."""
    n = mol.n_atoms
    a = np.zeros((n, n, N_BOND_TYPES))
    for i, j, t in mol.bonds:
        a[i, j, t] = 1.0
        a[j, i, t] = 1.0
    return a


def node_features(mol: MolGraph) -> np.ndarray:
    """Per-node feature rows: element, charge, H count, heavy degree one-hots.

    Layout: element one-hot (10) | charge in {-1,0,+1} clamped (3) |
    implicit H 0..4 (5) | heavy-atom degree 0..4 clamped (5) | zero pad to 32.
    """
    n = mol.n_atoms
    h = np.zeros((n, FEATURE_DIM))
    for i, atom in enumerate(mol.atoms):
        h[i, ELEMENT_INDEX[atom.element]] = 1.0
        charge = max(-1, min(1, atom.formal_charge))
        h[i, 10 + charge + 1] = 1.0
        h[i, 13 + min(atom.implicit_h, 4)] = 1.0
        h[i, 18 + min(mol.degree(i), 4)] = 1.0
    return h


def check_valence(mol: MolGraph) -> ValidityReport:
    """Report atoms whose bond order sum plus implicit H is not an allowed valence.

    Aromatic bonds count 1.5; a half-integral total is rounded up before the
    comparison.
    """
    offending = []
    for i, atom in enumerate(mol.atoms):
        total = mol.bond_order_sum(i) + atom.implicit_h
        rounded = math.ceil(total - 1e-9)
        if rounded not in allowed_valences(atom.element, atom.formal_charge):
            offending.append(i)
    return ValidityReport(valid=not offending, offending=tuple(offending))


def _atom_label(a: Atom) -> tuple[str, int, int]:
    return (a.element, a.formal_charge, a.implicit_h)


def _bond_map(mol: MolGraph) -> dict[tuple[int, int], BondType]:
    m = {}
    for i, j, t in mol.bonds:
        m[(i, j)] = t
        m[(j, i)] = t
    return m


def is_isomorphic(a: MolGraph, b: MolGraph) -> bool:
    """Label-preserving graph isomorphism via backtracking with pruning."""
    if a.n_atoms != b.n_atoms or len(a.bonds) != len(b.bonds):
        return False
    la = sorted(_atom_label(x) for x in a.atoms)
    lb = sorted(_atom_label(x) for x in b.atoms)
    if la != lb:
        return False
    if sorted(a.degree(i) for i in range(a.n_atoms)) != sorted(
        b.degree(i) for i in range(b.n_atoms)
    ):
        return False

    n = a.n_atoms
    bm_a = _bond_map(a)
    bm_b = _bond_map(b)
    adj_a = [sorted(j for j, _ in a.neighbors(i)) for i in range(n)]
    # Candidate nodes of b per node of a, filtered on label and degree.
    cands = [
        [
            j
            for j in range(n)
            if _atom_label(a.atoms[i]) == _atom_label(b.atoms[j])
            and a.degree(i) == b.degree(j)
        ]
        for i in range(n)
    ]
    if any(not c for c in cands):
        return False

    # Match nodes in order of fewest candidates first.
    order = sorted(range(n), key=lambda i: len(cands[i]))
    mapping = [-1] * n
    used = [False] * n

    def backtrack(pos: int) -> bool:
        if pos == n:
            return True
        i = order[pos]
        for j in cands[i]:
            if used[j]:
                continue
            ok = True
            for k in adj_a[i]:
                mk = mapping[k]
                if mk >= 0 and bm_b.get((j, mk)) != bm_a[(i, k)]:
                    ok = False
                    break
            if not ok:
                continue
            # Mapped b-neighbors of j must all be matched edges too.
            deg_mapped = sum(1 for k in adj_a[i] if mapping[k] >= 0)
            deg_mapped_b = sum(
                1 for k in range(n) if mapping[k] >= 0 and (j, mapping[k]) in bm_b
            )
            if deg_mapped != deg_mapped_b:
                continue
            mapping[i] = j
            used[j] = True
            if backtrack(pos + 1):
                return True
            mapping[i] = -1
            used[j] = False
        return False

    return backtrack(0)


def permute(mol: MolGraph, perm: Sequence[int]) -> MolGraph:
    """Relabel nodes: new index perm[i] holds old atom i. Test helper."""
    n = mol.n_atoms
    atoms = [None] * n
    for i, a in enumerate(mol.atoms):
        atoms[perm[i]] = a
    bonds = [(perm[i], perm[j], t) for i, j, t in mol.bonds]
    return build(atoms, bonds)
