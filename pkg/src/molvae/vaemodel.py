"""Latent sampling, inner-product decoder, side predictor, and the joint loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import chem, encoder, numkernel as nk
from .chem import Atom, BondType, MolGraph, ValidityReport, allowed_valences
from .encoder import HIDDEN_DIM, LATENT_DIM, POOL_DIM
from .numkernel import ParamStore, Tensor

_P_CLAMP = 1e-12

SIDE_PARAM_SHAPES = {
    "side.m1": (POOL_DIM, HIDDEN_DIM),
    "side.b1": (1, HIDDEN_DIM),
    "side.m2": (HIDDEN_DIM, 1),
    "side.b2": (1, 1),
}


def init_side_params(store: ParamStore, rng: np.random.Generator) -> None:
    for name, (fi, fo) in SIDE_PARAM_SHAPES.items():
        if name.startswith("side.b"):
            store.add(name, np.zeros((fi, fo)))
        else:
            store.add(name, encoder.glorot_uniform(rng, fi, fo))


def init_model_params(seed: int) -> ParamStore:
    """All learnable tensors of the model, Glorot-initialized from one seed."""
    rng = np.random.default_rng(seed)
    store = ParamStore()
    encoder.init_encoder_params(store, rng)
    encoder.init_pool_params(store, rng)
    init_side_params(store, rng)
    return store


@dataclass(frozen=True)
class LossBreakdown:
    recon: float
    kl: float
    side_mse: float
    total: float


def sample_latent(mu: Tensor, log_std: Tensor, noise: np.ndarray) -> Tensor:
    """Reparameterized draw: Z = mu + exp(log_std) * noise."""
    if mu.shape != log_std.shape or mu.shape != noise.shape:
        raise nk.ShapeMismatch(
            f"latent shapes {mu.shape} / {log_std.shape} / {noise.shape}"
        )
    return nk.add(mu, nk.hadamard(nk.exp(log_std), nk.constant(noise, "noise")))


def decode_adjacency(z: Tensor) -> Tensor:
    """Edge probabilities p_ij = logistic(z_i . z_j); symmetric by construction."""
    return nk.logistic(nk.matmul(z, nk.transpose(z)))


def kl_term(mu: Tensor, log_std: Tensor) -> Tensor:
    """Closed-form KL of the diagonal Gaussian posterior to the standard normal."""
    if mu.shape != log_std.shape:
        raise nk.ShapeMismatch(f"kl shapes {mu.shape} vs {log_std.shape}")
    var = nk.exp(nk.scale(log_std, 2.0))
    inner = nk.sub(nk.add(nk.square(mu), var), nk.scale(log_std, 2.0))
    total = nk.reduce_sum(inner)
    n = mu.data.size
    return nk.scale(nk.add(total, nk.constant(np.array(-float(n)))), 0.5)


def pair_mask(n: int) -> np.ndarray:
    """Strict upper-triangle indicator, the unordered off-diagonal pairs."""
    return np.triu(np.ones((n, n)), k=1)


def recon_bce(p: Tensor, adjacency: np.ndarray) -> Tensor:
    """Mean binary cross-entropy over unordered atom pairs.

    The typed adjacency collapses to a binary target: a pair is positive when
    any bond connects it. Zero atom pairs (single-atom molecules) give 0.
    """
    n = adjacency.shape[0]
    if p.shape != (n, n):
        raise nk.ShapeMismatch(f"probability shape {p.shape} vs {n} atoms")
    mask = pair_mask(n)
    npairs = mask.sum()
    if npairs == 0:
        return nk.constant(np.array(0.0))
    target = (adjacency.sum(axis=2) > 0).astype(float)
    pc = nk.clip(p, _P_CLAMP, 1.0 - _P_CLAMP)
    tgt = nk.constant(target)
    ones = nk.constant(np.ones((n, n)))
    pos = nk.hadamard(tgt, nk.log(pc))
    neg = nk.hadamard(nk.sub(ones, tgt), nk.log(nk.sub(ones, pc)))
    per_pair = nk.hadamard(nk.constant(mask), nk.add(pos, neg))
    return nk.scale(nk.reduce_sum(per_pair), -1.0 / npairs)


def recon_bce_logits(logits: Tensor, adjacency: np.ndarray) -> Tensor:
    """recon_bce computed from decoder logits via softplus; no probability clamp.

    Mathematically identical to recon_bce(logistic(logits), A) but smooth and
    exact in the saturated regime, which keeps gradient checks sharp.
    """
    n = adjacency.shape[0]
    mask = pair_mask(n)
    npairs = mask.sum()
    if npairs == 0:
        return nk.constant(np.array(0.0))
    target = (adjacency.sum(axis=2) > 0).astype(float)
    per_pair = nk.sub(nk.softplus(logits), nk.hadamard(nk.constant(target), logits))
    masked = nk.hadamard(nk.constant(mask), per_pair)
    return nk.scale(nk.reduce_sum(masked), 1.0 / npairs)


def side_predict(g: Tensor, store: ParamStore) -> Tensor:
    """Two-layer MLP (ELU hidden, linear output) from the pooled vector."""
    row = nk.reshape(g, (1, POOL_DIM)) if g.data.ndim == 1 else g
    hidden = nk.elu(nk.add(nk.matmul(row, store["side.m1"]), store["side.b1"]))
    return nk.reshape(nk.add(nk.matmul(hidden, store["side.m2"]), store["side.b2"]), ())


@dataclass
class MolTensors:
    """Cached per-molecule constants for repeated training passes."""

    adjacency: np.ndarray
    features: np.ndarray
    mean_mats: list

    @classmethod
    def from_mol(cls, mol: MolGraph) -> "MolTensors":
        a = chem.adjacency_tensor(mol)
        return cls(
            adjacency=a,
            features=chem.node_features(mol),
            mean_mats=encoder.neighbor_mean_mats(a),
        )


def joint_loss(
    mol: MolGraph,
    label: float,
    store: ParamStore,
    noise: np.ndarray,
    beta: float = 1.0,
    lam: float = 1.0,
    cache: MolTensors | None = None,
) -> tuple[Tensor, LossBreakdown]:
    """Full forward pass; returns the scalar loss node and its breakdown."""
    mt = cache if cache is not None else MolTensors.from_mol(mol)
    mu, log_std = encoder.encode(mt.features, mt.adjacency, store, mt.mean_mats)
    z = sample_latent(mu, log_std, noise)
    recon = recon_bce_logits(nk.matmul(z, nk.transpose(z)), mt.adjacency)
    kl = kl_term(mu, log_std)
    g = encoder.pool(mu, store)
    pred = side_predict(g, store)
    err = nk.sub(pred, nk.constant(np.array(float(label))))
    side = nk.square(err)
    total = nk.add(recon, nk.add(nk.scale(kl, beta), nk.scale(side, lam)))
    breakdown = LossBreakdown(
        recon=recon.item(), kl=kl.item(), side_mse=side.item(), total=total.item()
    )
    return total, breakdown


def decode_probs(mol: MolGraph, store: ParamStore, cache: MolTensors | None = None) -> np.ndarray:
    """Deterministic edge probabilities (Z = Mu, no sampling)."""
    mt = cache if cache is not None else MolTensors.from_mol(mol)
    mu, _ = encoder.encode(mt.features, mt.adjacency, store, mt.mean_mats)
    return decode_adjacency(mu).data


def _refit_implicit_h(element: str, charge: int, bond_order: float) -> int | None:
    rounded = math.ceil(bond_order - 1e-9)
    for h in range(5):
        if rounded + h in allowed_valences(element, charge):
            return h
    return None


def reconstruct(
    mol: MolGraph, store: ParamStore, threshold: float = 0.5
) -> tuple[MolGraph, ValidityReport]:
    """Deterministic reconstruction of a molecule's bond structure.

    Edges are pairs whose decoded probability exceeds the threshold; the bond
    type is copied from the input where the pair was bonded there, otherwise
    Single. Implicit hydrogens are refit to the lowest valid count per atom;
    atoms with no valid count are reported as offending.
    """
    probs = decode_probs(mol, store)
    n = mol.n_atoms
    input_types = {}
    for i, j, t in mol.bonds:
        input_types[(i, j)] = t
    bonds = []
    for i in range(n):
        for j in range(i + 1, n):
            if probs[i, j] > threshold:
                bonds.append((i, j, input_types.get((i, j), BondType.SINGLE)))
    order = [0.0] * n
    for i, j, t in bonds:
        order[i] += t.weight
        order[j] += t.weight
    atoms = []
    offending = []
    for i, atom in enumerate(mol.atoms):
        h = _refit_implicit_h(atom.element, atom.formal_charge, order[i])
        if h is None:
            offending.append(i)
            h = 0
        atoms.append(Atom(atom.element, atom.formal_charge, h))
    out = chem.build(atoms, bonds)
    if offending:
        return out, ValidityReport(valid=False, offending=tuple(offending))
    return out, chem.check_valence(out)
