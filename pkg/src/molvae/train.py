"""Training loop, Adam, and the evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import vaemodel
from .encoder import LATENT_DIM
from .fingerprint import pooled_vector
from .numkernel import NonFiniteValue, ParamStore, ShapeMismatch, backward
from .vaemodel import LossBreakdown, MolTensors, init_model_params, joint_loss


class TrainError(ValueError):
    pass


class EmptyDataset(TrainError):
    pass


class MoleculeTooLarge(TrainError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta: float = 1.0
    lam: float = 1.0
    seed: int = 0
    max_atoms: int = 20
    threshold: float = 0.5


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def adam_step(
    params: ParamStore,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """Standard Adam update with bias correction, in place."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ShapeMismatch(f"gradient shape for {name}: {g.shape} vs {p.data.shape}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m[...] = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v[...] = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        p.data[...] = p.data - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def train(dataset, property_name: str, config: TrainConfig) -> tuple[ParamStore, list[LossBreakdown]]:
    """Train on every record's molecule and side-property value.

    Deterministic given the config seed: shuffling, initialization, and
    per-molecule noise all come from one seeded generator; batch gradients
    are averaged in fixed iteration order.
    """
    records = list(dataset.records)
    if not records:
        raise EmptyDataset("no molecules to train on")
    for rec in records:
        if rec.mol.n_atoms > config.max_atoms:
            raise MoleculeTooLarge(
                f"{rec.smiles}: {rec.mol.n_atoms} atoms > max {config.max_atoms}"
            )
    labels = [float(rec.properties[property_name]) for rec in records]
    caches = [MolTensors.from_mol(rec.mol) for rec in records]

    params = init_model_params(config.seed)
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    history: list[LossBreakdown] = []

    for _epoch in range(config.epochs):
        order = rng.permutation(len(records))
        sums = np.zeros(4)
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            batch_grads: dict[str, np.ndarray] = {
                name: np.zeros_like(p.data) for name, p in params.items()
            }
            for idx in batch:
                rec = records[idx]
                noise = rng.standard_normal((rec.mol.n_atoms, LATENT_DIM))
                total, bd = joint_loss(
                    rec.mol,
                    labels[idx],
                    params,
                    noise,
                    beta=config.beta,
                    lam=config.lam,
                    cache=caches[idx],
                )
                if not np.isfinite(bd.total):
                    raise NonFiniteValue(f"non-finite loss on molecule {rec.smiles}")
                grads = backward(total, params)
                for name in batch_grads:
                    batch_grads[name] += grads[name]
                sums += (bd.recon, bd.kl, bd.side_mse, bd.total)
            scale = 1.0 / len(batch)
            for name in batch_grads:
                batch_grads[name] *= scale
            adam_step(params, batch_grads, state, config.learning_rate)
        means = sums / len(records)
        history.append(LossBreakdown(*means))

    return params, history


def evaluate_validity(params: ParamStore, dataset, threshold: float = 0.5) -> float:
    """Fraction of deterministic reconstructions that pass the valence check."""
    n_valid = 0
    for rec in dataset.records:
        _, report = vaemodel.reconstruct(rec.mol, params, threshold)
        n_valid += report.valid
    return n_valid / len(dataset.records)


def evaluate_edge_auc(params: ParamStore, dataset) -> float:
    """ROC-AUC of decoded pair probabilities against binary adjacency.

    Pools all unordered pairs of all molecules; ties are handled by midrank.
    """
    scores = []
    labels = []
    for rec in dataset.records:
        mt = MolTensors.from_mol(rec.mol)
        probs = vaemodel.decode_probs(rec.mol, params, mt)
        target = mt.adjacency.sum(axis=2) > 0
        n = rec.mol.n_atoms
        iu = np.triu_indices(n, k=1)
        scores.append(probs[iu])
        labels.append(target[iu])
    s = np.concatenate(scores)
    y = np.concatenate(labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    ranks = _midranks(s)
    return (ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def fit_probe(
    params: ParamStore,
    dataset,
    target_column: str,
    seed: int = 0,
    ridge: float = 1e-6,
) -> tuple[np.ndarray, float]:
    """Ridge regression from pooled vectors to a property; held-out R^2.

    The model parameters stay frozen; only the linear probe is fit, on a
    seeded 80/20 split.
    """
    xs = np.stack([pooled_vector(rec.mol, params) for rec in dataset.records])
    ys = np.array([float(rec.properties[target_column]) for rec in dataset.records])
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ys))
    cut = max(1, int(0.8 * len(ys)))
    tr, te = order[:cut], order[cut:]
    if te.size == 0:
        te = tr
    x_tr = np.hstack([xs[tr], np.ones((tr.size, 1))])
    a = x_tr.T @ x_tr + ridge * np.eye(x_tr.shape[1])
    w = np.linalg.solve(a, x_tr.T @ ys[tr])
    x_te = np.hstack([xs[te], np.ones((te.size, 1))])
    pred = x_te @ w
    ss_res = float(((ys[te] - pred) ** 2).sum())
    ss_tot = float(((ys[te] - ys[te].mean()) ** 2).sum())
    if ss_tot == 0.0:
        return w, 1.0
    return w, 1.0 - ss_res / ss_tot
