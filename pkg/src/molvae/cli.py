"""Command-line interface: training, inference, similarity, verification."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import chem, dataio, fingerprint as fp, train as tr, vaemodel
from .chem import ChemError
from .encoder import LATENT_DIM
from .numkernel import NumericError, grad_check
from .smiles import SmilesError, parse_smiles, write_smiles

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(args, payload: dict, plain: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(plain)


def _load_params(path: str):
    params, config = dataio.load_checkpoint(path)
    return params, config


def cmd_train(args) -> int:
    dataset = dataio.load_csv(args.data, max_atoms=args.max_atoms)
    if args.property not in dataset.property_names():
        print(
            f"error: property {args.property!r} not in {dataset.property_names()}",
            file=sys.stderr,
        )
        return EXIT_DOMAIN
    config = tr.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        beta=args.beta,
        lam=getattr(args, "lambda"),
        seed=args.seed,
        max_atoms=args.max_atoms,
    )
    params, history = tr.train(dataset, args.property, config)
    dataio.save_checkpoint(params, config, args.out)
    history_path = Path(args.out).with_suffix(Path(args.out).suffix + ".history.csv")
    with history_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "recon", "kl", "side", "total"])
        for epoch, bd in enumerate(history, start=1):
            writer.writerow([epoch, bd.recon, bd.kl, bd.side_mse, bd.total])
    payload = {
        "checkpoint": str(args.out),
        "history": str(history_path),
        "epochs": len(history),
        "final_total": history[-1].total if history else None,
        "skipped": dataset.skipped,
    }
    _emit(
        args,
        payload,
        f"wrote {args.out} ({len(history)} epochs, "
        f"final total {history[-1].total:.6g})" if history else f"wrote {args.out}",
    )
    return 0


def cmd_encode(args) -> int:
    params, _ = _load_params(args.ckpt)
    mol = parse_smiles(args.smiles)
    g = fp.pooled_vector(mol, params)
    if args.json:
        print(json.dumps({"pooled": [float(v) for v in g]}))
    else:
        for v in g:
            print(f"{v:.17g}")
    return 0


def cmd_reconstruct(args) -> int:
    params, _ = _load_params(args.ckpt)
    mol = parse_smiles(args.smiles)
    out, report = vaemodel.reconstruct(mol, params, args.threshold)
    probs = vaemodel.decode_probs(mol, params)
    try:
        smi = write_smiles(out)
    except SmilesError:
        smi = None  # disconnected reconstruction has no single-fragment SMILES
    payload = {
        "smiles": smi,
        "valid": report.valid,
        "offending": list(report.offending),
        "edge_probabilities": [[float(p) for p in row] for row in probs],
    }
    if args.json:
        print(json.dumps(payload))
    else:
        print(f"reconstructed: {smi if smi is not None else '<disconnected>'}")
        print(f"valid: {report.valid}")
        if report.offending:
            print(f"offending atoms: {list(report.offending)}")
        print("edge probabilities:")
        for row in probs:
            print("  " + " ".join(f"{p:.4f}" for p in row))
    return 0


def cmd_predict(args) -> int:
    params, _ = _load_params(args.ckpt)
    mol = parse_smiles(args.smiles)
    mt = vaemodel.MolTensors.from_mol(mol)
    from . import encoder as enc

    mu, _ = enc.encode(mt.features, mt.adjacency, params, mt.mean_mats)
    pred = vaemodel.side_predict(enc.pool(mu, params), params).item()
    _emit(args, {"prediction": pred}, f"{pred:.17g}")
    return 0


def cmd_similar(args) -> int:
    if len(args.smiles) != 2:
        print("error: similar needs exactly two --smiles", file=sys.stderr)
        return EXIT_USAGE
    a, b = (parse_smiles(s) for s in args.smiles)
    if args.metric == "latent":
        if not args.ckpt:
            print("error: --metric latent requires --ckpt", file=sys.stderr)
            return EXIT_USAGE
        params, _ = _load_params(args.ckpt)
        value = fp.latent_similarity(a, b, params)
    else:
        cfg = fp.FpConfig()
        fa, fb = fp.path_fingerprint(a, cfg), fp.path_fingerprint(b, cfg)
        value = {"tanimoto": fp.tanimoto, "dice": fp.dice, "cosine": fp.cosine}[
            args.metric
        ](fa, fb)
    _emit(args, {"metric": args.metric, "similarity": value}, f"{value:.17g}")
    return 0


def cmd_fingerprint(args) -> int:
    mol = parse_smiles(args.smiles)
    cfg = fp.FpConfig(
        min_path=args.min_path,
        max_path=args.max_path,
        bits_per_hash=args.bits_per_hash,
        nbits=args.nbits,
    )
    f = fp.path_fingerprint(mol, cfg)
    payload = {"hex": f.to_hex(), "on_bits": f.on_count, "density": f.density}
    _emit(args, payload, f"{f.to_hex()}\ndensity: {f.density:.6f}")
    return 0


def cmd_validate(args) -> int:
    mol = parse_smiles(args.smiles)
    report = chem.check_valence(mol)
    payload = {"valid": report.valid, "offending": list(report.offending)}
    if report.valid:
        _emit(args, payload, "valid")
        return 0
    _emit(args, payload, f"invalid, offending atoms: {list(report.offending)}")
    return EXIT_DOMAIN


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    mol = dataio_random_molecule(rng)
    params = vaemodel.init_model_params(args.seed)
    noise = rng.standard_normal((mol.n_atoms, LATENT_DIM))
    label = float(rng.normal())

    def f(store):
        total, _ = vaemodel.joint_loss(mol, label, store, noise)
        return total

    err = grad_check(f, params, eps=1e-5, seed=args.seed)
    _emit(args, {"max_rel_error": err, "atoms": mol.n_atoms}, f"{err:.3e}")
    return 0 if err < 1e-5 else EXIT_NUMERIC


def dataio_random_molecule(rng):
    from .corpus import random_molecule

    return random_molecule(rng, int(rng.integers(4, 11)))


def build_parser() -> _Parser:
    parser = _Parser(prog="molvae", description="Graph VAE molecular toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(fn=fn)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    p = add("train", cmd_train, help="train a model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--property", required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--lambda", type=float, default=1.0)
    p.add_argument("--max-atoms", type=int, default=20, dest="max_atoms")

    p = add("encode", cmd_encode, help="print the pooled 64-vector of a molecule")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--smiles", required=True)

    p = add("reconstruct", cmd_reconstruct, help="decode a molecule's bond structure")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--smiles", required=True)
    p.add_argument("--threshold", type=float, default=0.5)

    p = add("predict", cmd_predict, help="side-predictor output for a molecule")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--smiles", required=True)

    p = add("similar", cmd_similar, help="similarity between two molecules")
    p.add_argument("--ckpt")
    p.add_argument("--smiles", action="append", default=[])
    p.add_argument(
        "--metric",
        choices=["latent", "tanimoto", "dice", "cosine"],
        default="tanimoto",
    )

    p = add("fingerprint", cmd_fingerprint, help="path fingerprint of a molecule")
    p.add_argument("--smiles", required=True)
    p.add_argument("--nbits", type=int, default=2048)
    p.add_argument("--min-path", type=int, default=1, dest="min_path")
    p.add_argument("--max-path", type=int, default=7, dest="max_path")
    p.add_argument("--bits-per-hash", type=int, default=2, dest="bits_per_hash")

    p = add("validate", cmd_validate, help="valence check a molecule")
    p.add_argument("--smiles", required=True)

    p = add("gradcheck", cmd_gradcheck, help="finite-difference gradient check")
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FileNotFoundError, dataio.DataError, dataio.CheckpointError, SmilesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ChemError, tr.TrainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
