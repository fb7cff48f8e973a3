"""Dataset ingestion (CSV / .smi), checkpoint persistence, bundled corpus."""

from __future__ import annotations

import base64
import csv
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .chem import MolGraph
from .numkernel import ParamStore
from .smiles import SmilesError, parse_smiles
from .train import TrainConfig

CHECKPOINT_VERSION = 1


class DataError(ValueError):
    pass


class BadHeader(DataError):
    pass


class EmptyAfterFiltering(DataError):
    pass


class CheckpointError(ValueError):
    pass


class VersionMismatch(CheckpointError):
    pass


class CorruptTensor(CheckpointError):
    pass


@dataclass(frozen=True)
class Record:
    smiles: str
    mol: MolGraph
    properties: dict[str, float]


@dataclass
class Dataset:
    records: list[Record]
    skipped: dict[str, int] = field(default_factory=dict)
    source: str = ""

    def __len__(self) -> int:
        return len(self.records)

    @property
    def skipped_count(self) -> int:
        return sum(self.skipped.values())

    def property_names(self) -> list[str]:
        return list(self.records[0].properties) if self.records else []

    def split(self, frac: float, seed: int) -> tuple["Dataset", "Dataset"]:
        """Seeded shuffle split into (first frac, rest)."""
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(self.records))
        cut = int(round(frac * len(self.records)))
        first = [self.records[i] for i in order[:cut]]
        rest = [self.records[i] for i in order[cut:]]
        return (
            Dataset(first, source=self.source),
            Dataset(rest, source=self.source),
        )


def load_csv(path: str | Path, max_atoms: int = 20) -> Dataset:
    """Read a `smiles,<prop>...` CSV, skipping unparseable or oversize rows."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    skipped: dict[str, int] = {}
    records: list[Record] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise BadHeader(f"{path}: empty file")
        if not header or header[0].strip().lower() != "smiles":
            raise BadHeader(f"{path}: header must begin with 'smiles'")
        prop_names = [h.strip() for h in header[1:]]
        for row in reader:
            if not row or not row[0].strip():
                continue
            smi = row[0].strip()
            try:
                mol = parse_smiles(smi)
            except SmilesError:
                skipped["parse_error"] = skipped.get("parse_error", 0) + 1
                continue
            if mol.n_atoms > max_atoms:
                skipped["oversize"] = skipped.get("oversize", 0) + 1
                continue
            try:
                props = {
                    name: float(row[k + 1]) for k, name in enumerate(prop_names)
                }
            except (IndexError, ValueError):
                skipped["bad_property"] = skipped.get("bad_property", 0) + 1
                continue
            records.append(Record(smiles=smi, mol=mol, properties=props))
    if not records:
        raise EmptyAfterFiltering(f"{path}: no usable rows")
    return Dataset(records=records, skipped=skipped, source=str(path))


def load_smi(path: str | Path, max_atoms: int = 20) -> Dataset:
    """Read a one-SMILES-per-line list (optional trailing name, no properties)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    skipped: dict[str, int] = {}
    records: list[Record] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        smi = line.split()[0]
        try:
            mol = parse_smiles(smi)
        except SmilesError:
            skipped["parse_error"] = skipped.get("parse_error", 0) + 1
            continue
        if mol.n_atoms > max_atoms:
            skipped["oversize"] = skipped.get("oversize", 0) + 1
            continue
        records.append(Record(smiles=smi, mol=mol, properties={}))
    if not records:
        raise EmptyAfterFiltering(f"{path}: no usable rows")
    return Dataset(records=records, skipped=skipped, source=str(path))


def bundled_corpus_path() -> Path:
    """Path of the packaged desk-scale corpus CSV."""
    return Path(resources.files("molvae").joinpath("data/corpus.csv"))


def load_bundled_corpus(max_atoms: int = 20) -> Dataset:
    return load_csv(bundled_corpus_path(), max_atoms=max_atoms)


# -- checkpoints ---------------------------------------------------------


def _encode_tensor(arr: np.ndarray) -> dict:
    le = arr.astype("<f8", copy=False)
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(le.tobytes()).decode("ascii"),
    }


def _decode_tensor(name: str, obj: dict) -> np.ndarray:
    shape = tuple(int(s) for s in obj["shape"])
    raw = base64.b64decode(obj["data"])
    expected = int(np.prod(shape)) * 8 if shape else 8
    if len(raw) != expected:
        raise CorruptTensor(
            f"tensor {name!r}: {len(raw)} bytes, expected {expected}"
        )
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def save_checkpoint(params: ParamStore, config: TrainConfig, path: str | Path) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "tensors": {name: _encode_tensor(t.data) for name, t in params.items()},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ParamStore, TrainConfig]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from exc
    version = doc.get("version")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"{path}: checkpoint version {version}, this build reads {CHECKPOINT_VERSION}"
        )
    config = TrainConfig(**doc["config"])
    params = ParamStore()
    for name, obj in doc["tensors"].items():
        params.add(name, _decode_tensor(name, obj))
    return params, config
