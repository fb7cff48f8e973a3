#!/usr/bin/env python3
"""Regenerate the bundled desk-scale corpus CSV (committed artifact)."""

import csv
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from molvae.corpus import generate_corpus  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "src" / "molvae" / "data" / "corpus.csv"


def main() -> None:
    rows = generate_corpus()
    with OUT.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["smiles", "heavy_atoms"])
        writer.writerows(rows)
    print(f"wrote {OUT} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
