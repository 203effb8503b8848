#!/usr/bin/env python3
"""End-to-end pipeline demo on synthetic sources with the stub gateway.

Generates a small JSONL corpus of paired instruction/code items, writes a
config file, runs every stage (ingest -> decompose -> synth -> validate ->
reward -> export), and prints the run summary plus where the exports landed.

Usage:
    python scripts/demo_pipeline.py [--workdir demo_out] [--items 40]
"""

import argparse
import json
import shutil
from pathlib import Path

import yaml

from vizforge.config import load_config
from vizforge.gateway import StubGateway
from vizforge.pipeline import run_pipeline
from vizforge.store import CorpusStore

PLOT_CODE = """\
import matplotlib.pyplot as plt

xs = list(range(10))
ys = [x * {slope} + {offset} for x in xs]
plt.plot(xs, ys, marker="o")
plt.title("series {i}")
plt.savefig("figure.png")
"""


def write_sources(workdir: Path, n_items: int) -> Path:
    src = workdir / "sources" / "plots.jsonl"
    src.parent.mkdir(parents=True, exist_ok=True)
    with src.open("w", encoding="utf-8") as fh:
        for i in range(n_items):
            item = {
                "instruction": f"Plot series {i} as a line chart with markers.",
                "code": PLOT_CODE.format(slope=i % 5 + 1, offset=i % 3, i=i),
            }
            fh.write(json.dumps(item) + "\n")
    return src


def write_config(workdir: Path, src: Path) -> Path:
    data = {
        "corpus_dir": str(workdir / "corpus"),
        "threshold": "4.0",
        "seed": 7,
        "concepts": {
            "matplotlib": ["log-scale axes", "error bars", "subplot grids"],
        },
        "sources": [{"source_type": "matplotlib", "locator": str(src)}],
    }
    path = workdir / "config.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", type=Path, default=Path("demo_out"))
    ap.add_argument("--items", type=int, default=40)
    ap.add_argument("--fresh", action="store_true", help="wipe the workdir first")
    args = ap.parse_args()

    if args.fresh and args.workdir.exists():
        shutil.rmtree(args.workdir)
    args.workdir.mkdir(parents=True, exist_ok=True)

    src = write_sources(args.workdir, args.items)
    config_path = write_config(args.workdir, src)
    config = load_config(config_path)

    print(f"config:  {config_path}")
    print(f"(equivalent CLI: vizforge --config {config_path} --stub-gateway run)\n")

    summary = run_pipeline(config, StubGateway())
    print(json.dumps(summary, indent=2))

    store = CorpusStore(Path(config.corpus_dir))
    by_status: dict[str, int] = {}
    for rec in store.iter_latest():
        by_status[rec.status] = by_status.get(rec.status, 0) + 1
    print("\nrecords by status:", json.dumps(by_status, sort_keys=True))

    exports = sorted((Path(config.corpus_dir) / "export").glob("*.jsonl"))
    for path in exports:
        count = sum(1 for line in path.read_text(encoding="utf-8").splitlines() if line)
        print(f"export: {path} ({count} samples)")


if __name__ == "__main__":
    main()
