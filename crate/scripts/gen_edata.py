"""Builds edata-style flexible job shop instances from classic job shop
instances: each operation keeps its machine and gains each other machine
with a small probability, with the same duration everywhere.

usage: gen_edata.py BENCHMARK_JSON OUT_DIR [--seed N]

BENCHMARK_JSON is job_shop_lib's benchmark_instances.json (from the
job_shop_lib wheel, path job_shop_lib/benchmarking/benchmark_instances.json).
"""

import argparse
import json
import random
from pathlib import Path

NAMES = ["ft06"] + [f"la{i:02d}" for i in range(1, 10)]
EXTRA_PROB = 0.15 / 4  # about 1.15 machines per operation on 5 machines


def flexible(inst, rng):
    durations = inst["duration_matrix"]
    machines = inst["machines_matrix"]
    n_machines = 1 + max(m for row in machines for m in row)
    lines = [f"{len(durations)} {n_machines}"]
    lb = 0
    for drow, mrow in zip(durations, machines):
        toks = [str(len(drow))]
        for d, m in zip(drow, mrow):
            alts = [m] + [k for k in range(n_machines) if k != m and rng.random() < EXTRA_PROB]
            toks.append(str(len(alts)))
            for k in sorted(alts):
                toks += [str(k + 1), str(d)]
        lines.append(" ".join(toks))
        lb = max(lb, sum(drow))
    return "\n".join(lines) + "\n", lb


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("benchmark_json")
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    data = json.loads(Path(args.benchmark_json).read_text())
    out = Path(args.out_dir)
    (out / "edata").mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    manifest = ["# instance lower-bound (longest job; durations do not depend on the machine)"]
    for name in NAMES:
        text, lb = flexible(data[name], rng)
        (out / "edata" / f"{name}.fjs").write_text(text)
        manifest.append(f"edata/{name}.fjs {lb}")
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n")


if __name__ == "__main__":
    main()
