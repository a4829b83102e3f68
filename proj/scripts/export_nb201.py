#!/usr/bin/env python3
"""Export a NAS-Bench-201 accuracy table to the dagpo benchmark format.

Produces one JSON object per line:

    {"key": "nb201:{\"n\":4,...}", "metrics": {"c10": 0.9161, ...}}

The key embeds the cell as a canonical 4-node DAG: node labels are all zero
and each of the 6 upper-triangle edge slots carries the operation category.
Operations map to categories in this fixed order:

    1=none  2=skip_connect  3=nor_conv_1x1  4=nor_conv_3x3  5=avg_pool_3x3

Accuracies are emitted as fractions in [0, 1].

Requires the `nats_bench` package (pip install nats-bench) and a local copy
of the NATS-Bench topology file, e.g. NATS-tss-v1_0-3ffb9-simple.
"""

import argparse
import json
import re
import sys

OPS = ["none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"]
OP_CATEGORY = {name: i + 1 for i, name in enumerate(OPS)}

# NB201 arch strings list edges per target node as |op~source|; this is the
# (source, target) order in which they appear.
EDGE_ORDER = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)]

DATASET_IDS = {
    "cifar10-valid": "c10",
    "cifar100": "c100",
    "ImageNet16-120": "in16",
}


def parse_arch(arch: str) -> list:
    """Returns the 6 edge categories of an NB201 arch string in
    (source, target) lexicographic cell order."""
    ops = re.findall(r"([^|~+]+)~(\d+)", arch)
    if len(ops) != 6:
        raise ValueError(f"expected 6 ops in arch string, got {len(ops)}: {arch}")
    by_cell = {}
    for (name, source), (expect_src, target) in zip(ops, EDGE_ORDER):
        if int(source) != expect_src:
            raise ValueError(f"unexpected edge order in arch string: {arch}")
        by_cell[(expect_src, target)] = OP_CATEGORY[name]
    cells = sorted(by_cell)
    return [by_cell[c] for c in cells]


def arch_key(edge_cats: list) -> str:
    """Canonical dagpo key: space name plus the compact DAG JSON."""
    n = 4
    edges = [[0] * n for _ in range(n)]
    cell = 0
    for i in range(n):
        for j in range(i + 1, n):
            edges[i][j] = edge_cats[cell]
            cell += 1
    dag = {"n": n, "node_labels": [0] * n, "edges": edges}
    return "nb201:" + json.dumps(dag, separators=(",", ":"))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("benchmark", help="path to the NATS-Bench topology file/dir")
    ap.add_argument("--out", default="nb201_table.jsonl", help="output path")
    ap.add_argument("--hp", default="200", choices=["12", "200"],
                    help="training epochs of the tabulated runs (200 = full)")
    args = ap.parse_args()

    try:
        from nats_bench import create
    except ImportError:
        print("error: the nats_bench package is required (pip install nats-bench)",
              file=sys.stderr)
        return 1

    api = create(args.benchmark, "tss", fast_mode=True, verbose=False)
    total = len(api)
    if total != 15625:
        print(f"warning: expected 15625 architectures, benchmark reports {total}",
              file=sys.stderr)

    with open(args.out, "w", encoding="utf-8") as out:
        for index in range(total):
            arch = api.arch(index)
            key = arch_key(parse_arch(arch))
            metrics = {}
            for dataset, short in DATASET_IDS.items():
                info = api.get_more_info(index, dataset, hp=args.hp, is_random=False)
                acc = info.get("valid-accuracy")
                if acc is None:
                    continue
                metrics[short] = round(acc / 100.0, 6)
            out.write(json.dumps({"key": key, "metrics": metrics},
                                 separators=(",", ":")) + "\n")
            if (index + 1) % 1000 == 0:
                print(f"{index + 1}/{total}", file=sys.stderr)

    print(f"wrote {total} rows to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
