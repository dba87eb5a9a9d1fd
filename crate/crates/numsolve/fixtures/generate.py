#!/usr/bin/env python3
"""Regenerate the synthetic topology fixtures.

Each fixture is a ring over all nodes (guaranteeing strong connectivity)
plus seeded random chords, with every undirected edge listed in both
directions. Capacities are integers drawn uniformly from [10, 100] per
undirected edge.
"""
import random


def generate(path, nodes, undirected_edges, seed, header):
    rng = random.Random(seed)
    edges = [(i, (i + 1) % nodes) for i in range(nodes)]
    seen = {frozenset(e) for e in edges}
    while len(edges) < undirected_edges:
        a, b = rng.randrange(nodes), rng.randrange(nodes)
        if a == b or frozenset((a, b)) in seen:
            continue
        seen.add(frozenset((a, b)))
        edges.append((a, b))
    with open(path, "w") as out:
        out.write(header)
        for a, b in edges:
            cap = rng.randint(10, 100)
            out.write(f"{a} {b} {cap}\n")
            out.write(f"{b} {a} {cap}\n")


if __name__ == "__main__":
    generate(
        "geant_like.txt", 23, 37, 2004,
        "# GEANT-shaped synthetic topology: 23 nodes, 74 directed links.\n"
        "# Generated by generate.py (seed 2004); capacities uniform in [10,100].\n",
    )
    generate(
        "rf1221_like.txt", 104, 151, 1221,
        "# RF1221-shaped synthetic topology: 104 nodes, 302 directed links.\n"
        "# Generated by generate.py (seed 1221); capacities uniform in [10,100].\n",
    )
