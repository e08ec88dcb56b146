"""Regenerates the bundled annotated test graph (synthetic_k11.*).

200 nodes in 11 groups of unequal size. Within-group edge rates vary by
group, between-group rates by pair, so per-block estimates have something to
borrow from each other. Output is deterministic for a given numpy version.
"""
import numpy as np

rng = np.random.default_rng(20240611)
K, n = 11, 200
sizes = np.array([40, 32, 26, 22, 18, 15, 13, 11, 9, 8, 6])
assert sizes.sum() == n
labels = np.repeat(np.arange(K), sizes)
rng.shuffle(labels)

theta = rng.uniform(0.01, 0.05, size=(K, K))
theta = np.triu(theta) + np.triu(theta, 1).T
np.fill_diagonal(theta, rng.uniform(0.25, 0.55, size=K))

names = [f"v{i:03d}" for i in range(n)]
with open("synthetic_k11_edges.txt", "w") as out:
    out.write("# synthetic annotated graph: 200 nodes, 11 groups\n")
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < theta[labels[i], labels[j]]:
                out.write(f"{names[i]} {names[j]}\n")
with open("synthetic_k11_labels.txt", "w") as out:
    for i in range(n):
        out.write(f"{names[i]} g{labels[i] + 1:02d}\n")
