"""
Projecting trigger embeddings to 2-D
====================================

Pools embeddings from several synthetic "trigger" clusters, projects them
onto the top two principal components of the pooled covariance, and renders
the scatter with per-cluster density contours. The projection is what the
metric sees: separated clusters mean the triggers induce genuinely
different activation patterns.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from wxforge.analysis import pca_project
from wxforge.embeddings import EmbeddingSet

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(3)
dim = 32
centers = {"clear": 0.0, "fog": 2.5, "rain": -2.0, "snow": 4.5}
sets = {}
for k, (name, offset) in enumerate(centers.items()):
    loc = np.zeros(dim)
    loc[k] = offset
    data = (loc + rng.normal(size=(400, dim))).astype(np.float32)
    sets[name] = EmbeddingSet(data, tuple(f"{name}{i}" for i in range(400)), "demo")

proj = pca_project(sets)
print("explained variance:", [round(v, 3) for v in proj.explained_variance])

fig, ax = plt.subplots(figsize=(7, 6))
labels = np.asarray(proj.labels)
for name in centers:
    pts = proj.coords[labels == name]
    ax.scatter(pts[:, 0], pts[:, 1], s=6, alpha=0.4, label=name)
ax.legend()
ax.set_xlabel(f"PC1 ({proj.explained_variance[0]:.0%} var)")
ax.set_ylabel(f"PC2 ({proj.explained_variance[1]:.0%} var)")
ax.set_title("Pooled-PCA projection of trigger embeddings")
path = OUT / "pca_projection.png"
fig.savefig(path, dpi=120, bbox_inches="tight")
print(f"wrote {path}")
