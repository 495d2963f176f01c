"""
Contrastive scores and minimal-distance reports
===============================================

A set can sit close to its target trigger yet equally close to every other
trigger — useless for fooling a weather classifier. The contrastive score
rewards proximity to the target *relative* to the other triggers:

    sum_{j != target} d(t_j) / d(target) - (n - 1)

This demo recomputes contrastive scores from the bundled published distance
tables and builds the minimal-distance (spider chart) series comparing the
augmentation toolkits against real trigger data.
"""

from wxforge.analysis import bundled_results_table, is_abdd_subset, min_distance_report
from wxforge.metrics import DistanceMatrix, contrastive
import numpy as np

table = bundled_results_table()
triggers = ("fog", "rain", "snow", "sun")

print("contrastive FID toward each trigger (top subset per trigger):")
for target in triggers:
    best_name, best_score = None, -np.inf
    for i, name in enumerate(table.names):
        distances = {t: table.column(f"fid.acdc_{t}")[i] for t in triggers}
        score = contrastive(distances, target)
        if score > best_score:
            best_name, best_score = name, score
    print(f"  {target:>5}: {best_name} ({best_score:+.2f})")

# Minimal distance per toolkit to the real BDD trigger sets
names = list(table.names)
cols = ("bdd_clear", "bdd_overcast", "bdd_rain", "bdd_snow")
fid_grid = np.column_stack([table.column(f"fid.{c}") for c in cols])
matrix = DistanceMatrix(row_sets=tuple(names), col_triggers=cols, fid=fid_grid)
grouping = {n: ("augmented-bdd" if is_abdd_subset(n) else "albumentations")
            for n in names}
report = min_distance_report(matrix, grouping)

print("\nminimal FID to real BDD triggers (spider-chart series):")
print(report.to_text())
