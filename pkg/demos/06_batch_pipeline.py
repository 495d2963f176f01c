"""
End-to-end batch pipeline
=========================

The full flow on a disposable synthetic dataset, exactly as the ``wxforge``
CLI drives it: ingest -> filter -> manifest -> augment -> embed (with a toy
extractor) -> cross distance matrix -> contrastive column -> report.

The toy extractor embeds each image as its 12-bin color histogram; it obeys
the same subprocess + WXE1 contract a real Inception/CLIP extractor uses,
so everything downstream is the production path.
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from conftest import write_scene_dataset  # the shared synthetic dataset writer

from wxforge.batch import run_manifest
from wxforge.cli import run
from wxforge.manifest import build_manifest, filter_candidates, ingest

work = Path(tempfile.mkdtemp(prefix="wxforge-demo-"))
print(f"working in {work}")

# 1. ingest + filter
paths = write_scene_dataset(work, image_ids=tuple(f"scene_{i}" for i in range(4)))
result = ingest(paths["attributes"], paths["seg_dir"], paths["image_dir"],
                depth_dir=paths["depth_dir"])
records = filter_candidates(result.records, {"clear", "overcast"}, {"daytime"})
print(f"ingested {len(records)} daytime fair-weather records")

# 2. manifest + batch render for two subsets
for family, level in (("dense_fog", 4), ("rain_streaks", 2)):
    manifest = build_manifest(records, family, level, seed_base=11,
                              out_dir=work / "aug")
    written = run_manifest(manifest, workers=4)
    print(f"rendered {len(written)} images into {written[0].parent}")

# 3. toy extractor (same contract as a real one)
extractor = work / "histogram_extractor.py"
extractor.write_text('''
import argparse, sys
from pathlib import Path
import numpy as np
from PIL import Image
from wxforge.embeddings import EmbeddingSet, write_embeddings

p = argparse.ArgumentParser()
p.add_argument("--images"); p.add_argument("--out")
a = p.parse_args()
paths = [l for l in Path(a.images).read_text().splitlines() if l.strip()]
rows = []
for path in paths:
    px = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0
    hist = [np.histogram(px[..., c], bins=4, range=(0, 1))[0] for c in range(3)]
    rows.append(np.concatenate(hist) / px[..., 0].size)
es = EmbeddingSet(np.array(rows, dtype=np.float32),
                  tuple(Path(p).stem for p in paths), "color-hist-12")
write_embeddings(es, a.out)
''')

template = f"{sys.executable} {extractor} --images {{input_list}} --out {{output}}"
for subset in ("dense_fog_4", "rain_streaks_2"):
    images = sorted((work / "aug" / subset).glob("scene_*.png"))
    listing = work / f"{subset}.txt"
    listing.write_text("\n".join(str(p) for p in images))
    code = run(["embed", "--extractor", template,
                "--images", str(listing), "--out", str(work / f"{subset}.wxe")])
    assert code == 0
# "trigger" embeddings: the unaugmented sources
source_list = work / "sources.txt"
source_list.write_text("\n".join(str(p) for p in sorted(paths["image_dir"].glob("*.png"))))
run(["embed", "--extractor", template, "--images", str(source_list),
     "--out", str(work / "clear.wxe")])

# 4. distance matrix + contrastive + report
run(["metrics",
     "--set", f"dense_fog_4={work / 'dense_fog_4.wxe'}",
     "--set", f"rain_streaks_2={work / 'rain_streaks_2.wxe'}",
     "--trigger", f"clear={work / 'clear.wxe'}",
     "--trigger", f"fog={work / 'dense_fog_4.wxe'}",
     "--which", "cmmd", "--out", str(work / "matrix.csv")])
run(["contrastive", "--distances", str(work / "matrix.csv"), "--target", "fog"])

grouping = work / "groups.json"
grouping.write_text(json.dumps({"dense_fog_4": "aug", "rain_streaks_2": "aug"}))
run(["report", "--distances", str(work / "matrix.csv"),
     "--grouping", str(grouping), "--out-prefix", str(work / "spider")])
print((work / "spider.txt").read_text())

shutil.rmtree(work)
print("demo artifacts cleaned up")
