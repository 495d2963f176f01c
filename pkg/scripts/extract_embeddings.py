#!/usr/bin/env python3
"""Reference embedding extractor for the wxforge WXE1 contract.

Usage (matches the ``wxforge embed --extractor`` template contract):

    python scripts/extract_embeddings.py --images {input_list} --out {output} \
        --space-tag inception-pool3

Reads one image path per line from ``--images`` and writes a WXE1 file.
Supported spaces:

- ``inception-pool3``: torchvision Inceptionv3 penultimate pooling, 2048-d
  (the conventional FID embedding).
- ``clip-image``: transformers CLIP ViT-B/32 image encoder, 512-d (the
  conventional CMMD embedding).

Model weights download on first use; this script is a sidecar and its heavy
dependencies (torch, torchvision, transformers) are deliberately not part
of the package requirements.
"""

import argparse
import sys
from pathlib import Path

import numpy as np


def load_paths(list_file):
    return [ln.strip() for ln in Path(list_file).read_text().splitlines() if ln.strip()]


def extract_inception(paths, device):
    import torch
    from PIL import Image
    from torchvision import models, transforms

    model = models.inception_v3(weights=models.Inception_V3_Weights.DEFAULT)
    model.fc = torch.nn.Identity()
    model.eval().to(device)
    prep = transforms.Compose([
        transforms.Resize((299, 299)),
        transforms.ToTensor(),
        transforms.Normalize(mean=[0.485, 0.456, 0.406],
                             std=[0.229, 0.224, 0.225]),
    ])
    out = []
    with torch.no_grad():
        for path in paths:
            img = prep(Image.open(path).convert("RGB")).unsqueeze(0).to(device)
            out.append(model(img).squeeze(0).cpu().numpy())
    return np.stack(out).astype(np.float32)


def extract_clip(paths, device):
    import torch
    from PIL import Image
    from transformers import CLIPModel, CLIPProcessor

    name = "openai/clip-vit-base-patch32"
    model = CLIPModel.from_pretrained(name).eval().to(device)
    processor = CLIPProcessor.from_pretrained(name)
    out = []
    with torch.no_grad():
        for path in paths:
            inputs = processor(images=Image.open(path).convert("RGB"),
                               return_tensors="pt").to(device)
            out.append(model.get_image_features(**inputs).squeeze(0).cpu().numpy())
    return np.stack(out).astype(np.float32)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--images", required=True, help="file with one image path per line")
    parser.add_argument("--out", required=True, help="output WXE1 file")
    parser.add_argument("--space-tag", default="inception-pool3",
                        choices=["inception-pool3", "clip-image"])
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args()

    paths = load_paths(args.images)
    if not paths:
        print("no input images", file=sys.stderr)
        return 1
    if args.space_tag == "inception-pool3":
        data = extract_inception(paths, args.device)
    else:
        data = extract_clip(paths, args.device)

    from wxforge.embeddings import EmbeddingSet, write_embeddings

    ids = tuple(Path(p).stem for p in paths)
    write_embeddings(EmbeddingSet(data, ids, args.space_tag), args.out)
    print(f"wrote {len(ids)} embeddings (dim {data.shape[1]}) -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
