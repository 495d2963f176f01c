"""
FID and CMMD on controlled Gaussian data
========================================

Both metrics compare image sets through feature embeddings, but they react
differently to sample size: the Fréchet distance needs enough samples to
estimate a covariance (and is biased upward below that), while the kernel
MMD is usable from a handful of points. This demo measures both on samples
whose true distance is known in closed form.
"""

import numpy as np

from wxforge.embeddings import EmbeddingSet
from wxforge.metrics import fid, mmd2

rng = np.random.default_rng(0)
dim = 16
shift = 1.0

# True squared Fréchet distance between N(0, I) and N(shift, I): dim * shift^2
analytic = dim * shift**2
print(f"analytic Fréchet distance: {analytic:.2f}")
print(f"{'n':>6}  {'FID':>10}  {'CMMD':>10}")
for n in (32, 128, 512, 4096):
    a = EmbeddingSet(rng.normal(size=(n, dim)).astype(np.float32),
                     tuple(f"a{i}" for i in range(n)), "demo")
    b = EmbeddingSet((shift + rng.normal(size=(n, dim))).astype(np.float32),
                     tuple(f"b{i}" for i in range(n)), "demo")
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        f = fid(a, b)
    m = mmd2(a, b)
    print(f"{n:>6}  {f:>10.2f}  {m:>10.3f}")

print()
print("FID converges toward the analytic value from above; the unbiased")
print("MMD estimate is already stable at small n, which is why sparse")
print("trigger sets (like real fog imagery) favor the kernel metric.")
