"""Acceptance suite: one test per release criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s``.

Note: the contrastive-score regression is expected RED. The upstream
published CMMD table is internally corrupt for the wet_street_lens_droplets
and rain_composition families (see src/wxforge/fixtures/README.md); their
38 C-CMMD values cannot be reproduced from any published inputs. The test
states the criterion faithfully and documents the mismatch rather than
weakening the check.
"""

import csv
import importlib.resources
import io
import itertools
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from wxforge.analysis import (
    bundled_results_table,
    correlate_study,
    pearson,
)
from wxforge.augment import (
    apply_augmentation,
    overcast,
    plan_streaks,
    puddle_mask,
    spec_for_level,
)
from wxforge.embeddings import EmbeddingSet, read_embeddings, write_embeddings
from wxforge.imagecore import DepthMap, ImageRgb, SegMap, luma, saturation_spread
from wxforge.manifest import build_manifest, manifest_to_json
from wxforge.metrics import GaussStats, contrastive, fid, frechet_distance, mmd2
from wxforge.params import (
    FogParams,
    OvercastParams,
    PuddleParams,
    RainStreakParams,
    ReflectionParams,
    SunParams,
    resolve_intensity,
)
from wxforge.procedural import RandomStream, fit_homography, perlin2d
from wxforge.scenes import synthetic_road_scene
from tests.test_augment import zero_composition

TRIGGERS = ("fog", "rain", "snow", "sun")
DATA_DIR = Path(__file__).parent / "data"


@contextmanager
def criterion(name):
    ok = False
    try:
        yield
        ok = True
    finally:
        print(f"\n[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'}")


def fixture_rows(name):
    text = (importlib.resources.files("wxforge")
            .joinpath(f"fixtures/{name}").read_text())
    return list(csv.DictReader(io.StringIO(text)))


class TestContrastiveRegression:
    def test_all_values_match_published_table(self):
        """Recompute C-FID and C-CMMD for all 50 subsets x 4 triggers.

        EXPECTED RED: 38 C-CMMD values (wet_street_lens_droplets and
        rain_composition families) sit on provably corrupt rows of the
        published CMMD table — one row duplicates albu_rain_3 verbatim and
        the wet_street rows reproduce rain_composition's contrastive
        values exactly. All 160 C-FID values and the 160 C-CMMD values of
        the other five families match within the rounding tolerance.
        """
        with criterion("contrastive-regression (all 400 values)"):
            fid_rows = fixture_rows("abdd_fid_scores.csv")
            cmmd_rows = fixture_rows("abdd_cmmd_scores.csv")
            con_rows = {r["augmentation"]: r
                        for r in fixture_rows("abdd_contrastive_scores.csv")}
            start = time.perf_counter()
            mismatches = []
            recomputed = {}
            for metric, rows in (("c_fid", fid_rows), ("c_cmmd", cmmd_rows)):
                for row in rows:
                    name = row["augmentation"]
                    distances = {t: float(row[f"acdc_{t}"]) for t in TRIGGERS}
                    for t in TRIGGERS:
                        got = contrastive(distances, t)
                        recomputed[(metric, name, t)] = got
                        want = float(con_rows[name][f"{metric}_{t}"])
                        if abs(got - want) > 0.02:
                            mismatches.append((metric, name, t, round(got, 3), want))
            elapsed = time.perf_counter() - start
            assert elapsed < 1.0, f"regression took {elapsed:.2f}s (limit 1s)"

            # spot anchors
            assert recomputed[("c_fid", "dense_fog_5", "fog")] == pytest.approx(0.27, abs=0.01)
            assert recomputed[("c_cmmd", "dense_fog_5", "fog")] == pytest.approx(0.79, abs=0.01)
            assert recomputed[("c_fid", "albu_fog_1", "rain")] == pytest.approx(0.41, abs=0.01)

            families = sorted({m[1].rsplit("_", 1)[0] for m in mismatches})
            assert not mismatches, (
                f"{len(mismatches)} of 400 contrastive values diverge from the "
                f"published table (families: {families}; all c_cmmd). This is "
                "an upstream data defect, not a computation error: the "
                "published CMMD rows for these families are corrupt (see "
                "src/wxforge/fixtures/README.md for the evidence). "
                f"First mismatches: {mismatches[:4]}"
            )


class TestCorrelationReproduction:
    def test_three_published_coefficients(self):
        with criterion("correlation-reproduction"):
            table = bundled_results_table()
            start = time.perf_counter()
            fid_study = correlate_study(table, "fid.acdc_rain", "retrain_miou")
            cmmd_study = correlate_study(table, "cmmd.acdc_rain", "retrain_miou")
            fog_study = correlate_study(table, "c_cmmd.fog", "counts.fog")
            elapsed = time.perf_counter() - start
            assert elapsed < 1.0, f"correlations took {elapsed:.2f}s (limit 1s)"
            assert fid_study.result.n == 35
            assert fid_study.result.r == pytest.approx(-0.77, abs=0.05)
            assert cmmd_study.result.r == pytest.approx(-0.53, abs=0.05)
            assert fog_study.result.r == pytest.approx(0.96, abs=0.03)
            assert fog_study.result.p < 1e-15


class TestPValueAccuracy:
    def test_fog_row_p_value_within_factor_two(self):
        with criterion("p-value anchor (r=0.96, n=35)"):
            from wxforge.analysis import _t_two_tailed

            p = _t_two_tailed(0.96, 35)
            assert 7.4e-20 / 2 <= p <= 7.4e-20 * 2

    def test_grid_matches_integration_oracle(self):
        with criterion("p-value vs numerical-integration oracle"):
            import mpmath as mp

            mp.mp.dps = 40

            def oracle(r, n):
                dof = n - 2
                t = mp.sqrt(mp.mpf(r) ** 2 * dof / (1 - mp.mpf(r) ** 2))
                const = mp.gamma((dof + 1) / 2) / (
                    mp.sqrt(dof * mp.pi) * mp.gamma(mp.mpf(dof) / 2)
                )
                tail = mp.quad(
                    lambda u: const * (1 + u * u / dof) ** (-(dof + 1) / 2.0),
                    [t, mp.inf],
                )
                return float(2 * tail)

            from wxforge.analysis import _t_two_tailed

            for r in (0.3, 0.6, 0.9, 0.96, 0.99):
                for n in (5, 10, 35, 100):
                    mine = _t_two_tailed(r, n)
                    want = oracle(r, n)
                    assert mine == pytest.approx(want, rel=5e-4), (r, n)


class TestFrechetOracle:
    def test_diagonal_rotation_and_sampling(self, rng):
        with criterion("frechet oracle"):
            # diagonal closed form, 100 random cases, 1e-9
            for _ in range(100):
                d = int(rng.integers(2, 12))
                mu1, mu2 = rng.normal(size=d, scale=3), rng.normal(size=d, scale=3)
                s1 = rng.uniform(0.1, 9.0, size=d)
                s2 = rng.uniform(0.1, 9.0, size=d)
                got = frechet_distance(GaussStats(mu1, np.diag(s1), 7),
                                       GaussStats(mu2, np.diag(s2), 7))
                want = float(((mu1 - mu2) ** 2).sum()
                             + ((np.sqrt(s1) - np.sqrt(s2)) ** 2).sum())
                assert abs(got - want) <= 1e-9

            # self distance
            data = rng.normal(size=(200, 8)).astype(np.float32)
            es = EmbeddingSet(data, tuple(f"i{k}" for k in range(200)), "t")
            assert fid(es, es) <= 1e-8

            # rotation invariance
            a_stats = GaussStats(rng.normal(size=8),
                                 _rand_psd(rng, 8), 50)
            b_stats = GaussStats(rng.normal(size=8),
                                 _rand_psd(rng, 8), 50)
            base = frechet_distance(a_stats, b_stats)
            q, _ = np.linalg.qr(rng.normal(size=(8, 8)))
            rot = frechet_distance(
                GaussStats(q @ a_stats.mu, q @ a_stats.sigma @ q.T, 50),
                GaussStats(q @ b_stats.mu, q @ b_stats.sigma @ q.T, 50),
            )
            assert abs(rot - base) <= 1e-6

            # two halves of one Gaussian sample
            sample = rng.normal(size=(10_000, 8)).astype(np.float32)
            x = EmbeddingSet(sample[:5000], tuple(f"a{k}" for k in range(5000)), "t")
            y = EmbeddingSet(sample[5000:], tuple(f"b{k}" for k in range(5000)), "t")
            assert fid(x, y) < 1.0


def _rand_psd(rng, d):
    a = rng.normal(size=(d, d))
    return a @ a.T + 0.1 * np.eye(d)


class TestMmdOracle:
    def test_brute_force_and_bounds(self, rng):
        with criterion("mmd oracle"):
            scale = 1000.0
            for nx, ny in [(2, 2), (3, 5), (5, 5), (4, 3)]:
                x = EmbeddingSet(rng.normal(size=(nx, 3)).astype(np.float32),
                                 tuple(f"x{k}" for k in range(nx)), "t")
                y = EmbeddingSet(rng.normal(size=(ny, 3), loc=1).astype(np.float32),
                                 tuple(f"y{k}" for k in range(ny)), "t")
                for estimator in ("unbiased", "biased"):
                    got = mmd2(x, y, sigma=2.0, estimator=estimator, scale=scale)
                    want = _brute_mmd(x.data.astype(np.float64),
                                      y.data.astype(np.float64),
                                      2.0, estimator, scale)
                    assert abs(got - want) <= 1e-12 * scale

            es = EmbeddingSet(rng.normal(size=(20, 4)).astype(np.float32),
                              tuple(f"i{k}" for k in range(20)), "t")
            assert mmd2(es, es, estimator="biased") == 0.0
            for n in (4, 10, 50):
                data = rng.normal(size=(n, 4)).astype(np.float32)
                e = EmbeddingSet(data, tuple(f"i{k}" for k in range(n)), "t")
                assert abs(mmd2(e, e)) <= 2 * scale / n


def _brute_mmd(x, y, sigma, estimator, scale):
    def k(u, v):
        return math.exp(-float(((u - v) ** 2).sum()) / (2 * sigma * sigma))

    nx, ny = len(x), len(y)
    if estimator == "unbiased":
        sxx = sum(k(x[i], x[j]) for i, j in itertools.product(range(nx), repeat=2)
                  if i != j) / (nx * (nx - 1))
        syy = sum(k(y[i], y[j]) for i, j in itertools.product(range(ny), repeat=2)
                  if i != j) / (ny * (ny - 1))
    else:
        sxx = sum(k(x[i], x[j]) for i, j in
                  itertools.product(range(nx), repeat=2)) / nx**2
        syy = sum(k(y[i], y[j]) for i, j in
                  itertools.product(range(ny), repeat=2)) / ny**2
    sxy = sum(k(x[i], y[j]) for i in range(nx) for j in range(ny)) / (nx * ny)
    return scale * (sxx + syy - 2 * sxy)


class TestPaperScaleFixtures:
    def test_fixtures_ship_instead_of_recomputation(self):
        """Absolute published FID/CMMD/mIoU need the original images and
        networks; they ship as provenance-tagged fixtures, with the oracle
        and property suites standing in for desk-scale acceptance."""
        with criterion("paper-scale fixtures shipped"):
            assert len(fixture_rows("abdd_fid_scores.csv")) == 50
            assert len(fixture_rows("abdd_cmmd_scores.csv")) == 50
            assert len(fixture_rows("abdd_contrastive_scores.csv")) == 50
            bdd = fixture_rows("bdd_trigger_distances.csv")
            acdc = fixture_rows("acdc_trigger_distances.csv")
            assert len(bdd) == 5 and len(acdc) == 4
            readme = (importlib.resources.files("wxforge")
                      .joinpath("fixtures/README.md").read_text())
            assert "doi" in readme.lower()


FAMILIES_MONOTONE = [
    "overcast", "dense_fog", "shadow_sunglare", "rain_streaks",
    "wet_street_lens_droplets", "puddles", "rain_composition",
]


class TestAugmentationProperties:
    def test_all_families_on_synthetic_scene(self, scene, tmp_path):
        with criterion("augmentation properties (7 families)"):
            start = time.perf_counter()
            img, depth, seg, boxes = scene
            self._determinism_and_preservation(img, depth, seg, boxes)
            self._worker_count_stability(tmp_path)
            self._identity_at_degenerate_params(img, depth, seg, boxes)
            self._region_locality(img, depth, seg, boxes)
            self._intensity_monotonicity(img, depth, seg, boxes)
            elapsed = time.perf_counter() - start
            assert elapsed < 30.0, f"suite took {elapsed:.1f}s (limit 30s)"

    def _determinism_and_preservation(self, img, depth, seg, boxes):
        seg_before = seg.class_ids.copy()
        for family in FAMILIES_MONOTONE:
            spec = spec_for_level(family, 3, seed=21)
            a = apply_augmentation(spec, img, depth, seg, boxes)
            b = apply_augmentation(spec, img, depth, seg, boxes)
            assert np.array_equal(a.pixels, b.pixels), family
            assert (a.width, a.height) == (img.width, img.height), family
            assert np.array_equal(seg.class_ids, seg_before), family

    def _worker_count_stability(self, tmp_path):
        from tests.conftest import write_scene_dataset
        from wxforge.batch import run_manifest
        from wxforge.manifest import ingest

        paths = write_scene_dataset(tmp_path, image_ids=tuple(f"w{i}" for i in range(6)))
        records = ingest(paths["attributes"], paths["seg_dir"],
                         paths["image_dir"], depth_dir=paths["depth_dir"]).records
        outputs = {}
        for workers in (1, 8):
            out = tmp_path / f"workers{workers}"
            manifest = build_manifest(records, "rain_composition", 3, 13, out)
            run_manifest(manifest, workers=workers)
            outputs[workers] = {
                p.name: p.read_bytes()
                for p in sorted((out / "rain_composition_3").glob("*.png"))
            }
        assert outputs[1] == outputs[8]
        assert len(outputs[1]) == 6

    def _identity_at_degenerate_params(self, img, depth, seg, boxes):
        stream = RandomStream(77, "identity")
        from wxforge.augment import (
            dense_fog,
            puddles,
            rain_composition,
            rain_streaks,
            shadow_sunglare,
            wet_street_lens_droplets,
        )

        cases = {
            "overcast": lambda: overcast(img, seg, 0.0, (150, 150, 154), 0.0),
            "dense_fog": lambda: dense_fog(
                img, depth, seg,
                FogParams(beta=1e-12, airlight=(202, 202, 208),
                          blur_sigma_max=0.0, overcast_amount=0.0)),
            "shadow_sunglare": lambda: shadow_sunglare(
                img, depth, seg, [],
                SunParams(elevation=0.7, glare_sigma=20.0, glare_gain=0.0,
                          saturation_boost=0.0, shadow_strength=0.9), stream),
            "rain_streaks": lambda: rain_streaks(
                img, seg,
                RainStreakParams(count=0.0, length_px=(6.0, 14.0),
                                 angle_mean=1.3, angle_jitter=0.0, alpha=0.3,
                                 streak_color=(205, 205, 215),
                                 overcast_amount=0.0), 0.0, stream),
            "wet_street_lens_droplets": lambda: wet_street_lens_droplets(
                img, depth, seg,
                ReflectionParams(reflectivity=0.0, roughness_blur=0.0,
                                 droplet_count=0, droplet_radius_px=(4.0, 8.0),
                                 droplet_alpha=0.0, overcast_amount=0.0),
                0.0, stream),
            "puddles": lambda: puddles(
                img, depth, seg,
                PuddleParams(noise_frequency=0.045, threshold=1.0,
                             reflectivity=0.7, overcast_amount=0.0),
                0.0, stream),
            "rain_composition": lambda: rain_composition(
                img, depth, seg, [], zero_composition(), stream),
        }
        for family, render in cases.items():
            out = render()
            assert np.array_equal(out.pixels, img.pixels), family

    def _region_locality(self, img, depth, seg, boxes):
        from wxforge.augment import (
            puddles,
            shadow_sunglare,
            wet_street_lens_droplets,
        )

        road = seg.role_mask("road")
        dyn = seg.role_mask("dynamic")
        stream = RandomStream(31, "locality")
        amount = 0.3
        base = overcast(img, seg, amount, (150, 150, 154), amount)

        wet = wet_street_lens_droplets(
            img, depth, seg,
            ReflectionParams(reflectivity=0.8, roughness_blur=1.0,
                             droplet_count=0, droplet_radius_px=(4.0, 8.0),
                             droplet_alpha=0.0, overcast_amount=amount),
            amount, stream)
        assert np.array_equal(wet.pixels[~road], base.pixels[~road])

        pud = puddles(
            img, depth, seg,
            PuddleParams(noise_frequency=0.045, threshold=-0.2,
                         reflectivity=0.8, overcast_amount=amount),
            amount, stream)
        assert np.array_equal(pud.pixels[~road], base.pixels[~road])

        shadowed = shadow_sunglare(
            img, depth, seg, boxes,
            SunParams(elevation=0.6, glare_sigma=20.0, glare_gain=0.0,
                      saturation_boost=0.0, shadow_strength=0.8), stream)
        untouched = ~road & ~dyn
        assert np.array_equal(shadowed.pixels[untouched], img.pixels[untouched])

    def _intensity_monotonicity(self, img, depth, seg, boxes):
        def strictly(seq, direction):
            pairs = list(zip(seq, seq[1:]))
            return (all(a < b for a, b in pairs) if direction == "up"
                    else all(a > b for a, b in pairs))

        # overcast: mean saturation decreasing
        sats = [saturation_spread(apply_augmentation(
            spec_for_level("overcast", L, 7), img, depth, seg, boxes))
            for L in range(1, 6)]
        assert strictly(sats, "down"), sats

        # dense_fog: mean |out - airlight| decreasing
        fogs = []
        for L in range(1, 6):
            p = resolve_intensity("dense_fog", L)
            out = apply_augmentation(spec_for_level("dense_fog", L, 7),
                                     img, depth, seg, boxes)
            air = np.asarray(p.airlight, dtype=float)
            fogs.append(float(np.abs(out.pixels.astype(float) - air).mean()))
        assert strictly(fogs, "down"), fogs

        # shadow_sunglare: sun-region luma increasing
        from wxforge.augment import _sun_position

        sx, sy = _sun_position(seg)
        ys, xs = np.indices((img.height, img.width))
        sun_region = (xs - sx) ** 2 + (ys - sy) ** 2 <= 12**2
        lumas = []
        for L in range(1, 6):
            out = apply_augmentation(spec_for_level("shadow_sunglare", L, 7),
                                     img, depth, seg, boxes)
            lumas.append(float(luma(out.pixels.astype(float))[sun_region].mean()))
        assert strictly(lumas, "up"), lumas

        # rain_streaks: planned particle count increasing
        counts = [len(plan_streaks(img.width, img.height,
                                   resolve_intensity("rain_streaks", L),
                                   RandomStream(7, "rain_streaks")))
                  for L in range(1, 6)]
        assert strictly(counts, "up"), counts

        # wet street: reflectivity rising, and road deviation rising with it
        refl = [resolve_intensity("wet_street_lens_droplets", L).reflectivity
                for L in range(1, 6)]
        assert strictly(refl, "up"), refl
        road = seg.role_mask("road")
        deviations = []
        for L in range(1, 6):
            out = apply_augmentation(
                spec_for_level("wet_street_lens_droplets", L, 7),
                img, depth, seg, boxes)
            deviations.append(float(np.abs(
                out.pixels.astype(float) - img.pixels.astype(float))[road].mean()))
        assert strictly(deviations, "up"), deviations

        # puddles: puddle area increasing (same noise field across levels)
        areas = [int(puddle_mask(seg, resolve_intensity("puddles", L),
                                 RandomStream(7, "puddles")).sum())
                 for L in range(1, 6)]
        assert strictly(areas, "up"), areas

        # rain composition: mean luma departure increasing
        base_luma = luma(img.pixels.astype(float))
        departures = []
        for L in range(1, 6):
            out = apply_augmentation(spec_for_level("rain_composition", L, 7),
                                     img, depth, seg, boxes)
            departures.append(float(np.abs(
                luma(out.pixels.astype(float)) - base_luma).mean()))
        assert strictly(departures, "up"), departures


class TestFogClosedForm:
    def test_half_transmittance_and_zero_depth(self):
        with criterion("fog closed form"):
            from wxforge.augment import dense_fog

            img = ImageRgb(np.full((2, 2, 3), 100, dtype=np.uint8))
            depth = DepthMap(np.full((2, 2), 1.0), max_range_m=math.log(2) / 0.01)
            seg = SegMap(np.zeros((2, 2), dtype=np.uint16), {"sky": (10,)})
            p = FogParams(beta=0.01, airlight=(200, 200, 200),
                          blur_sigma_max=0.0, overcast_amount=0.0)
            out = dense_fog(img, depth, seg, p)
            assert np.array_equal(out.pixels, np.full((2, 2, 3), 150))

            near = DepthMap(np.zeros((2, 2)))
            out2 = dense_fog(img, near, seg, p)
            assert np.array_equal(out2.pixels, img.pixels)


class TestGeometry:
    def test_homography_and_perlin(self, rng):
        with criterion("geometry (homography + perlin)"):
            from wxforge.procedural import _collinearity_margin

            done = 0
            while done < 1000:
                src = rng.uniform(0, 100, size=(4, 2))
                dst = rng.uniform(0, 100, size=(4, 2))
                if (_collinearity_margin(src) < 50
                        or _collinearity_margin(dst) < 50):
                    continue
                hom = fit_homography(src, dst)
                assert np.abs(hom.apply(src) - dst).max() < 1e-6
                done += 1

            stream = RandomStream(5, "acceptance-noise")
            for x, y in [(0, 0), (3, 4), (-2, 7), (11, -6)]:
                assert perlin2d(float(x), float(y), 1.0, 1, stream) == pytest.approx(
                    0.0, abs=1e-12)
            xs = rng.uniform(-100, 100, size=10_000)
            ys = rng.uniform(-100, 100, size=10_000)
            values = perlin2d(xs, ys, 0.17, 1, stream)
            assert values.min() >= -1.0 and values.max() <= 1.0
            assert values.min() < -0.2 and values.max() > 0.2


class TestFormats:
    def test_wxe1_and_manifest_determinism(self, tmp_path):
        with criterion("formats (WXE1 golden + manifest determinism)"):
            es = EmbeddingSet(
                np.array([[0.5, -1.5], [2.0, 0.25]], dtype=np.float32),
                ("aa", "b"), "gt",
            )
            out = tmp_path / "roundtrip.wxe"
            write_embeddings(es, out)
            again = read_embeddings(out)
            assert again.ids == es.ids and again.space_tag == es.space_tag
            assert np.array_equal(again.data, es.data)

            golden = DATA_DIR / "golden.wxe"
            assert golden.exists(), "committed golden file missing"
            assert out.read_bytes() == golden.read_bytes()

            from wxforge.manifest import SourceRecord

            records = [
                SourceRecord(image_id=f"img{i}", image_path=f"i/{i}.png",
                             seg_path=f"s/{i}.png", boxes_path="det.json",
                             attributes={"weather": "clear",
                                         "timeofday": "daytime"})
                for i in range(4)
            ]
            a = manifest_to_json(build_manifest(records, "dense_fog", 2, 3, "out"))
            b = manifest_to_json(build_manifest(records, "dense_fog", 2, 3, "out"))
            assert a == b and a.encode() == b.encode()
