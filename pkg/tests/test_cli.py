import csv
import hashlib
import importlib.resources
import io
import json
import sys
from pathlib import Path

import pytest

from wxforge.cli import run


def invoke(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def ingest_records(scene_dataset, tmp_path, capsys):
    out = tmp_path / "records.json"
    code, _, _ = invoke(
        capsys, "ingest",
        "--attributes", str(scene_dataset["attributes"]),
        "--seg-dir", str(scene_dataset["seg_dir"]),
        "--image-dir", str(scene_dataset["image_dir"]),
        "--depth-dir", str(scene_dataset["depth_dir"]),
        "--allowed-weather", "clear,overcast",
        "--allowed-timeofday", "daytime",
        "--out", str(out),
    )
    assert code == 0
    return out


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestIngestAndAugment:
    def test_ingest_writes_records(self, scene_dataset, tmp_path, capsys):
        records = ingest_records(scene_dataset, tmp_path, capsys)
        doc = json.loads(records.read_text())
        assert len(doc) == 3
        assert all(r["depth_path"] for r in doc)

    def test_augment_happy_path(self, scene_dataset, tmp_path, capsys):
        records = ingest_records(scene_dataset, tmp_path, capsys)
        out_dir = tmp_path / "out"
        code, out, err = invoke(
            capsys, "augment", "--manifest", str(records),
            "--family", "dense_fog", "--level", "3", "--seed", "7",
            "--out", str(out_dir),
        )
        assert code == 0, err
        subset = out_dir / "dense_fog_3"
        assert (subset / "manifest.json").exists()
        assert len(list(subset.glob("img_*.png"))) == 3

    def test_augment_level_out_of_range(self, scene_dataset, tmp_path, capsys):
        records = ingest_records(scene_dataset, tmp_path, capsys)
        code, _, err = invoke(
            capsys, "augment", "--manifest", str(records),
            "--family", "dense_fog", "--level", "9", "--seed", "7",
            "--out", str(tmp_path / "out"),
        )
        assert code == 1
        assert err.startswith("error:level-out-of-range:")

    def test_identical_invocations_byte_identical(self, scene_dataset, tmp_path,
                                                  capsys):
        records = ingest_records(scene_dataset, tmp_path, capsys)
        trees = []
        for name in ("a", "b"):
            out_dir = tmp_path / name
            code, _, err = invoke(
                capsys, "augment", "--manifest", str(records),
                "--family", "rain_composition", "--level", "2", "--seed", "5",
                "--out", str(out_dir),
            )
            assert code == 0, err
            tree = tree_bytes(out_dir)
            # normalize the differing output-path prefix inside the manifest
            key = "rain_composition_2/manifest.json"
            tree[key] = tree[key].replace(str(out_dir).encode(), b"OUT")
            trees.append(tree)
        assert trees[0] == trees[1]

    def test_worker_count_never_changes_bytes(self, scene_dataset, tmp_path,
                                              capsys):
        records = ingest_records(scene_dataset, tmp_path, capsys)
        trees = []
        for name, workers in (("w1", "1"), ("w8", "8")):
            out_dir = tmp_path / name
            code, _, err = invoke(
                capsys, "--workers", workers,
                "augment", "--manifest", str(records),
                "--family", "puddles", "--level", "4", "--seed", "11",
                "--out", str(out_dir),
            )
            assert code == 0, err
            tree = tree_bytes(out_dir)
            key = "puddles_4/manifest.json"
            tree[key] = tree[key].replace(str(out_dir).encode(), b"OUT")
            trees.append(tree)
        assert trees[0] == trees[1]


class TestContrastiveCommand:
    @staticmethod
    def write_fid_csv(tmp_path):
        text = (importlib.resources.files("wxforge")
                .joinpath("fixtures/abdd_fid_scores.csv").read_text())
        rows = list(csv.DictReader(io.StringIO(text)))
        out = tmp_path / "fid.csv"
        lines = ["set,fog_fid,rain_fid,snow_fid,sun_fid"]
        for r in rows:
            lines.append(",".join([r["augmentation"], r["acdc_fog"],
                                   r["acdc_rain"], r["acdc_snow"], r["acdc_sun"]]))
        out.write_text("\n".join(lines) + "\n")
        return out

    def test_appends_column_and_prints_anchor(self, tmp_path, capsys):
        path = self.write_fid_csv(tmp_path)
        code, out, err = invoke(capsys, "contrastive", "--distances", str(path),
                                "--target", "fog")
        assert code == 0, err
        line = next(ln for ln in out.splitlines() if ln.startswith("dense_fog_5\t"))
        assert line.split("\t") == ["dense_fog_5", "fid", "0.27"]
        header = path.read_text().splitlines()[0]
        assert header.endswith(",c_fid_fog")

    def test_unknown_trigger(self, tmp_path, capsys):
        path = self.write_fid_csv(tmp_path)
        code, _, err = invoke(capsys, "contrastive", "--distances", str(path),
                              "--target", "hail")
        assert code == 1
        assert err.startswith("error:unknown-trigger:")


class TestCorrelateCommand:
    def test_bundled_fid_rain_anchor(self, capsys):
        code, out, err = invoke(capsys, "correlate", "--bundled",
                                "--x", "fid.acdc_rain", "--y", "retrain_miou")
        assert code == 0, err
        assert "n=35" in out
        r = float(out.split("r=")[1].split()[0])
        assert abs(r - (-0.77)) <= 0.05

    def test_report_file(self, tmp_path, capsys):
        out = tmp_path / "corr.csv"
        code, _, _ = invoke(capsys, "correlate", "--bundled",
                            "--x", "c_cmmd.fog", "--y", "counts.fog",
                            "--out", str(out))
        assert code == 0
        assert "0.96" in out.read_text()


class TestMetricsAndEmbed:
    def test_metrics_pipeline(self, tmp_path, capsys, rng):
        import numpy as np

        from wxforge.embeddings import EmbeddingSet, write_embeddings

        def wxe(name, loc):
            data = rng.normal(size=(64, 6), loc=loc).astype(np.float32)
            es = EmbeddingSet(data, tuple(f"{name}{i}" for i in range(64)), "demo")
            path = tmp_path / f"{name}.wxe"
            write_embeddings(es, path)
            return path

        a = wxe("a", 0.0)
        fog = wxe("fog", 2.0)
        rain = wxe("rain", 4.0)
        out = tmp_path / "matrix.csv"
        code, _, err = invoke(
            capsys, "metrics",
            "--set", f"a={a}",
            "--trigger", f"fog={fog}", "--trigger", f"rain={rain}",
            "--which", "both", "--out", str(out),
        )
        assert code == 0, err
        header = out.read_text().splitlines()[0]
        assert header == "set,fog_fid,rain_fid,fog_cmmd,rain_cmmd"

        code, printed, _ = invoke(capsys, "contrastive", "--distances", str(out),
                                  "--target", "fog")
        assert code == 0
        assert "a\tfid\t" in printed

    def test_embed_with_stub(self, tmp_path, capsys, rng):
        import numpy as np

        from wxforge.embeddings import EmbeddingSet, write_embeddings

        fixture = tmp_path / "fixture.wxe"
        write_embeddings(
            EmbeddingSet(rng.normal(size=(2, 3)).astype(np.float32),
                         ("a", "b"), "demo"),
            fixture,
        )
        stub = tmp_path / "stub.py"
        stub.write_text(
            "import argparse, shutil\n"
            "p = argparse.ArgumentParser()\n"
            "p.add_argument('--images'); p.add_argument('--out'); p.add_argument('--src')\n"
            "a = p.parse_args()\n"
            "shutil.copy(a.src, a.out)\n"
        )
        images = tmp_path / "list.txt"
        images.write_text("x.png\ny.png\n")
        out = tmp_path / "emb.wxe"
        template = (f"{sys.executable} {stub} --src {fixture} "
                    "--images {input_list} --out {output}")
        code, printed, err = invoke(capsys, "embed", "--extractor", template,
                                    "--images", str(images), "--out", str(out))
        assert code == 0, err
        assert "embedded 2 images" in printed


class TestReportCommand:
    def test_min_distance_outputs(self, tmp_path, capsys):
        csv_path = tmp_path / "m.csv"
        csv_path.write_text(
            "set,fog_fid,rain_fid\nsub_a,5.0,9.0\nsub_b,6.0,7.0\n"
        )
        grouping = tmp_path / "groups.json"
        grouping.write_text(json.dumps({"sub_a": "mine", "sub_b": "mine"}))
        code, _, err = invoke(capsys, "report", "--distances", str(csv_path),
                              "--grouping", str(grouping),
                              "--out-prefix", str(tmp_path / "spider"))
        assert code == 0, err
        text = (tmp_path / "spider.csv").read_text()
        assert "mine" in text and "5" in text and "7" in text


class TestCliPlumbing:
    def test_usage_error_is_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["definitely-not-a-command"])
        assert exc.value.code == 2

    def test_print_config_with_overrides(self, capsys, monkeypatch):
        monkeypatch.delenv("WXFORGE_CONFIG", raising=False)
        code, out, _ = invoke(capsys, "--set", "workers=4", "--print-config")
        assert code == 0
        assert json.loads(out)["workers"] == 4

    def test_config_env_var(self, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "wx.toml"
        cfg.write_text('workers = 3\nlog_level = "error"\n')
        monkeypatch.setenv("WXFORGE_CONFIG", str(cfg))
        code, out, _ = invoke(capsys, "--print-config")
        assert code == 0
        doc = json.loads(out)
        assert doc["workers"] == 3 and doc["log_level"] == "error"

    def test_flag_overrides_beat_config(self, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "wx.toml"
        cfg.write_text("workers = 3\n")
        monkeypatch.setenv("WXFORGE_CONFIG", str(cfg))
        code, out, _ = invoke(capsys, "--workers", "9", "--print-config")
        assert json.loads(out)["workers"] == 9

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["--version"])
        assert exc.value.code == 0

    def test_space_tag_registry_from_config(self, tmp_path, capsys, monkeypatch,
                                            rng):
        import numpy as np

        from wxforge.embeddings import EmbeddingSet, write_embeddings

        fixture = tmp_path / "f.wxe"
        write_embeddings(
            EmbeddingSet(rng.normal(size=(2, 4)).astype(np.float32),
                         ("a", "b"), "custom-space"),
            fixture,
        )
        stub = tmp_path / "stub.py"
        stub.write_text(
            "import argparse, shutil\n"
            "p = argparse.ArgumentParser()\n"
            "p.add_argument('--images'); p.add_argument('--out'); p.add_argument('--src')\n"
            "a = p.parse_args()\n"
            "shutil.copy(a.src, a.out)\n"
        )
        cfg = tmp_path / "wx.toml"
        cfg.write_text("[space_tags.custom-space]\ndim = 8\nnormalize = false\n")
        monkeypatch.setenv("WXFORGE_CONFIG", str(cfg))
        images = tmp_path / "list.txt"
        images.write_text("x.png\n")
        template = (f"{sys.executable} {stub} --src {fixture} "
                    "--images {input_list} --out {output}")
        # registry declares dim 8 but the file carries dim 4
        code, _, err = invoke(capsys, "embed", "--extractor", template,
                              "--images", str(images),
                              "--out", str(tmp_path / "o.wxe"))
        assert code == 1
        assert err.startswith("error:format-error:")


SNAPSHOT_DIR = Path(__file__).parent / "snapshots"
SUBCOMMANDS = ["ingest", "augment", "embed", "metrics", "contrastive",
               "correlate", "report", "serve"]


class TestHelpSnapshots:
    @pytest.mark.parametrize("command", SUBCOMMANDS)
    def test_subcommand_help_matches_snapshot(self, command, capsys, monkeypatch):
        monkeypatch.setenv("COLUMNS", "100")
        with pytest.raises(SystemExit) as exc:
            run([command, "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        snapshot = SNAPSHOT_DIR / f"help_{command}.txt"
        assert snapshot.exists(), f"snapshot missing: {snapshot}"
        assert out == snapshot.read_text()

    @pytest.mark.parametrize("command", SUBCOMMANDS)
    def test_every_flag_listed_in_help(self, command, capsys, monkeypatch):
        monkeypatch.setenv("COLUMNS", "100")
        from wxforge.cli import build_parser

        parser = build_parser()
        sub = next(a for a in parser._actions
                   if isinstance(a, __import__("argparse")._SubParsersAction))
        cmd_parser = sub.choices[command]
        with pytest.raises(SystemExit):
            run([command, "--help"])
        out = capsys.readouterr().out
        for action in cmd_parser._actions:
            for option in action.option_strings:
                if option.startswith("--"):
                    assert option in out
