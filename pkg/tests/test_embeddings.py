import struct
import sys

import numpy as np
import pytest

from wxforge.embeddings import (
    EmbeddingSet,
    load_embeddings,
    read_embeddings,
    run_extractor,
    write_embeddings,
)
from wxforge.errors import (
    FormatError,
    InvalidDataError,
    ProcessFailureError,
    TruncationError,
)


def small_set(n=4, dim=3, tag="test-space", seed=0):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(n, dim)).astype(np.float32)
    ids = tuple(f"img{i:03d}" for i in range(n))
    return EmbeddingSet(data, ids, tag)


class TestEmbeddingSet:
    def test_rejects_nan(self):
        data = np.array([[1.0, np.nan]], dtype=np.float32)
        with pytest.raises(InvalidDataError):
            EmbeddingSet(data, ("a",), "t")

    def test_rejects_duplicate_ids(self):
        with pytest.raises(InvalidDataError):
            EmbeddingSet(np.zeros((2, 2), dtype=np.float32), ("a", "a"), "t")

    def test_content_hash_changes_with_data(self):
        a = small_set(seed=1)
        b = small_set(seed=2)
        assert a.content_hash() != b.content_hash()
        assert a.content_hash() == small_set(seed=1).content_hash()

    def test_normalized_rows_unit_norm(self):
        es = small_set().normalized()
        norms = np.linalg.norm(es.data, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-6)


class TestWxe1Format:
    def test_layout_arithmetic(self, tmp_path):
        es = EmbeddingSet(np.array([[1.0, 2.0]], dtype=np.float32), ("a",), "tag")
        path = tmp_path / "e.wxe"
        write_embeddings(es, path)
        expected = 4 + 4 + 4 + 8 + (2 + len("tag")) + 1 * 2 * 4 + (2 + len("a"))
        assert path.stat().st_size == expected

    def test_round_trip_identity(self, tmp_path):
        es = small_set(n=7, dim=5)
        path = tmp_path / "e.wxe"
        write_embeddings(es, path)
        again = read_embeddings(path)
        assert again.space_tag == es.space_tag
        assert again.ids == es.ids
        assert np.array_equal(again.data, es.data)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.wxe"
        es = small_set()
        write_embeddings(es, path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            read_embeddings(path)

    def test_truncation_mid_matrix(self, tmp_path):
        path = tmp_path / "t.wxe"
        write_embeddings(small_set(n=8, dim=16), path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(TruncationError):
            read_embeddings(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "g.wxe"
        write_embeddings(small_set(), path)
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(FormatError):
            read_embeddings(path)

    def test_deterministic_bytes(self, tmp_path):
        es = small_set()
        p1, p2 = tmp_path / "a.wxe", tmp_path / "b.wxe"
        write_embeddings(es, p1)
        write_embeddings(es, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_golden_bytes(self, tmp_path):
        # Frozen layout: any byte change is a format break, not a refactor.
        es = EmbeddingSet(
            np.array([[0.5, -1.5], [2.0, 0.25]], dtype=np.float32),
            ("aa", "b"),
            "gt",
        )
        path = tmp_path / "golden.wxe"
        write_embeddings(es, path)
        golden = (
            b"WXE1"
            + struct.pack("<I", 1)
            + struct.pack("<I", 2)
            + struct.pack("<Q", 2)
            + struct.pack("<H", 2) + b"gt"
            + np.array([[0.5, -1.5], [2.0, 0.25]], dtype="<f4").tobytes()
            + struct.pack("<H", 2) + b"aa"
            + struct.pack("<H", 1) + b"b"
        )
        assert path.read_bytes() == golden

    def test_registry_dim_check(self, tmp_path):
        es = small_set(dim=5, tag="clip-image")  # registry says 512
        path = tmp_path / "r.wxe"
        write_embeddings(es, path)
        with pytest.raises(FormatError):
            load_embeddings(path)
        # unknown tags pass through untouched
        ok = load_embeddings(tmp_path / "r.wxe", registry={})
        assert ok.dim == 5

    def test_registry_normalize_flag(self, tmp_path):
        es = small_set(dim=4, tag="unit-space")
        path = tmp_path / "n.wxe"
        write_embeddings(es, path)
        loaded = load_embeddings(path, registry={"unit-space": (4, True)})
        assert np.allclose(np.linalg.norm(loaded.data, axis=1), 1.0, atol=1e-6)


STUB_COPY = """
import argparse, shutil
p = argparse.ArgumentParser()
p.add_argument("--images"); p.add_argument("--out"); p.add_argument("--src")
a = p.parse_args()
shutil.copy(a.src, a.out)
"""

STUB_FAIL = """
import sys
sys.stderr.write("extractor exploded")
sys.exit(1)
"""


class TestRunExtractor:
    def write_stub(self, tmp_path, code, name):
        path = tmp_path / name
        path.write_text(code)
        return path

    def test_stub_copies_fixture(self, tmp_path):
        fixture = tmp_path / "fixture.wxe"
        es = small_set(n=3, dim=4)
        write_embeddings(es, fixture)
        stub = self.write_stub(tmp_path, STUB_COPY, "stub.py")
        template = (
            f"{sys.executable} {stub} --src {fixture} "
            "--images {input_list} --out {output}"
        )
        out = run_extractor(template, ["x.png"], tmp_path / "out.wxe", registry={})
        assert np.array_equal(out.data, es.data)

    def test_nonzero_exit_captures_stderr(self, tmp_path):
        stub = self.write_stub(tmp_path, STUB_FAIL, "fail.py")
        template = f"{sys.executable} {stub} " + "{input_list} {output}"
        with pytest.raises(ProcessFailureError, match="extractor exploded"):
            run_extractor(template, ["x.png"], tmp_path / "out.wxe")

    def test_dim_mismatch_vs_registry(self, tmp_path):
        fixture = tmp_path / "fixture.wxe"
        write_embeddings(small_set(n=3, dim=4, tag="clip-image"), fixture)
        stub = self.write_stub(tmp_path, STUB_COPY, "stub.py")
        template = (
            f"{sys.executable} {stub} --src {fixture} "
            "--images {input_list} --out {output}"
        )
        with pytest.raises(FormatError):
            run_extractor(template, ["x.png"], tmp_path / "out.wxe")

    def test_template_placeholders_required(self, tmp_path):
        with pytest.raises(InvalidDataError):
            run_extractor("echo hi", [], tmp_path / "o.wxe")
