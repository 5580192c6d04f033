import json

import numpy as np
import pytest

from embed_exporter.cli import main
from embed_exporter.encoders import EncoderError, get_encoder
from embed_exporter.export import ExportError, ExportJob, export, read_rows

CSV_10 = "id,text,conflict,conflict_label\n" + "".join(
    f'{i},"The system shall perform task number {chr(96 + i)} reliably.",No,No\n'
    for i in range(1, 11)
)


def _write(tmp_path, text, name="input.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_read_rows_order_and_content():
    rows = read_rows(CSV_10)
    assert [rid for rid, _ in rows] == [str(i) for i in range(1, 11)]
    assert all(text.startswith("The system") for _, text in rows)


def test_read_rows_missing_columns():
    with pytest.raises(ExportError, match="missing columns"):
        read_rows("name,value\na,1\n")


def test_read_rows_duplicate_id():
    bad = "id,text,conflict,conflict_label\n1,alpha,No,No\n1,beta,No,No\n"
    with pytest.raises(ExportError, match="duplicate id"):
        read_rows(bad)


def test_read_rows_empty_text():
    with pytest.raises(ExportError, match="row 2"):
        read_rows("id,text,conflict,conflict_label\n1,,No,No\n")


def test_hash_encoder_deterministic():
    enc = get_encoder("hash-64")
    a = enc(["The UAV shall charge", "unrelated"])
    b = enc(["The UAV shall charge", "unrelated"])
    assert np.array_equal(a, b)
    assert a.shape == (2, 64)


def test_hash_encoder_similarity_tracks_token_overlap():
    enc = get_encoder("hash-512")
    vecs = enc(
        [
            "the uav shall charge in three hours",
            "the uav shall charge in five hours",
            "completely different words about printers",
        ]
    )

    def cos(u, v):
        return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

    assert cos(vecs[0], vecs[1]) > cos(vecs[0], vecs[2])


def test_unknown_model_rejected():
    # "unknown model" when sentence-transformers is absent, "cannot load"
    # when it is present but the checkpoint does not exist
    with pytest.raises(EncoderError, match="unknown model|cannot load"):
        get_encoder("no-such-checkpoint-xyz")


def test_bad_model_names():
    with pytest.raises(EncoderError):
        get_encoder("")
    with pytest.raises(EncoderError):
        get_encoder("hash-0")


def test_export_batching_invariance(tmp_path):
    src = _write(tmp_path, CSV_10)
    out_small = tmp_path / "small.jsonl"
    out_large = tmp_path / "large.jsonl"
    export(ExportJob(src, "hash-32", str(out_small), batch_size=3))
    export(ExportJob(src, "hash-32", str(out_large), batch_size=100))
    assert out_small.read_text() == out_large.read_text()


def test_export_empty_csv(tmp_path):
    src = _write(tmp_path, "id,text,conflict,conflict_label\n")
    out = tmp_path / "empty.jsonl"
    assert export(ExportJob(src, "hash-16", str(out))) == 0
    assert out.read_text() == ""


def test_export_duplicate_id_fails_before_writing(tmp_path):
    src = _write(tmp_path, "id,text,conflict,conflict_label\n1,alpha,No,No\n1,beta,No,No\n")
    out = tmp_path / "out.jsonl"
    with pytest.raises(ExportError):
        export(ExportJob(src, "hash-16", str(out)))
    assert not out.exists()


def test_export_rejects_bad_batch_size(tmp_path):
    with pytest.raises(ExportError, match="batch size"):
        ExportJob("in.csv", "hash-16", "out.jsonl", batch_size=0)


def test_cli_roundtrip(tmp_path, capsys):
    src = _write(tmp_path, CSV_10)
    out = tmp_path / "vectors.jsonl"
    code = main(
        ["export", "--input", src, "--model", "hash-48", "--output", str(out), "--batch-size", "4"]
    )
    assert code == 0
    assert "wrote 10 embeddings" in capsys.readouterr().out
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 10
    assert all(r["model"] == "hash-48" for r in records)


def test_cli_error_exit_code(tmp_path, capsys):
    assert main(["export", "--input", "/no/such.csv", "--model", "hash-8", "--output", "o"]) == 1
    assert "error" in capsys.readouterr().err


def test_criterion_8_exporter_contract(tmp_path):
    """Acceptance: the exported file is accepted by the primary consumer."""
    pytest.importorskip("reqconflict")
    from reqconflict.embedding import load_external_embeddings

    src = _write(tmp_path, CSV_10)
    out = tmp_path / "vectors.jsonl"
    count = export(ExportJob(src, "hash-512", str(out), batch_size=4))
    assert count == 10

    table = load_external_embeddings(out.read_bytes())  # zero diagnostics: no exception
    csv_ids = [rid for rid, _ in read_rows(CSV_10)]
    assert sorted(table.vectors) == sorted(csv_ids)
    assert len(set(csv_ids)) == len(csv_ids)
    assert table.dim == 512
    assert all(len(v) == 512 for v in table.vectors.values())
    print("criterion 8: PASS - exporter output accepted by the primary loader, "
          "ids bijective, uniform dimension 512")
