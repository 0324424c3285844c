"""Exporter tests.

The retrieval toolkit is exercised strictly through its external
interfaces: the DEMB byte layout (parsed here with struct, independently
of any library) and the installed `qmoe` command line. Tests that drive
the CLI are skipped when it is not on PATH.
"""

import shutil
import struct
import subprocess

import numpy as np
import pytest

from embexport.cli import main as cli_main
from embexport.export import ExportError, ExportJob, read_id_text_file, run_export

TEXTS = [
    ("doc0", "the eleventh amendment limits federal judicial power"),
    ("doc1", "lunar new year festivals begin with the first new moon"),
    ("doc2", "gradient descent minimizes a loss by following its slope"),
    ("doc3", "coral reefs shelter a quarter of all marine species"),
    ("doc4", "the printing press spread literacy across continents"),
    ("doc5", "photosynthesis converts sunlight into chemical energy"),
    ("doc6", "suspension bridges hang their decks from steel cables"),
    ("doc7", "fermentation turns grape sugar into wine"),
    ("doc8", "glaciers carve valleys over thousands of years"),
    ("doc9", "orchestras tune to the oboe before a performance"),
]

HEADER = struct.Struct("<4sIIQ")


def write_input(path, rows=TEXTS):
    path.write_text("".join(f"{i}\t{t}\n" for i, t in rows), encoding="utf-8")


def parse_demb(path):
    data = path.read_bytes()
    magic, version, dim, count = HEADER.unpack_from(data)
    payload = np.frombuffer(data, dtype="<f4", offset=HEADER.size)
    return magic, version, dim, count, payload.reshape(count, dim)


class TestExport:
    def test_cardinality_and_header(self, tmp_path):
        src = tmp_path / "texts.tsv"
        write_input(src, TEXTS[:3])
        out = tmp_path / "vectors.emb"
        report = run_export(ExportJob(model="hash://64", input_path=str(src),
                                      output_path=str(out)))
        assert report.count == 3 and report.dim == 64
        magic, version, dim, count, payload = parse_demb(out)
        assert magic == b"DEMB" and version == 1
        assert dim == 64 and count == 3
        assert payload.shape == (3, 64)
        ids = (tmp_path / "vectors.ids").read_text().splitlines()
        assert ids == ["doc0", "doc1", "doc2"]

    def test_row_order_follows_input_order(self, tmp_path):
        src = tmp_path / "texts.tsv"
        write_input(src)
        out = tmp_path / "v.emb"
        run_export(ExportJob(model="hash://32", input_path=str(src),
                             output_path=str(out)))
        reversed_src = tmp_path / "rev.tsv"
        write_input(reversed_src, list(reversed(TEXTS)))
        rev_out = tmp_path / "rev.emb"
        run_export(ExportJob(model="hash://32", input_path=str(reversed_src),
                             output_path=str(rev_out)))
        _, _, _, _, fwd = parse_demb(out)
        _, _, _, _, rev = parse_demb(rev_out)
        assert np.array_equal(fwd, rev[::-1])

    def test_two_runs_byte_identical(self, tmp_path):
        src = tmp_path / "texts.tsv"
        write_input(src)
        for name in ("a.emb", "b.emb"):
            assert cli_main(["--model", "hash://48", "--input", str(src),
                             "--output", str(tmp_path / name)]) == 0
        assert (tmp_path / "a.emb").read_bytes() == (tmp_path / "b.emb").read_bytes()
        assert (tmp_path / "a.ids").read_bytes() == (tmp_path / "b.ids").read_bytes()

    def test_batch_size_does_not_change_output(self, tmp_path):
        src = tmp_path / "texts.tsv"
        write_input(src)
        outputs = []
        for batch in (1, 3, 64):
            out = tmp_path / f"b{batch}.emb"
            run_export(ExportJob(model="hash://32", input_path=str(src),
                                 output_path=str(out), batch_size=batch))
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_unit_norm_rows(self, tmp_path):
        src = tmp_path / "texts.tsv"
        write_input(src)
        out = tmp_path / "v.emb"
        run_export(ExportJob(model="hash://64", input_path=str(src),
                             output_path=str(out)))
        _, _, _, _, payload = parse_demb(out)
        np.testing.assert_allclose(np.linalg.norm(payload, axis=1), 1.0,
                                   rtol=1e-5)

    def test_truncation_reported(self, tmp_path):
        src = tmp_path / "texts.tsv"
        rows = [("long", "word " * 500), ("short", "just a few words")]
        write_input(src, rows)
        out = tmp_path / "v.emb"
        report = run_export(ExportJob(model="hash://32", input_path=str(src),
                                      output_path=str(out), max_tokens=100))
        assert report.truncated == 1


class TestErrors:
    def test_malformed_line_names_line_number(self, tmp_path):
        src = tmp_path / "texts.tsv"
        src.write_text("doc0\tfine text\nbroken line without tab\n",
                       encoding="utf-8")
        with pytest.raises(ExportError, match=r":2"):
            read_id_text_file(src)

    def test_duplicate_id_rejected(self, tmp_path):
        src = tmp_path / "texts.tsv"
        src.write_text("a\tone\na\ttwo\n", encoding="utf-8")
        with pytest.raises(ExportError, match=r":2.*duplicate"):
            read_id_text_file(src)

    def test_unresolvable_model_exits_nonzero(self, tmp_path, capsys):
        src = tmp_path / "texts.tsv"
        write_input(src, TEXTS[:2])
        code = cli_main(["--model", "hash://not-a-number",
                         "--input", str(src),
                         "--output", str(tmp_path / "v.emb")])
        assert code == 1
        assert "hash://not-a-number" in capsys.readouterr().err

    def test_missing_input_exits_nonzero(self, tmp_path, capsys):
        code = cli_main(["--model", "hash://16",
                         "--input", str(tmp_path / "nope.tsv"),
                         "--output", str(tmp_path / "v.emb")])
        assert code == 1
        assert "nope.tsv" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("qmoe") is None,
                    reason="retrieval toolkit CLI not installed")
class TestPrimaryToolkitRoundTrip:
    def export_ten(self, tmp_path):
        src = tmp_path / "texts.tsv"
        write_input(src)
        out = tmp_path / "docs.emb"
        assert cli_main(["--model", "hash://64", "--input", str(src),
                         "--output", str(out)]) == 0
        return out

    def test_self_retrieval_ranks_own_document_first(self, tmp_path):
        out = self.export_ten(tmp_path)
        run_path = tmp_path / "run.txt"
        proc = subprocess.run(
            ["qmoe", "retrieve", "--queries", str(out), "--docs", str(out),
             "--output", str(run_path), "--similarity", "cosine", "--k", "3",
             "--quiet"],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        top = {}
        for line in run_path.read_text().splitlines():
            qid, _, doc_id, rank, _, _ = line.split()
            if rank == "1":
                top[qid] = doc_id
        assert top == {i: i for i, _ in TEXTS}

    def test_evaluate_reports_perfect_p1(self, tmp_path):
        out = self.export_ten(tmp_path)
        qrels = tmp_path / "qrels.txt"
        qrels.write_text("".join(f"{i} 0 {i} 1\n" for i, _ in TEXTS),
                         encoding="utf-8")
        run_path = tmp_path / "run.txt"
        subprocess.run(
            ["qmoe", "retrieve", "--queries", str(out), "--docs", str(out),
             "--output", str(run_path), "--similarity", "cosine", "--quiet"],
            capture_output=True, text=True, check=True)
        proc = subprocess.run(
            ["qmoe", "evaluate", "--run", str(run_path), "--qrels", str(qrels),
             "--quiet"],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.count("1.0000") == 6
