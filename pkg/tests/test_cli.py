"""End-to-end CLI behavior: subcommands, exit codes, reproducibility."""

import json
from pathlib import Path

import numpy as np
import pytest

from aisq import nmea
from aisq.cli import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from aisq.records import read_records_csv
from aisq.synthetic import synthetic_fleet, write_point_csv, synthetic_geo
from aisq.records import write_records_csv


def run(argv):
    return main([str(a) for a in argv])


def make_nmea_file(path, n=100, shiptype=70):
    """n valid type-1 sentences (plus one type 5 carrying the ship type)."""
    lines = []
    bits = nmea.encode_static_report(111, shiptype)
    payload, fill = nmea.encode_payload(bits)
    # type 5 payloads are 424 bits = two fragments in practice; keep one here
    lines.append(nmea.render_sentence(payload, fill))
    rng = np.random.default_rng(1)
    for i in range(n):
        bits = nmea.encode_position_report(
            mmsi=111,
            sog=int(rng.integers(0, 1023)),
            lat_raw=int(rng.integers(-54_000_000, 54_000_000)),
            lon_raw=int(rng.integers(-108_000_000, 108_000_000)),
            cog_tenths=int(rng.integers(0, 3600)),
        )
        payload, fill = nmea.encode_payload(bits)
        lines.append(nmea.render_sentence(payload, fill))
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli_ds")
    tracks = synthetic_fleet({"straight": 8, "zigzag": 8, "loiter": 8}, seed=13)
    rows = [r for t in tracks for r in t.records]
    write_records_csv(rows, base / "records.csv")
    coast, harbors = synthetic_geo(3)
    write_point_csv(coast, base / "coast.csv")
    write_point_csv(harbors, base / "harbors.csv")
    out = base / "ds"
    rc = run(
        [
            "build",
            "--records", base / "records.csv",
            "--out", out,
            "--coast", base / "coast.csv",
            "--harbors", base / "harbors.csv",
            "--seed", 4,
        ]
    )
    assert rc == EXIT_OK
    return base, out


class TestDecode:
    def test_empty_input(self, tmp_path):
        src = tmp_path / "empty.nmea"
        src.write_text("")
        out = tmp_path / "records.csv"
        assert run(["decode", src, "--out", out]) == EXIT_OK
        assert out.read_text().strip() == "mmsi,timestamp,lat,lon,sog,cog,shiptype"
        counters = json.loads((tmp_path / "records.csv.counters.json").read_text())
        assert counters["sentences"] == 0
        assert counters["records_out"] == 0

    def test_hundred_valid_sentences(self, tmp_path):
        src = tmp_path / "in.nmea"
        make_nmea_file(src, n=100)
        out = tmp_path / "records.csv"
        assert run(["decode", src, "--out", out]) == EXIT_OK
        rows = list(read_records_csv(out))
        counters = json.loads((tmp_path / "records.csv.counters.json").read_text())
        # sentinel-valued reports never become rows
        assert len(rows) == counters["position_reports"]
        assert len(rows) + counters["sentinel_rejected"] == 100
        assert all(r.shiptype == 70 for r in rows)
        assert all(rows[i].timestamp < rows[i + 1].timestamp for i in range(len(rows) - 1))

    def test_mixed_corrupt_input_counted(self, tmp_path):
        src = tmp_path / "in.nmea"
        make_nmea_file(src, n=10)
        content = src.read_text().splitlines()
        content.insert(3, "!AIVDM,1,1,,A,garbage")  # no checksum delimiter
        content.insert(5, "$GPGGA,foo*00")  # not AIVDM
        valid = content[-1]
        content.append(valid[:-1] + ("0" if valid[-1] != "0" else "1"))  # bad checksum
        src.write_text("\n".join(content) + "\n")
        out = tmp_path / "records.csv"
        assert run(["decode", src, "--out", out]) == EXIT_OK
        counters = json.loads((tmp_path / "records.csv.counters.json").read_text())
        assert counters["malformed"] == 1
        assert counters["ignored_non_aivdm"] == 1
        assert counters["checksum_mismatch"] == 1

    def test_tag_block_timestamps(self, tmp_path):
        src = tmp_path / "in.nmea"
        bits = nmea.encode_position_report(5, 10, 0, 0, 0)
        payload, fill = nmea.encode_payload(bits)
        line = nmea.render_sentence(payload, fill)
        src.write_text(f"\\c:1700000007,s:x*00\\{line}\n")
        out = tmp_path / "records.csv"
        assert run(["decode", src, "--out", out]) == EXIT_OK
        (row,) = read_records_csv(out)
        assert row.timestamp == 1700000007

    def test_missing_input_is_io_error(self, tmp_path):
        assert run(["decode", tmp_path / "nope.nmea", "--out", tmp_path / "o.csv"]) == EXIT_IO


class TestBuild:
    def test_dataset_shapes(self, dataset_dir):
        base, out = dataset_dir
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seq_len"] == 360
        assert len(manifest["channels"]) == 9
        assert (out / "train.shard").exists()
        assert (out / "build_config.json").exists()

    def test_rebuild_is_identical(self, dataset_dir, tmp_path):
        base, out = dataset_dir
        out2 = tmp_path / "ds2"
        rc = run(
            [
                "build",
                "--records", base / "records.csv",
                "--out", out2,
                "--coast", base / "coast.csv",
                "--harbors", base / "harbors.csv",
                "--seed", 4,
            ]
        )
        assert rc == EXIT_OK
        assert (out / "manifest.json").read_text() == (out2 / "manifest.json").read_text()
        assert (out / "train.shard").read_bytes() == (out2 / "train.shard").read_bytes()

    def test_missing_harbor_file_names_path(self, dataset_dir, tmp_path, capsys):
        base, _ = dataset_dir
        rc = run(
            [
                "build",
                "--records", base / "records.csv",
                "--out", tmp_path / "x",
                "--coast", base / "coast.csv",
                "--harbors", tmp_path / "missing_harbors.csv",
            ]
        )
        assert rc == EXIT_IO
        assert "missing_harbors.csv" in capsys.readouterr().err

    def test_config_file_with_flag_override(self, dataset_dir, tmp_path):
        base, _ = dataset_dir
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 9, "transform": "rtz"}))
        out = tmp_path / "ds3"
        rc = run(
            [
                "build",
                "--records", base / "records.csv",
                "--out", out,
                "--coast", base / "coast.csv",
                "--harbors", base / "harbors.csv",
                "--config", cfg,
                "--seed", 12,
            ]
        )
        assert rc == EXIT_OK
        resolved = json.loads((out / "build_config.json").read_text())
        assert resolved["seed"] == 12  # flag beats file
        assert resolved["transform"] == "rtz"  # file beats default
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["transform"] == "rtz"
        assert manifest["seed"] == 12


@pytest.fixture(scope="module")
def trained(dataset_dir, tmp_path_factory):
    _, ds = dataset_dir
    out = tmp_path_factory.mktemp("run")
    rc = run(
        [
            "train",
            "--dataset", ds,
            "--out", out,
            "--preset", "mlp_2x64",
            "--max-epochs", 3,
            "--seed", 1,
        ]
    )
    assert rc == EXIT_OK
    return ds, out


class TestTrainEval:
    def test_train_outputs(self, trained, capsys):
        ds, out = trained
        assert (out / "checkpoint.tsnc").exists()
        history = (out / "history.csv").read_text().splitlines()
        assert history[0].startswith("epoch,")
        assert len(history) >= 2
        assert (out / "train_config.json").exists()

    def test_train_prints_parameter_count(self, dataset_dir, tmp_path, capsys):
        _, ds = dataset_dir
        rc = run(
            ["train", "--dataset", ds, "--out", tmp_path / "r", "--preset", "mlp_2x64",
             "--max-epochs", 1, "--seed", 0]
        )
        assert rc == EXIT_OK
        assert "211,909" in capsys.readouterr().out

    def test_unknown_preset_usage_error(self, dataset_dir, tmp_path, capsys):
        _, ds = dataset_dir
        rc = run(["train", "--dataset", ds, "--out", tmp_path / "r", "--preset", "wat"])
        assert rc == EXIT_USAGE
        err = capsys.readouterr().err
        assert "tiny_resnet" in err  # usage message lists the presets

    def test_eval_outputs_and_determinism(self, trained, tmp_path):
        ds, run_dir = trained
        out1 = tmp_path / "e1"
        out2 = tmp_path / "e2"
        for out in (out1, out2):
            rc = run(
                ["eval", "--checkpoint", run_dir / "checkpoint.tsnc", "--dataset", ds, "--out", out]
            )
            assert rc == EXIT_OK
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
        doc = json.loads((out1 / "report.json").read_text())
        manifest = json.loads(Path(ds, "manifest.json").read_text())
        assert doc["total"] == manifest["splits"]["test"]["count"]
        assert (out1 / "report.svg").exists()
        assert (out1 / "report.txt").exists()

    def test_eval_val_split(self, trained, tmp_path):
        ds, run_dir = trained
        out = tmp_path / "ev"
        rc = run(
            ["eval", "--checkpoint", run_dir / "checkpoint.tsnc", "--dataset", ds,
             "--split", "val", "--out", out]
        )
        assert rc == EXIT_OK
        doc = json.loads((out / "report.json").read_text())
        manifest = json.loads(Path(ds, "manifest.json").read_text())
        assert doc["total"] == manifest["splits"]["val"]["count"]


class TestInspect:
    def test_dataset(self, dataset_dir, capsys):
        _, ds = dataset_dir
        assert run(["inspect", ds]) == EXIT_OK
        out = capsys.readouterr().out
        assert "stationary_deg_per_sample = 2e-05" in out
        assert "CargoTanker" in out

    def test_checkpoint(self, dataset_dir, tmp_path, capsys):
        _, ds = dataset_dir
        rc = run(
            ["train", "--dataset", ds, "--out", tmp_path / "r", "--preset", "mlp_2x64",
             "--max-epochs", 1, "--seed", 0]
        )
        assert rc == EXIT_OK
        assert run(["inspect", tmp_path / "r" / "checkpoint.tsnc"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "mlp_2x64" in out
        assert "211,909" in out

    def test_corrupt_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"JUNKJUNKJUNK")
        assert run(["inspect", bad]) == EXIT_DATA

    def test_usage_error_on_no_command(self):
        assert run([]) == EXIT_USAGE
