"""Command-line entry point: decode, build, train, eval, inspect.

Reproducibility contract: every subcommand writes the fully-resolved
configuration next to its outputs, and identical inputs, flags, and seed
produce byte-identical primary outputs. Exit codes are stable: 0 success,
1 usage error, 2 data error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import geo, metrics, nmea, records
from .pipeline import dataset as ds
from .pipeline import shard as shard_mod
from .pipeline.dataset import EmptyDataset, PipelineConfig
from .pipeline.features import FEATURE_CHANNELS
from .pipeline.segmentation import CLASS_NAMES
from .tsnet import checkpoint as ckpt_mod
from .tsnet import model as model_mod
from .tsnet.layers import ShapeMismatch
from .tsnet.model import InvalidConfig
from .tsnet.train import DivergedLoss, EmptySplit, TrainConfig
from .tsnet.train import train as run_training

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

DATA_DIR_ENV = "AISQ_DATA_DIR"

DATA_ERRORS = (
    EmptyDataset,
    records.HeaderMismatch,
    records.InvalidRecord,
    geo.EmptyPointSet,
    geo.FormatError,
    shard_mod.MagicMismatch,
    shard_mod.VersionMismatch,
    shard_mod.ChecksumMismatch,
    ckpt_mod.MagicMismatch,
    ckpt_mod.VersionMismatch,
    ckpt_mod.ChecksumMismatch,
    InvalidConfig,
    ShapeMismatch,
    EmptySplit,
    DivergedLoss,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return doc


def _resolve(args: argparse.Namespace, file_cfg: dict, defaults: dict) -> dict:
    """Merge defaults <- config file <- explicit CLI flags (flags win)."""
    resolved = dict(defaults)
    for key, value in file_cfg.items():
        if key not in defaults:
            raise UsageError(f"unknown config key {key!r}")
        resolved[key] = value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _write_resolved(resolved: dict, out_dir: Path, name: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / name, "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _default_geo_path(filename: str) -> str | None:
    base = os.environ.get(DATA_DIR_ENV)
    if base:
        return str(Path(base) / filename)
    return None


# ---------------------------------------------------------------- decode


def _tag_block_timestamp(line: str) -> tuple[int | None, str]:
    """Split an optional leading tag block and extract its c: timestamp."""
    if not line.startswith("\\"):
        return None, line
    end = line.find("\\", 1)
    if end < 0:
        return None, line
    block = line[1:end]
    rest = line[end + 1 :]
    ts = None
    for fieldtext in block.split("*")[0].split(","):
        if fieldtext.startswith("c:"):
            try:
                value = int(fieldtext[2:])
            except ValueError:
                continue
            ts = value // 1000 if value > 40_000_000_000 else value
    return ts, rest


def cmd_decode(args: argparse.Namespace) -> int:
    out_path = Path(args.out)
    counters = {
        "sentences": 0,
        "ignored_non_aivdm": 0,
        "malformed": 0,
        "checksum_mismatch": 0,
        "multipart_dropped": 0,
        "payloads": 0,
        "unsupported_type": 0,
        "sentinel_rejected": 0,
        "truncated": 0,
        "position_reports": 0,
        "static_reports": 0,
    }
    assembler = nmea.MultipartAssembler(window=args.window)
    positions: list[tuple[int, nmea.PositionReport]] = []
    statics: list[tuple[int, int, int]] = []  # (mmsi, shiptype, order)
    fallback_clock = 0

    for in_path in args.inputs:
        with open(in_path) as fh:
            for raw in fh:
                raw = raw.strip()
                if not raw:
                    continue
                ts, line = _tag_block_timestamp(raw)
                if not (line.startswith("!AIVDM") or line.startswith("!AIVDO")):
                    counters["ignored_non_aivdm"] += 1
                    continue
                counters["sentences"] += 1
                try:
                    sentence = nmea.parse_sentence(line)
                except nmea.ChecksumMismatch:
                    counters["checksum_mismatch"] += 1
                    continue
                except (nmea.MalformedSentence, nmea.InvalidFillBits):
                    counters["malformed"] += 1
                    continue
                try:
                    bits = assembler.feed(sentence)
                except nmea.InvalidArmorCharacter:
                    counters["malformed"] += 1
                    continue
                if bits is None:
                    continue
                counters["payloads"] += 1
                if ts is None:
                    ts = fallback_clock
                fallback_clock += 1
                msg_type = nmea._take_uint(bits, 0, 6) if len(bits) >= 6 else -1
                try:
                    if msg_type == 5:
                        mmsi, shiptype = nmea.decode_static_report(bits)
                        counters["static_reports"] += 1
                        statics.append((mmsi, shiptype, ts))
                    else:
                        report = nmea.decode_position_report(bits)
                        counters["position_reports"] += 1
                        positions.append((ts, report))
                except nmea.SentinelValue:
                    counters["sentinel_rejected"] += 1
                except nmea.UnsupportedMessageType:
                    counters["unsupported_type"] += 1
                except nmea.TruncatedPayload:
                    counters["truncated"] += 1
    counters["multipart_dropped"] = assembler.dropped_incomplete

    by_mmsi: dict[int, list] = {}
    for mmsi, shiptype, ts in statics:
        if 0 <= shiptype <= 99:
            by_mmsi.setdefault(mmsi, []).append(
                records.AisRecord(mmsi=mmsi, timestamp=ts, lat=0, lon=0, sog=0, cog=0, shiptype=shiptype)
            )
    resolved_types = {m: records.resolve_shiptype(rs) for m, rs in by_mmsi.items()}

    rows = [
        records.AisRecord(
            mmsi=r.mmsi,
            timestamp=ts,
            lat=r.lat,
            lon=r.lon,
            sog=r.sog,
            cog=r.cog,
            shiptype=resolved_types.get(r.mmsi),
        )
        for ts, r in positions
    ]
    n = records.write_records_csv(rows, out_path)
    counters["records_out"] = n
    with open(out_path.with_suffix(out_path.suffix + ".counters.json"), "w") as fh:
        json.dump(counters, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"decoded {n} records from {counters['sentences']} sentences -> {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------- build


def cmd_build(args: argparse.Namespace) -> int:
    defaults = {
        "seq_len": 360,
        "transform": "rtf",
        "norm": "global",
        "split_mode": "sequence",
        "seed": 0,
        "workers": 1,
        "stationary_threshold": 2e-5,
        "river_buffer_m": 200.0,
        "coast_max_points": None,
    }
    resolved = _resolve(args, _load_config_file(args.config), defaults)

    coast_path = args.coast or _default_geo_path("coastline.csv")
    harbor_path = args.harbors or _default_geo_path("harbors.csv")
    if not coast_path or not harbor_path:
        raise UsageError(
            f"coastline/harbor files required (pass --coast/--harbors or set ${DATA_DIR_ENV})"
        )
    for label, p in (("coastline", coast_path), ("harbors", harbor_path)):
        if not Path(p).exists():
            raise FileNotFoundError(f"{label} file not found: {p}")
    coast = geo.load_coastline(coast_path, max_points=resolved["coast_max_points"])
    harbors = geo.load_harbors(harbor_path)
    rivers = None
    if args.rivers:
        if not Path(args.rivers).exists():
            raise FileNotFoundError(f"rivers file not found: {args.rivers}")
        rivers = geo.load_point_list(args.rivers)

    counters: dict = {}
    recs = records.read_records_csv(args.records, counters)
    tracks = records.group_tracks(recs)

    cfg = PipelineConfig(
        seq_len=resolved["seq_len"],
        transform=resolved["transform"],
        norm_mode=resolved["norm"],
        split_mode=resolved["split_mode"],
        seed=resolved["seed"],
        stationary_threshold=resolved["stationary_threshold"],
        river_buffer_m=resolved["river_buffer_m"],
        coast_max_points=resolved["coast_max_points"],
        workers=resolved["workers"],
    )
    out_dir = Path(args.out)
    manifest = ds.build_dataset(tracks, coast, harbors, rivers, cfg, out_dir)
    _write_resolved({**resolved, "records": str(args.records)}, out_dir, "build_config.json")

    print(f"dataset written to {out_dir}")
    print(f"{'class':<16}{'sequences':>10}")
    for name in CLASS_NAMES:
        print(f"{name:<16}{manifest['class_counts'][name]:>10}")
    for split, info in manifest["splits"].items():
        print(f"split {split:<6} {info['count']:>7} sequences  sha256 {info['sha256'][:12]}")
    print(f"input rows skipped: {counters['rows_skipped']}")
    return EXIT_OK


# ---------------------------------------------------------------- train


def cmd_train(args: argparse.Namespace) -> int:
    defaults = {
        "preset": None,
        "seed": 0,
        "max_epochs": 600,
        "batch_size": None,
        "lr": None,
        "noise_sigma": 0.01,
        "bn": False,
    }
    resolved = _resolve(args, _load_config_file(args.config), defaults)
    if not resolved["preset"]:
        raise UsageError(f"--preset required; available: {', '.join(model_mod.PRESET_NAMES)}")

    manifest = ds.load_manifest(args.dataset)
    train_seqs = ds.load_split(args.dataset, "train")
    val_seqs = ds.load_split(args.dataset, "val")
    xt, yt, tlt = ds.split_arrays(train_seqs)
    xv, yv, tlv = ds.split_arrays(val_seqs)

    config = model_mod.make_preset(
        resolved["preset"],
        seq_len=manifest["seq_len"],
        in_channels=len(manifest["channels"]),
        batchnorm=resolved["bn"],
    )
    net = model_mod.build_model(config, seed=resolved["seed"])
    print(f"preset {resolved['preset']}: {net.parameter_count:,} parameters, depth {net.depth}")

    tcfg = TrainConfig(
        learning_rate=resolved["lr"],
        max_epochs=resolved["max_epochs"],
        batch_size=resolved["batch_size"],
        noise_sigma=resolved["noise_sigma"],
        seed=resolved["seed"],
    )
    ckpt = run_training(net, (xt, yt, tlt), (xv, yv, tlv), tcfg)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "checkpoint.tsnc"
    ckpt_mod.save_checkpoint(ckpt, ckpt_path)
    with open(out_dir / "history.csv", "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["epoch", "lr", "train_loss", "train_acc", "val_loss", "val_acc", "seconds"]
        )
        writer.writeheader()
        writer.writerows(ckpt.history)
    _write_resolved({**resolved, "dataset": str(args.dataset)}, out_dir, "train_config.json")
    last = ckpt.history[-1]
    print(
        f"trained {len(ckpt.history)} epochs (best val loss at epoch {ckpt.best_epoch}); "
        f"final val acc {last['val_acc']:.3f} -> {ckpt_path}"
    )
    return EXIT_OK


# ---------------------------------------------------------------- eval


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt = ckpt_mod.load_checkpoint(args.checkpoint)
    manifest = ds.load_manifest(args.dataset)
    seqs = ds.load_split(args.dataset, args.split)
    x, y, _ = ds.split_arrays(seqs)
    if ckpt.config.seq_len != manifest["seq_len"]:
        raise ShapeMismatch(
            f"checkpoint expects L={ckpt.config.seq_len}, dataset has L={manifest['seq_len']}"
        )
    proba = ckpt_mod.predict(ckpt, x)
    predicted = proba.argmax(axis=1)
    cm = metrics.ConfusionMatrix().add_batch(y, predicted)
    report = metrics.build_report(
        cm, dataset_id=str(args.dataset), checkpoint_id=str(args.checkpoint)
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for fmt, name in (("json", "report.json"), ("text", "report.txt"), ("svg", "report.svg")):
        (out_dir / name).write_bytes(metrics.render_report(report, fmt))
    _write_resolved(
        {"checkpoint": str(args.checkpoint), "dataset": str(args.dataset), "split": args.split},
        out_dir,
        "eval_config.json",
    )
    print(f"evaluated {cm.total} sequences from split {args.split!r}")
    print(f"micro-F1 (= accuracy): {report.micro_f1:.4f}   macro-F1: {report.macro_f1:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------- inspect


def cmd_inspect(args: argparse.Namespace) -> int:
    target = Path(args.path)
    if target.is_dir() and (target / ds.MANIFEST_NAME).exists():
        manifest = ds.load_manifest(target)
        print(f"dataset {target}")
        print(f"  seq_len {manifest['seq_len']}, transform {manifest['transform']}, "
              f"norm {manifest['norm_mode']}, split_mode {manifest['split_mode']}, seed {manifest['seed']}")
        print(f"  channels: {', '.join(manifest['channels'])}")
        print("  thresholds:")
        for k, v in sorted(manifest["thresholds"].items()):
            print(f"    {k} = {v}")
        print("  class counts:")
        for name in CLASS_NAMES:
            print(f"    {name:<16}{manifest['class_counts'][name]:>10}")
        for split, info in manifest["splits"].items():
            print(f"  split {split:<6} {info['count']:>7} sequences ({info['file']})")
        return EXIT_OK
    if target.is_file():
        with open(target, "rb") as fh:
            magic = fh.read(4)
        if magic == ckpt_mod.MAGIC:
            ckpt = ckpt_mod.load_checkpoint(target)
            net = ckpt_mod.restore_network(ckpt)
            print(f"checkpoint {target}")
            print(f"  preset {ckpt.config.preset}, kind {ckpt.config.kind}")
            print(f"  seq_len {ckpt.config.seq_len}, channels {ckpt.config.in_channels}, "
                  f"classes {ckpt.config.n_classes}")
            print(f"  parameters {net.parameter_count:,}, depth {net.depth}")
            print(f"  trained epochs {len(ckpt.history)}, best epoch {ckpt.best_epoch}")
            return EXIT_OK
        if magic == shard_mod.MAGIC:
            seqs = shard_mod.read_shard(target)
            print(f"shard {target}: {len(seqs)} sequences")
            if seqs:
                print(f"  L={seqs[0].values.shape[0]}, channels={seqs[0].values.shape[1]}")
            return EXIT_OK
        raise shard_mod.MagicMismatch(f"{target}: unrecognized file magic {magic!r}")
    raise FileNotFoundError(f"no dataset directory or artifact file at {target}")


# ---------------------------------------------------------------- parser


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aisq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode AIVDM sentences into the records CSV")
    p.add_argument("inputs", nargs="+", metavar="NMEA_FILE")
    p.add_argument("--out", required=True, help="output records CSV path")
    p.add_argument("--window", type=int, default=64, help="multipart reassembly window")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("build", help="build a dataset (shards + manifest) from records")
    p.add_argument("--records", required=True, help="records CSV path")
    p.add_argument("--out", required=True, help="dataset output directory")
    p.add_argument("--coast", help=f"coastline point list (default ${DATA_DIR_ENV}/coastline.csv)")
    p.add_argument("--harbors", help=f"harbor point list (default ${DATA_DIR_ENV}/harbors.csv)")
    p.add_argument("--rivers", help="optional river vertex list; enables the river filter")
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--seq-len", dest="seq_len", type=int, choices=(360, 1080, 1800))
    p.add_argument("--transform", choices=("rtf", "rtz"))
    p.add_argument("--norm", choices=("global", "local"))
    p.add_argument("--split-mode", dest="split_mode", choices=("sequence", "vessel"))
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--stationary-threshold", dest="stationary_threshold", type=float)
    p.add_argument("--river-buffer-m", dest="river_buffer_m", type=float)
    p.add_argument("--coast-max-points", dest="coast_max_points", type=int)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train a preset network on a dataset")
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--preset", choices=model_mod.PRESET_NAMES)
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.add_argument("--bn", action="store_const", const=True, help="enable batch normalization")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="summarize a dataset, checkpoint, or shard")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
