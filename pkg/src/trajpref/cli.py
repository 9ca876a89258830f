"""Command-line front end: simulate, decode, rank, report.

Every run is driven by one JSON config file (all keys optional, full
defaulting) plus a few overriding flags. All outputs land under ``--out``
together with a manifest recording the effective config hash and library
versions. Exit codes: 0 success, 2 I/O, 3 data format, 4 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy
import scipy

from . import __version__
from .dataset import dump_json, load_bundle, save_bundle, write_atomic
from .errors import ParameterError, TrajprefError
from .evaluation import MetricReport, format_report, per_task_csv
from .pipeline import (
    compute_features,
    decode_session,
    load_verdicts,
    rank_session,
    verdicts_payload,
)
from .rank import RANK_METHODS
from .synth import SynthConfig, gen_session

_EXIT_IO = 2
_EXIT_DATA = 3
_EXIT_USAGE = 4


@dataclass
class DecodeOptions:
    folds: int = 5
    reg_strength: float = 1.0
    label_correction: bool = True
    strict_past_only: bool = False
    band_lo: float = 0.5
    band_hi: float = 40.0
    drop_artifacts: bool = True

    def __post_init__(self):
        if self.folds < 2:
            raise ParameterError(f"folds must be >= 2, got {self.folds}")
        if self.reg_strength < 0.0:
            raise ParameterError("reg_strength must be >= 0")

    def to_dict(self) -> dict:
        return {
            "folds": self.folds,
            "reg_strength": self.reg_strength,
            "label_correction": self.label_correction,
            "strict_past_only": self.strict_past_only,
            "band_lo": self.band_lo,
            "band_hi": self.band_hi,
            "drop_artifacts": self.drop_artifacts,
        }


@dataclass
class RankOptions:
    methods: tuple = RANK_METHODS
    feature_reg: float = 0.1
    tpp_passes: int = 5
    ndcg_ks: tuple = (1, 3)

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.ndcg_ks = tuple(int(k) for k in self.ndcg_ks)
        for m in self.methods:
            if m not in RANK_METHODS:
                raise ParameterError(
                    f"unknown ranking method {m!r}; known: {', '.join(RANK_METHODS)}"
                )
        if not self.methods:
            raise ParameterError("at least one ranking method is required")
        if any(k < 1 for k in self.ndcg_ks):
            raise ParameterError("ndcg cutoffs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "feature_reg": self.feature_reg,
            "tpp_passes": self.tpp_passes,
            "ndcg_ks": list(self.ndcg_ks),
        }


@dataclass
class RunConfig:
    """Effective configuration of one CLI run."""

    synth: SynthConfig = field(default_factory=SynthConfig)
    decode: DecodeOptions = field(default_factory=DecodeOptions)
    rank: RankOptions = field(default_factory=RankOptions)

    def to_dict(self) -> dict:
        return {
            "synth": self.synth.to_dict(),
            "decode": self.decode.to_dict(),
            "rank": self.rank.to_dict(),
        }


def _build_section(cls, payload: dict, name: str):
    try:
        return cls(**payload)
    except TypeError as exc:
        raise ParameterError(f"bad {name} config: {exc}") from exc


def load_config(path: str | None, seed: int | None = None, methods: str | None = None) -> RunConfig:
    """Read the config file (if any) and apply flag overrides."""
    payload: dict = {}
    if path is not None:
        cfg_path = Path(path)
        try:
            with open(cfg_path, "r") as fh:
                payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{cfg_path}: invalid config JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ParameterError(f"{cfg_path}: config must be a JSON object")
    known = {"synth", "decode", "rank"}
    unknown = set(payload) - known
    if unknown:
        raise ParameterError(f"unknown config sections: {sorted(unknown)}")

    synth_payload = dict(payload.get("synth", {}))
    if seed is not None:
        synth_payload["seed"] = seed
    synth = (
        _build_section(SynthConfig, synth_payload, "synth")
        if synth_payload
        else SynthConfig()
    )
    decode = _build_section(DecodeOptions, dict(payload.get("decode", {})), "decode")
    rank_payload = dict(payload.get("rank", {}))
    if methods is not None:
        rank_payload["methods"] = [m.strip() for m in methods.split(",") if m.strip()]
    rank = _build_section(RankOptions, rank_payload, "rank")
    return RunConfig(synth=synth, decode=decode, rank=rank)


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require_out(out: str) -> Path:
    out_dir = Path(out)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out_dir}")
    return out_dir


def _write_manifest(out_dir: Path, command: str, cfg: RunConfig, outputs: list) -> None:
    manifest = {
        "command": command,
        "config_hash": config_hash(cfg),
        "config": cfg.to_dict(),
        "outputs": outputs,
        "versions": {
            "trajpref": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
    }
    write_atomic(out_dir / "manifest.json", dump_json(manifest))


def cmd_simulate(cfg: RunConfig, out: str) -> int:
    out_dir = _require_out(out)
    bundle = gen_session(cfg.synth)
    save_bundle(bundle, out_dir)
    _write_manifest(
        out_dir,
        "simulate",
        cfg,
        ["session.json", "trajectories.json", "scenes.json", "recordings/"],
    )
    print(f"wrote dataset with {len(bundle.comparisons)} comparisons to {out_dir}")
    return 0


def cmd_decode(cfg: RunConfig, dataset: str, out: str) -> int:
    out_dir = _require_out(out)
    bundle = load_bundle(dataset)
    result = decode_session(
        bundle,
        folds=cfg.decode.folds,
        reg_strength=cfg.decode.reg_strength,
        label_correction=cfg.decode.label_correction,
        strict_past_only=cfg.decode.strict_past_only,
        band=(cfg.decode.band_lo, cfg.decode.band_hi),
        drop_artifacts=cfg.decode.drop_artifacts,
    )
    write_atomic(out_dir / "verdicts.json", dump_json(verdicts_payload(result)))
    _write_manifest(out_dir, "decode", cfg, ["verdicts.json"])
    for line in result.summary_lines():
        print(line)
    return 0


def cmd_rank(cfg: RunConfig, verdicts: str, dataset: str, out: str) -> int:
    out_dir = _require_out(out)
    bundle = load_bundle(dataset)
    records = load_verdicts(verdicts)
    tasks = bundle.task_map()
    feats = compute_features(bundle)
    rankings, report = rank_session(
        records,
        tasks,
        feats,
        methods=cfg.rank.methods,
        feature_reg=cfg.rank.feature_reg,
        tpp_passes=cfg.rank.tpp_passes,
        ndcg_ks=cfg.rank.ndcg_ks,
    )
    rankings_doc = {
        "format": "trajpref-rankings-v1",
        "rankings": [
            {"task_id": task_id, "source": source, **rankings[(task_id, source, method)].to_dict()}
            for (task_id, source, method) in sorted(rankings)
        ],
    }
    write_atomic(out_dir / "rankings.json", dump_json(rankings_doc))
    write_atomic(
        out_dir / "report.json",
        dump_json({"format": "trajpref-report-v1", **report.to_dict()}),
    )
    write_atomic(out_dir / "report.txt", format_report(report))
    write_atomic(out_dir / "per_task.csv", per_task_csv(report))
    _write_manifest(
        out_dir, "rank", cfg, ["rankings.json", "report.json", "report.txt", "per_task.csv"]
    )
    print(format_report(report), end="")
    return 0


def cmd_report(report_path: str) -> int:
    path = Path(report_path)
    if not path.exists():
        raise FileNotFoundError(f"report file does not exist: {path}")
    from .errors import DataFormatError

    try:
        with open(path, "r") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != "trajpref-report-v1":
        raise DataFormatError(f"{path}: not a report file")
    try:
        report = MetricReport.from_dict(payload)
    except TrajprefError as exc:
        raise DataFormatError(str(exc)) from exc
    print(format_report(report), end="")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trajpref", description=__doc__)
    parser.add_argument("--version", action="version", version=f"trajpref {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--out", required=True, help="existing output directory")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")

    sub.add_parser("simulate", parents=[common], help="generate a synthetic session bundle")

    p_decode = sub.add_parser("decode", parents=[common], help="decode verdicts from a bundle")
    p_decode.add_argument("--dataset", required=True, help="bundle directory")

    p_rank = sub.add_parser("rank", parents=[common], help="rank candidates and report metrics")
    p_rank.add_argument("--dataset", required=True, help="bundle directory")
    p_rank.add_argument("--verdicts", required=True, help="verdicts.json from decode")
    p_rank.add_argument("--methods", default=None, help="comma-separated ranking methods")

    p_report = sub.add_parser("report", help="print the table from a report.json")
    p_report.add_argument("--report", required=True, help="path to report.json")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "report":
            return cmd_report(args.report)
        methods = getattr(args, "methods", None)
        cfg = load_config(args.config, seed=args.seed, methods=methods)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.command == "decode":
            return cmd_decode(cfg, args.dataset, args.out)
        if args.command == "rank":
            return cmd_rank(cfg, args.verdicts, args.dataset, args.out)
        raise ParameterError(f"unknown command {args.command!r}")
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return _EXIT_IO
    except TrajprefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
