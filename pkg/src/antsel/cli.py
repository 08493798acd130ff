"""Command-line interface.

Two subcommands: ``generate`` writes the scenario artifacts (geometry JSON
plus channel tensor binary) for a config file, and ``run`` executes one named
experiment and writes its CSV table (optionally a JSON mirror with the config
embedded).

Exit codes: 0 on success, 1 on a runtime failure, 2 on usage or config
errors.

The CSV written by ``run`` is byte-identical for identical (config, seed)
inputs: the wall_time_ms column is left empty there, since measured timings
vary between executions. Timings are available in the JSON mirror.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .channel import save_channel_tensor
from .experiments import (
    ScenarioConfig,
    compare_subcarrier_policies,
    config_from_dict,
    csi_robustness,
    build_channel,
    sweep_neighborhood,
    sweep_selected_count,
    write_csv,
    write_json,
)

CONFIG_VERSION = 1

EXPERIMENTS = ("sweep", "neighborhood", "subcarriers", "csi")


class ConfigError(ValueError):
    """Invalid or unreadable config document."""


def load_config(path) -> ScenarioConfig:
    """Parse a versioned JSON config document into a ScenarioConfig."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    if "version" not in doc:
        raise ConfigError(f"config {path} is missing the mandatory 'version' field")
    version = doc.pop("version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"config {path} has unsupported version {version!r}")
    try:
        return config_from_dict(doc)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"config {path} is invalid: {exc}") from exc


def cmd_generate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    geometry, tensor = build_channel(config, config.user_counts[0])
    geometry_path = out_dir / "geometry.json"
    tensor_path = out_dir / "channel.bin"
    geometry.save(geometry_path)
    save_channel_tensor(tensor, tensor_path)
    print(f"wrote {geometry_path}")
    print(f"wrote {tensor_path}")
    return 0


def _strip_timings(rows):
    return [replace(row, wall_time_ms=None) for row in rows]


def _summary_lines(rows) -> list[str]:
    best: dict[str, object] = {}
    for row in rows:
        if row.algorithm not in best or row.zf_rate > best[row.algorithm].zf_rate:
            best[row.algorithm] = row
    lines = []
    for algorithm in sorted(best):
        row = best[algorithm]
        lines.append(
            f"best zf_rate {algorithm}: {row.zf_rate!r} (n_selected={row.n_selected})"
        )
    return lines


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    extras = None
    if args.experiment == "sweep":
        rows = sweep_selected_count(config)
    elif args.experiment == "neighborhood":
        rows, traces = sweep_neighborhood(config)
        extras = {"size_traces": traces}
    elif args.experiment == "subcarriers":
        rows = compare_subcarrier_policies(config)
    else:
        rows = csi_robustness(config)
    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    timings = {
        f"{row.algorithm}/{row.policy}/k={row.k}/n={row.n_selected}/seed={row.seed}": row.wall_time_ms
        for row in rows
        if row.wall_time_ms is not None
    }
    write_csv(_strip_timings(rows), out_path)
    if args.json:
        mirror = {"wall_times_ms": timings}
        if extras:
            mirror.update(extras)
        write_json(_strip_timings(rows), out_path.with_suffix(".json"), config, extras=mirror)
    for line in _summary_lines(rows):
        print(line)
    print(f"wrote {out_path} ({len(rows)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antsel",
        description="Antenna-selection experiments on synthetic distributed-array channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write geometry JSON and channel tensor binary")
    gen.add_argument("--config", required=True, help="path to a JSON config document")
    gen.add_argument("--out", required=True, help="output directory for the artifact files")
    gen.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="run one experiment and write its CSV table")
    run.add_argument("--config", required=True, help="path to a JSON config document")
    run.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    run.add_argument(
        "--threads",
        type=int,
        default=1,
        help="parallelism hint; results are identical for any value",
    )
    run.add_argument("--json", action="store_true", help="also write a JSON mirror with config and timings")
    run.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
