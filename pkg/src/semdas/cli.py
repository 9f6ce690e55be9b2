"""Command line front end: generate embedding files, run experiments to CSV,
sweep quantization, and turn CSVs into plot-ready per-scheme data.

Exit codes: 0 success, 1 config error, 2 I/O or data-file error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .embeddings import EmbeddingFormatError, SyntheticGenConfig, generate_synthetic, save_embeddings
from .experiment import (
    config_from_mapping,
    export_csv,
    parse_config_file,
    parse_metrics_csv,
    run_experiment,
    sweep_quantization,
)
from .selection import SchemeConfig


class DataFileError(Exception):
    """Unreadable or malformed input data file (exit code 2)."""


# every override flag carries the raw string for the config parser, so flag
# values and config-file values go through one validation path
_OVERRIDE_KEYS = (
    "num_sensors", "targets_per_trial", "trials", "dimension", "payload_bits",
    "bandwidth_hz", "avg_snr_db", "rate_reference_bandwidth_hz", "schemes",
    "k_sweep", "quantization_sweep", "score_mode", "master_seed",
    "embedding_source", "embedding_path", "num_identities",
    "samples_per_identity", "intra_class_noise_sigma", "embedding_seed",
)


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    for key in _OVERRIDE_KEYS:
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=key, default=None, metavar="V",
                            help=f"override {key}")


def _build_config(args):
    mapping = {}
    if args.config:
        mapping.update(parse_config_file(args.config))
    for key in _OVERRIDE_KEYS:
        value = getattr(args, key)
        if value is not None:
            mapping[key] = value
    return config_from_mapping(mapping)


def _expand_jscm_grid(config, grid: str):
    """Append one jscm scheme per ws:wr pair in the grid string."""
    extras = []
    have = {s.label for s in config.schemes}
    for piece in grid.split(","):
        piece = piece.strip()
        if not piece:
            continue
        ws, sep, wr = piece.partition(":")
        if not sep:
            raise ValueError(f"bad jscm grid entry {piece!r}, expected <ws>:<wr>")
        scheme = SchemeConfig.jscm(float(ws), float(wr))
        if scheme.label not in have:
            have.add(scheme.label)
            extras.append(scheme)
    if not extras:
        return config
    return replace(config, schemes=config.schemes + tuple(extras))


def _cmd_generate(args) -> int:
    config = SyntheticGenConfig(
        num_identities=args.identities,
        samples_per_identity=args.samples_per_identity,
        dimension=args.dimension,
        intra_class_noise_sigma=args.sigma,
        seed=args.seed,
    )
    store = generate_synthetic(config)
    save_embeddings(store, args.out)
    print(f"wrote {len(store.records)} samples "
          f"({config.num_identities} identities, dim {config.dimension}) to {args.out}")
    return 0


def _cmd_run(args) -> int:
    config = _build_config(args)
    if args.jscm_weight_grid:
        config = _expand_jscm_grid(config, args.jscm_weight_grid)
    rows = run_experiment(config)
    export_csv(rows, args.out, config)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    config = _build_config(args)
    if not config.quantization_sweep:
        raise ValueError("sweep requires quantization_sweep (e.g. --quantization-sweep 64:2,64:8,64:32)")
    rows = sweep_quantization(config)
    export_csv(rows, args.out, config)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_report(args) -> int:
    try:
        rows, _ = parse_metrics_csv(args.csv)
    except ValueError as exc:
        raise DataFileError(f"{args.csv}: {exc}") from None

    groups: dict = {}
    for row in rows:
        groups.setdefault((row.scheme, row.kept_dims, row.bits_per_dim), []).append(row)
    multi = {}
    for scheme, _, _ in groups:
        multi[scheme] = multi.get(scheme, 0) + 1

    for (scheme, kept, bits), grp in sorted(groups.items()):
        grp.sort(key=lambda r: r.k)
        name = scheme if multi[scheme] == 1 else f"{scheme}-d{kept}-b{bits}"
        lines = ["# columns: avg_latency_ms missing_rate (one point per k)"]
        lines += [f"{r.avg_latency_ms:.6g} {r.missing_rate:.6g}" for r in grp]
        text = "\n".join(lines) + "\n"
        if args.out_dir:
            path = f"{args.out_dir.rstrip('/')}/{name}.dat"
            with open(path, "w") as fh:
                fh.write(text)
            print(f"wrote {path}")
        else:
            print(f"# {name}")
            sys.stdout.write(text)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semdas",
        description="semantic data sourcing simulator",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("generate", help="write a synthetic embedding file")
    p.add_argument("--out", required=True, help="output embedding file")
    p.add_argument("--identities", type=int, default=32)
    p.add_argument("--samples-per-identity", type=int, default=8)
    p.add_argument("--dimension", type=int, default=64)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=12345)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run", help="run one experiment and export CSV")
    _add_override_flags(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--jscm-weight-grid", metavar="WS:WR,...",
                   help="extra jscm weight pairs to run alongside the configured schemes")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run the quantization sweep and export CSV")
    _add_override_flags(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="emit plot-ready latency/missing data per scheme")
    p.add_argument("csv", help="metrics CSV produced by run/sweep")
    p.add_argument("--out-dir", help="write <scheme>.dat files here instead of stdout")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits on usage errors and --help; fold into our codes
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "func", None) is None:
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except (EmbeddingFormatError, DataFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
