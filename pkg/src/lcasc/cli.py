"""Command-line entry point.

Exit codes: 0 success, 1 validation/config, 2 I/O, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .cnn7 import VARIANTS, build_cnn7
from .complexity import count_params, ensemble_size
from .config import RunConfig, load_run_config
from .errors import ConfigError, LcascError
from .frontend import KINDS
from .nn.network import read_checkpoint_header
from .nn.spec import ModelSpec

log = logging.getLogger("lcasc")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


def _config(args) -> RunConfig:
    return load_run_config(args.config) if args.config else RunConfig()


def cmd_synth(args) -> int:
    from .synth import synth_dataset

    manifest = synth_dataset(args.out, n_per_class=args.n_per_class, seconds=args.seconds,
                             sample_rate=args.sample_rate, seed=args.seed)
    log.info("wrote %s", manifest)
    print(manifest)
    return EXIT_OK


def cmd_extract(args) -> int:
    from .pipeline import extract, load_manifest_for

    cfg = _config(args)
    entries = load_manifest_for(cfg, args.manifest)
    summary = extract(cfg, args.kind, entries, args.out, jobs=args.jobs)
    log.info("extract %s: %d computed, %d cached, %d failed", args.kind,
             len(summary.computed), len(summary.skipped), len(summary.failed))
    for rec_id, err in sorted(summary.failed.items()):
        log.error("  %s: %s", rec_id, err)
    return EXIT_IO if summary.failed else EXIT_OK


def cmd_train(args) -> int:
    from .pipeline import train_branch

    out = train_branch(_config(args), args.branch, args.manifest)
    print(out)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .pipeline import eval_branches, run_dir

    cfg = _config(args)
    explicit = {}
    for item in args.checkpoint or []:
        branch, sep, path = item.partition("=")
        if not sep or branch not in KINDS:
            raise ConfigError(f"--checkpoint expects BRANCH=PATH with BRANCH in {KINDS}, got {item!r}")
        explicit[branch] = Path(path)
    branches = sorted(set(args.branch or []) | set(explicit))
    if not branches:
        raise ConfigError("name at least one --branch or --checkpoint")
    if args.fuse and len(branches) < 2:
        raise ConfigError("--fuse needs at least two branches")
    checkpoints = {}
    for b in branches:
        path = explicit.get(b, run_dir(cfg, b) / "model.ckpt")
        if not path.exists():
            raise ConfigError(f"no checkpoint for branch {b} at {path}; run `lcasc train --branch {b}`")
        checkpoints[b] = path
    out = Path(args.out) if args.out else cfg.resolve(cfg.paths.runs) / "eval" / cfg.hash()
    reports = eval_branches(cfg, checkpoints, args.fuse, out, args.manifest)
    for name, rep in reports.items():
        log.info("%s: %.1f%% (%d recordings)", name, rep.overall_accuracy, rep.total)
    print(out)
    return EXIT_OK


def cmd_audit(args) -> int:
    if args.checkpoint:
        header = read_checkpoint_header(args.checkpoint)
        spec = ModelSpec.from_dict(header["model_spec"])
        stored = sum(_numel(t["shape"]) for t in header["tensors"] if t["trainable"])
    else:
        spec = build_cnn7(args.variant, args.classes)
        stored = None
    report = count_params(spec)
    total_kb = ensemble_size([report] * args.ensemble, include_bn=args.include_bn)
    text = report.to_text()
    if args.ensemble > 1:
        text += f"\nensemble of {args.ensemble}: {total_kb:.2f} KB"
    if stored is not None:
        text += f"\ncheckpoint trainable elements: {stored}"
        if stored != report.total_params:
            log.error("checkpoint holds %d trainable elements, audit counts %d", stored, report.total_params)
            return EXIT_CONFIG
    print(text)
    if args.json:
        payload = {**report.to_dict(), "ensemble": args.ensemble, "ensemble_kb": total_kb,
                   "include_bn": args.include_bn}
        Path(args.json).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.assert_max_kb is not None and total_kb > args.assert_max_kb:
        log.error("size %.2f KB exceeds the %.2f KB budget", total_kb, args.assert_max_kb)
        return EXIT_CONFIG
    return EXIT_OK


def _numel(shape) -> int:
    n = 1
    for s in shape:
        n *= s
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcasc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-dataset", help="write the toy synthetic WAV corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=4)
    p.add_argument("--seconds", type=float, default=3.0)
    p.add_argument("--sample-rate", type=int, default=44100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="compute and cache spectrograms")
    p.add_argument("--config")
    p.add_argument("--manifest")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--out", help="cache directory (default: <features>/<kind>)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train one spectrogram branch")
    p.add_argument("--config")
    p.add_argument("--manifest")
    p.add_argument("--branch", choices=KINDS, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate branches, optionally with product fusion")
    p.add_argument("--config")
    p.add_argument("--manifest")
    p.add_argument("--branch", action="append", choices=KINDS)
    p.add_argument("--checkpoint", action="append", metavar="BRANCH=PATH")
    p.add_argument("--fuse", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("audit", help="count trainable parameters and check a size budget")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--variant", choices=VARIANTS)
    g.add_argument("--checkpoint")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--ensemble", type=int, default=1)
    p.add_argument("--include-bn", action="store_true",
                   help="count BN gamma/beta toward the budget (default: weights and biases only)")
    p.add_argument("--assert-max-kb", type=float)
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except LcascError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
