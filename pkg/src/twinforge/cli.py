"""Command-line entry point.

Exit codes: 0 success (``detect``: same state), 10 ``detect`` found a
different state, 2 usage error, 1 any other failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from threadpoolctl import threadpool_limits

from . import __version__, pipeline

EXIT_SAME = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DIFFERENT = 10

log = logging.getLogger("twinforge")


def _common(p):
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    p.add_argument("--preset", choices=["paper", "desk"], help="network scale (default desk)")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twinforge", description="cGAN convergence-based damage detection")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write the four-scenario oscillator benchmark")
    _common(p)
    p.add_argument("--format", choices=["f64-binary", "csv"], default="f64-binary")

    p = sub.add_parser("train", help="train one cGAN on a baseline/probe record pair")
    _common(p)
    p.add_argument("--baseline", required=True, help="record labelled 0 (healthy reference)")
    p.add_argument("--probe", required=True, help="record labelled 1")

    p = sub.add_parser("generate", help="draw synthetic segments from a trained model")
    _common(p)
    p.add_argument("--run", required=True, help="output directory of `train`")
    p.add_argument("--n", type=int, help="segments per label (default from config: 1000)")

    p = sub.add_parser("features", help="feature vectors and PCA coordinates")
    _common(p)
    p.add_argument("--run", required=True, help="output directory of `train`")
    p.add_argument("--generated", required=True, help="output directory of `generate`")

    p = sub.add_parser("classify", help="SVM on generated features, tested on real ones")
    _common(p)
    p.add_argument("--features", required=True, help="output directory of `features`")

    p = sub.add_parser("report", help="all stages for one pair, plot data gathered in one directory")
    _common(p)
    p.add_argument("--baseline", required=True)
    p.add_argument("--probe", required=True)

    p = sub.add_parser("detect", help="compare learning durations of a baseline pair and a probe pair")
    _common(p)
    p.add_argument("--baseline", nargs=2, required=True, metavar=("A", "B"))
    p.add_argument("--probe", nargs=2, required=True, metavar=("A", "B"))
    p.add_argument("--ratio-threshold", type=float, default=1.5)
    return ap


def _progress(epoch, it, score_d):
    if epoch % 10 == 0:
        log.info("epoch %d  iter %d  score_D %.3f", epoch, it, score_d)


def _run(args) -> int:
    cmd = args.command
    if cmd == "simulate":
        pipeline.simulate_stage(args.seed if args.seed is not None else 0, args.out, args.format)
        return EXIT_SAME
    if cmd in ("generate", "features", "classify"):
        # configuration travels with the upstream manifest
        if args.config or args.preset:
            log.warning("--config/--preset are ignored by %s; settings come from the upstream manifest", cmd)
        if cmd == "generate":
            pipeline.generate_stage(args.run, args.out, args.n)
        elif cmd == "features":
            pipeline.features_stage(args.run, args.generated, args.out)
        else:
            pipeline.classify_stage(args.features, args.out)
        return EXIT_SAME
    cfg = pipeline.resolve_config(args.config, args.seed, args.preset)
    if cmd == "train":
        pipeline.train_stage(args.baseline, args.probe, cfg, args.out, _progress)
        return EXIT_SAME
    if cmd == "report":
        pipeline.report_stage(args.baseline, args.probe, cfg, args.out, _progress)
        return EXIT_SAME
    verdict = pipeline.detect_stage(args.baseline, args.probe, cfg, args.out, args.ratio_threshold, _progress)
    print(f"{verdict.verdict} (ratio {verdict.ratio:.3f}, threshold {verdict.ratio_threshold})")
    return EXIT_DIFFERENT if verdict.different else EXIT_SAME


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    threads = os.environ.get("TWINFORGE_THREADS", "1")
    try:
        n_threads = int(threads)
        if n_threads < 1:
            raise ValueError
    except ValueError:
        print(f"twinforge: TWINFORGE_THREADS must be a positive integer, got {threads!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        with threadpool_limits(limits=n_threads):
            return _run(args)
    except Exception as exc:  # every failure maps to exit code 1 with a one-line diagnostic
        log.debug("failure", exc_info=True)
        print(f"twinforge {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
