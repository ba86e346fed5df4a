"""Command line: ``adapsne run`` and ``adapsne inspect``.

Exit codes: 0 success, 2 config or usage error, 3 data error, 4 numerical abort.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

from . import _accel
from .config import load_config_file, pipeline_config, resolve
from .controller import AdapSNE
from .errors import ConfigError, DataError, NumericalError, ValidationError
from .io import load_dataset
from .report import RunReport, build_report, format_summary

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("adapsne")


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    ap = argparse.ArgumentParser(prog="adapsne", description="Entropy-guided t-SNE dataset sampler.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sample exemplars from a feature matrix")
    run.add_argument("--data", required=True, help="csv or rawmat feature file")
    run.add_argument("--config", help="flat JSON config, or a report.json to reproduce")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--seed", type=_u64, help="master seed; overrides every sub-seed")
    grp = run.add_mutually_exclusive_group()
    grp.add_argument("--keep-ratio", type=float)
    grp.add_argument("--m", type=_positive_int)
    run.add_argument("--format", choices=("csv", "rawmat"), help="input format (sniffed when omitted)")
    run.add_argument("--threads", type=_positive_int, help="worker threads (also ADAPSNE_THREADS)")

    ins = sub.add_parser("inspect", help="summarise a report.json")
    ins.add_argument("--report", required=True)
    return ap


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("ADAPSNE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"ADAPSNE_THREADS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("ADAPSNE_THREADS must be >= 1")
        return n
    return None


def _fmt(x):
    return repr(float(x))


def write_outputs(out, rep, result):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "exemplars.csv").write_text("".join(f"{i}\n" for i in rep.exemplars))
    lines = ["k,pi_t,H\n"] + [f"{t['k']},{_fmt(t['pi_t'])},{_fmt(t['H'])}\n" for t in rep.trajectory]
    (out / "entropy_trace.csv").write_text("".join(lines))
    y = result.final.embedding.coords
    cells = result.final.histogram.cells
    lines = ["index,y0,y1,cell_row,cell_col\n"]
    lines += [f"{i},{_fmt(y[i, 0])},{_fmt(y[i, 1])},{cells[i, 0]},{cells[i, 1]}\n" for i in range(y.shape[0])]
    (out / "embedding.csv").write_text("".join(lines))
    rep.save(out / "report.json")


def cmd_run(args):
    threads = _threads(args.threads)
    if threads is not None:
        _accel.set_threads(threads)
    doc = load_config_file(args.config) if args.config else None
    flat = resolve(doc, seed=args.seed, **{"sampler.m": args.m, "sampler.keep_ratio": args.keep_ratio})
    cfg = pipeline_config(flat)
    data = load_dataset(args.data, args.format)
    try:
        data.require_pipeline_size()
        runner = AdapSNE(data, cfg)
    except ConfigError:
        raise
    except ValidationError as exc:
        # sizes that conflict with the data (m > N, pi0 >= N) are config problems
        raise ConfigError(str(exc)) if data.n >= 3 else DataError(str(exc)) from exc
    result = runner.run()
    rep = build_report(result, flat, data)
    write_outputs(args.out, rep, result)
    log.info("%s after %d steps; %d exemplars written to %s", rep.termination, len(rep.trajectory) - 1, rep.m, args.out)
    return EXIT_OK


def cmd_inspect(args):
    rep = RunReport.load(args.report)
    try:
        text = format_summary(rep)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed report {args.report}: {exc}") from exc
    print(text)
    return EXIT_OK


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)  # usage errors exit 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_inspect(args)
    except DataError as exc:
        print(f"adapsne: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"adapsne: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"adapsne: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
