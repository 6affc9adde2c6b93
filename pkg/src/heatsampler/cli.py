"""Command-line entry point: ``heatsampler gen | sample | eval | report``.

Exit codes: 0 ok, 1 usage error, 2 data error. Machine-readable outputs go to
files; the one-line human summaries go to stderr.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .embeddings import load_embeddings
from .energy import PowerProfile
from .evaluation import evaluate_traces, trace_name, write_reports
from .pipeline import Corpus, SpatialConfig, run_sampler, run_uniform
from .recognition import load_captions, load_keyword_map
from .synth import ScenarioSpec, generate_corpus
from .temporal import SampleTrace, variant_preset

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

SPATIAL_KEYS = {"margin_px": int, "min_heat_c": float, "enabled": bool}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# --- settings ----------------------------------------------------------------


def parse_sets(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def read_config(path: str | None) -> tuple[dict[str, str], dict[str, str]]:
    """[sampler] and [spatial] sections of an INI file."""
    if path is None:
        return {}, {}
    if not Path(path).exists():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep ``T`` upper-case
    parser.read(path)
    sampler = dict(parser["sampler"]) if parser.has_section("sampler") else {}
    spatial = dict(parser["spatial"]) if parser.has_section("spatial") else {}
    return sampler, spatial


def _split_settings(settings: dict[str, str]) -> tuple[dict[str, str], dict[str, str]]:
    spatial = {k.removeprefix("spatial."): v for k, v in settings.items() if k.removeprefix("spatial.") in SPATIAL_KEYS}
    sampler = {k: v for k, v in settings.items() if k.removeprefix("spatial.") not in SPATIAL_KEYS}
    return sampler, spatial


def spatial_config(overrides: dict[str, str]) -> SpatialConfig:
    cfg = SpatialConfig()
    kw: dict[str, object] = {}
    for key, value in overrides.items():
        if key == "enabled":
            kw[key] = value.lower() in ("1", "true", "yes", "on")
        elif key == "min_heat_c" and value.lower() in ("none", ""):
            kw[key] = None
        else:
            kw[key] = SPATIAL_KEYS[key](value)
    return replace(cfg, **kw)


# --- commands ----------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    spec = ScenarioSpec.load(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    manifest = generate_corpus(spec, args.out)
    corpus = Corpus.from_dir(manifest)
    _log(f"gen: {len(corpus.records)} frames, {len(corpus.segments)} segments -> {args.out}")
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    corpus = Corpus.from_dir(args.corpus)
    file_sampler, file_spatial = read_config(args.config)
    set_sampler, set_spatial = _split_settings(parse_sets(args.set))
    if args.uniform is not None:
        if set_sampler or file_sampler:
            raise UsageError("sampler settings do not apply to --uniform")
        trace = run_uniform(corpus, args.uniform, args.name or "")
    else:
        try:
            config = variant_preset(args.variant)
            overrides = {**file_sampler, **set_sampler}
            config = config.with_overrides(**overrides)
        except (KeyError, ValueError) as exc:
            raise UsageError(str(exc).strip("'\"")) from None
        try:
            spatial = spatial_config({**file_spatial, **set_spatial})
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad spatial setting: {exc}") from None
        embeddings = load_embeddings(args.embeddings) if args.embeddings else None
        name = args.name or args.variant.lower().replace("-", "_")
        trace = run_sampler(corpus, config, spatial, embeddings, args.patches, name)
        trace.config["overrides"] = dict(sorted(overrides.items()))
    if args.seed is not None:
        trace.config["seed"] = args.seed
    trace.save(args.out)
    full = len(corpus.records) * corpus.rgb_dims[0] * corpus.rgb_dims[1]
    used = sum(
        (e.crop[2] * e.crop[3]) if e.crop is not None else corpus.rgb_dims[0] * corpus.rgb_dims[1]
        for e in trace.entries
    )
    _log(f"sample: {len(trace)} of {len(corpus.records)} frames, pixel ratio {used / full if full else 0:.4%} -> {args.out}")
    return EXIT_OK


def _load_traces(paths: Sequence[str]) -> dict[str, SampleTrace]:
    traces: dict[str, SampleTrace] = {}
    for p in paths:
        trace = SampleTrace.load(p)
        name = trace_name(trace, Path(p).stem)
        base, n = name, 2
        while name in traces:
            name, n = f"{base}_{n}", n + 1
        traces[name] = trace
    return traces


def _evaluate(args: argparse.Namespace):
    corpus = Corpus.from_dir(args.corpus)
    traces = _load_traces(args.traces)
    captions = load_captions(args.captions) if args.captions else None
    kmap = load_keyword_map(args.keywords) if captions else None
    profile = PowerProfile.load(args.power)
    thresholds: tuple[float, float] | str = "data" if args.thresholds == "data" else _thresholds(args.thresholds)
    result = evaluate_traces(corpus, traces, captions, kmap, profile, thresholds, args.min_frames)
    written = write_reports(result, args.report)
    for name, cov in result.coverage.items():
        per_bin = " ".join(f"{b}={v:.3f}" for b, v in cov.per_bin.items())
        _log(f"eval: {name}: coverage {per_bin}, usage {result.usage[name].ratio:.4%}")
    if result.recognition is not None:
        m = result.recognition["macro_over_classes"]
        _log(f"eval: recognition P={m['precision']:.3f} R={m['recall']:.3f} F1={m['f1']:.3f}")
    return corpus, result, written


def _thresholds(text: str) -> tuple[float, float]:
    try:
        t1, t2 = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--thresholds expects 'data' or 't1,t2', got {text!r}") from None
    if not 0 < t1 < t2:
        raise UsageError("--thresholds needs 0 < t1 < t2")
    return t1, t2


def cmd_eval(args: argparse.Namespace) -> int:
    _, _, written = _evaluate(args)
    _log(f"eval: wrote {len(written)} files to {args.report}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    from .plots import render_figures  # matplotlib only loads when needed

    corpus, result, written = _evaluate(args)
    owner = {r.frame_id: r.participant_id for r in corpus.records}
    written += render_figures(result, corpus.segments, owner, args.report)
    _log(f"report: wrote {len(written)} files to {args.report}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; SUPPRESS keeps
    # the subparser from clobbering a value given before it
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="INI file with [sampler] and [spatial] sections")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed for randomized paths (overrides the spec's)")
    common.add_argument("--set", action="append", default=argparse.SUPPRESS, metavar="KEY=VALUE",
                        help="override a sampler/spatial setting; repeatable")

    parser = _Parser(prog="heatsampler", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--spec", required=True, help="scenario spec (JSON)")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sample", parents=[common], help="run a sampler over a corpus")
    p.add_argument("--corpus", required=True, help="corpus directory or manifest")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--variant", help="adaptive preset: thor-high, thor-mid, thor-low")
    mode.add_argument("--uniform", type=float, metavar="PERIOD_S", help="fixed-period baseline")
    p.add_argument("--out", required=True, help="trace file (JSONL)")
    p.add_argument("--patches", help="directory for cropped RGB patches")
    p.add_argument("--embeddings", help="precomputed embeddings CSV")
    p.add_argument("--name", help="trace name used in reports")
    p.set_defaults(func=cmd_sample)

    for cmd, func, text in (
        ("eval", cmd_eval, "coverage, usage, recognition and energy reports"),
        ("report", cmd_report, "eval plus PNG figures"),
    ):
        p = sub.add_parser(cmd, parents=[common], help=text)
        p.add_argument("--corpus", required=True)
        p.add_argument("--traces", nargs="+", required=True)
        p.add_argument("--captions", help="caption JSONL for recognition metrics")
        p.add_argument("--keywords", help="activity/keyword CSV (default: bundled map)")
        p.add_argument("--power", help="power profile INI (default: bundled readings)")
        p.add_argument("--thresholds", default="60,162",
                       help="'t1,t2' in seconds or 'data' for head/tail breaks (default 60,162)")
        p.add_argument("--min-frames", type=int, default=4, help="frames needed to cover a segment")
        p.add_argument("--report", required=True, help="output directory")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return int(exc.code or 0)
    for key, default in (("config", None), ("seed", None), ("set", [])):
        if not hasattr(args, key):
            setattr(args, key, default)
    try:
        return args.func(args)
    except UsageError as exc:
        _log(f"heatsampler: error: {exc}")
        return EXIT_USAGE
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        _log(f"heatsampler: {type(exc).__name__}: {msg}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
