"""Command-line interface.

Exit codes: 0 ok, 2 bad arguments, 3 bad or inconsistent statistics,
4 no sign change for a threshold, 5 bound violation, 6 too few samples.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

from . import channels as ch
from . import keyrate as kr
from . import mcsim, oracle
from .errors import (
    DegenerateStatistics,
    FormatError,
    HDB92Error,
    InconsistentStats,
    InsufficientSamples,
    InvalidArgument,
    InvalidChannel,
    InvalidStats,
    NoSignChange,
)

EXIT_OK, EXIT_ARGS, EXIT_STATS, EXIT_BRACKET, EXIT_SOUNDNESS, EXIT_SAMPLES = 0, 2, 3, 4, 5, 6

CHANNEL_SOURCES = ("depolarizing", "amplitude-damping", "stats-file", "kraus-file")


def _exit_code(exc: HDB92Error) -> int:
    if isinstance(exc, NoSignChange):
        return EXIT_BRACKET
    if isinstance(exc, InsufficientSamples):
        return EXIT_SAMPLES
    if isinstance(exc, (InvalidStats, InconsistentStats, DegenerateStatistics, FormatError, InvalidChannel)):
        return EXIT_STATS
    return EXIT_ARGS


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def parse_grid(text: str) -> list[float]:
    """``lo:hi:steps`` (inclusive, steps+1 points), a comma list, or empty."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidArgument(f"grid must be lo:hi:steps, got {text!r}")
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
        if steps < 0:
            raise InvalidArgument("grid steps must be non-negative")
        if steps == 0:
            return [lo]
        return [lo + (hi - lo) * k / steps for k in range(steps + 1)]
    return [float(t) for t in text.split(",") if t.strip()]


def parse_ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _cfg(args) -> ch.ProtocolConfig:
    if args.dim is None:
        raise InvalidArgument("--dim is required for this channel")
    return ch.ProtocolConfig(args.dim, args.i, args.j)


def _noise(args) -> float:
    value = args.p if args.channel == "amplitude-damping" and args.p is not None else args.q
    if value is None:
        flag = "--p" if args.channel == "amplitude-damping" else "--q"
        raise InvalidArgument(f"{flag} is required for the {args.channel} channel")
    return value


def resolve_kraus(args) -> tuple[ch.KrausSet, ch.ProtocolConfig]:
    if args.channel == "depolarizing":
        cfg = _cfg(args)
        return ch.depolarizing_kraus(cfg.D, _noise(args)), cfg
    if args.channel == "amplitude-damping":
        cfg = _cfg(args)
        return ch.amplitude_damping_kraus(cfg.D, _noise(args)), cfg
    if args.channel == "kraus-file":
        if not args.path:
            raise InvalidArgument("--path is required for kraus-file")
        kraus = ch.load_kraus(args.path)
        return kraus, ch.ProtocolConfig(kraus.dim, args.i, args.j)
    raise InvalidArgument(f"channel {args.channel!r} does not define a Kraus set")


def resolve_stats(args) -> ch.ObservedStats:
    if args.channel == "stats-file":
        if not args.path:
            raise InvalidArgument("--path is required for stats-file")
        return ch.load_stats(args.path)
    if args.channel == "depolarizing":
        return ch.depolarizing_stats(_cfg(args), _noise(args))
    kraus, cfg = resolve_kraus(args)
    return ch.stats_from_channel(kraus, cfg)


def _aligned(rows: list[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in rows)
    lines = []
    for k, v in rows:
        if isinstance(v, float):
            v = f"{v:.9f}"
        lines.append(f"{k.ljust(width)}  {v}")
    return "\n".join(lines) + "\n"


def cmd_rate(args, out) -> int:
    stats = resolve_stats(args)
    if args.dump_stats:
        ch.dump_stats(stats, args.dump_stats)
    res = kr.key_rate(stats)
    cfg = stats.cfg
    if args.format == "json":
        doc = {"channel": args.channel, "dimension": cfg.D, "i": cfg.i, "j": cfg.j, **res.to_dict()}
        out.write(json.dumps(doc, indent=2) + "\n")
        return EXIT_OK
    rows = [("channel", args.channel), ("dimension", cfg.D), ("i", cfg.i), ("j", cfg.j)]
    if args.channel in ("depolarizing", "amplitude-damping"):
        rows.append(("noise", _fmt(_noise(args))))
    rows += [
        ("S(A|E) bound", res.s_ae_bound),
        ("H(A|B)", res.h_ab),
        ("rate", res.rate),
        ("x*", res.x_star),
        ("y*", res.y_star),
        ("N", res.N),
        ("p00 p01 p10 p11", " ".join(f"{p:.9f}" for p in res.joint)),
    ]
    if res.projected:
        rows.append(("warning", "empty feasible interval; K projected"))
    if res.rate <= 0:
        rows.append(("status", "abort (rate <= 0)"))
    out.write(_aligned(rows))
    return EXIT_OK


def sweep_csv(rows: list[kr.SweepRow], compare_bb84: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["dim", "q", "rate_extb92"] + (["rate_bb84"] if compare_bb84 else [])
    w.writerow(header)
    for r in rows:
        line = [r.dim, _fmt(r.q), "" if r.rate_extb92 is None else _fmt(r.rate_extb92)]
        if compare_bb84:
            line.append("" if r.rate_bb84 is None else _fmt(r.rate_bb84))
        w.writerow(line)
    return buf.getvalue()


def cmd_sweep(args, out) -> int:
    if args.channel not in kr.CHANNELS:
        raise InvalidArgument(f"sweep needs a channel family, one of {kr.CHANNELS}")
    dims = parse_ints(args.dims)
    qs = parse_grid(args.q if args.q is not None else args.p or "")
    rows = kr.sweep(args.channel, dims, qs, compare_bb84=args.compare_bb84, i=args.i, j=args.j)
    for r in rows:
        if r.error:
            print(f"note: dim={r.dim} q={_fmt(r.q)}: {r.error}", file=sys.stderr)
    text = sweep_csv(rows, args.compare_bb84)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_OK


def cmd_threshold(args, out) -> int:
    if args.channel not in kr.CHANNELS:
        raise InvalidArgument(f"threshold needs a channel family, one of {kr.CHANNELS}")
    cfg = _cfg(args)
    q = kr.threshold(args.channel, cfg, args.protocol, args.tol)
    if args.format == "json":
        doc = {"channel": args.channel, "protocol": args.protocol, "dimension": cfg.D,
               "i": cfg.i, "j": cfg.j, "tol": args.tol, "threshold": q}
        out.write(json.dumps(doc, indent=2) + "\n")
    else:
        out.write(f"{q:.6f}\n")
    return EXIT_OK


def cmd_compare(args, out) -> int:
    """Noise thresholds of both protocols on the depolarizing channel."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dim", "threshold_extb92", "threshold_bb84"])
    for d in parse_ints(args.dims):
        cfg = ch.ProtocolConfig(d, args.i, args.j)
        t1 = kr.threshold("depolarizing", cfg, "extb92", args.tol)
        t2 = kr.threshold("depolarizing", cfg, "bb84", args.tol)
        w.writerow([d, _fmt(t1), _fmt(t2)])
    out.write(buf.getvalue())
    return EXIT_OK


def cmd_verify(args, out) -> int:
    if args.random is not None:
        dims = tuple(parse_ints(args.dims)) if args.dims else ((args.dim,) if args.dim else (2, 3, 4))
        cases = oracle.random_suite(args.random, args.seed, dims)
        passed = sum(c.passed for c in cases)
        if args.format == "json":
            doc = {
                "cases": len(cases),
                "passed": passed,
                "seed": args.seed,
                "dims": list(dims),
                "failures": [
                    {"index": c.index, "dim": c.dim, **c.report.to_dict()} for c in cases if not c.passed
                ],
            }
            out.write(json.dumps(doc, indent=2) + "\n")
        else:
            worst = max((c.report.bound_minimized - c.report.exact for c in cases), default=math.nan)
            out.write(_aligned([
                ("cases", len(cases)),
                ("passed", f"{passed}/{len(cases)}"),
                ("max bound - exact", f"{worst:.3e}"),
            ]))
        return EXIT_OK if passed == len(cases) else EXIT_SOUNDNESS
    kraus, cfg = resolve_kraus(args)
    rep = oracle.verify_bound(kraus, cfg)
    if args.format == "json":
        out.write(json.dumps({"dimension": cfg.D, "i": cfg.i, "j": cfg.j, **rep.to_dict()}, indent=2) + "\n")
    else:
        rows = [(k, v) for k, v in rep.to_dict().items() if k != "pass"]
        rows.append(("result", "pass" if rep.pass_ else "FAIL"))
        out.write(_aligned(rows))
    return EXIT_OK if rep.pass_ else EXIT_SOUNDNESS


def cmd_simulate(args, out) -> int:
    kraus, cfg = resolve_kraus(args)
    sim = mcsim.SimConfig(cfg, kraus, args.rounds, args.key_prob, args.seed)
    report = mcsim.run_simulation(sim)
    doc = report.to_dict()
    if args.analyze:
        doc["analysis"] = mcsim.empirical_key_rate(report).to_dict()
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_OK


def _channel_args(p: argparse.ArgumentParser, choices=CHANNEL_SOURCES, default="depolarizing") -> None:
    p.add_argument("--channel", choices=choices, default=default)
    p.add_argument("--dim", type=int)
    p.add_argument("--q", help="depolarizing parameter (or grid for sweep)")
    p.add_argument("--p", help="amplitude-damping parameter (or grid for sweep)")
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--path", help="stats-file or kraus-file input")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdb92", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="key rate for one channel or stats file")
    _channel_args(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--dump-stats", metavar="PATH")
    p.set_defaults(func=cmd_rate, scalar=True)

    p = sub.add_parser("sweep", help="rate table over dimensions and noise levels (CSV)")
    _channel_args(p, kr.CHANNELS)
    p.add_argument("--dims", default="2")
    p.add_argument("--compare-bb84", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep, scalar=False)

    p = sub.add_parser("threshold", help="largest noise level with non-negative rate")
    _channel_args(p, kr.CHANNELS)
    p.add_argument("--protocol", choices=kr.PROTOCOLS, default="extb92")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_threshold, scalar=True)

    p = sub.add_parser("compare", help="depolarizing thresholds of both protocols (CSV)")
    p.add_argument("--dims", default="2,4,8,16")
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_compare, scalar=True)

    p = sub.add_parser("verify", help="check the bound against the exact oracle")
    _channel_args(p, ("depolarizing", "amplitude-damping", "kraus-file"))
    p.add_argument("--random", type=int, metavar="N", help="run N seeded random channels instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", help="comma list of dimensions for --random")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_verify, scalar=True)

    p = sub.add_parser("simulate", help="Monte-Carlo run of the protocol (JSON report)")
    _channel_args(p, ("depolarizing", "amplitude-damping", "kraus-file"))
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--key-prob", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--analyze", action="store_true")
    p.set_defaults(func=cmd_simulate, scalar=True)
    return parser


def _coerce_scalars(args) -> None:
    # single-point commands take numeric --q/--p; sweep keeps them as grid text
    if not args.scalar:
        return
    for name in ("q", "p"):
        v = getattr(args, name, None)
        if v is not None:
            try:
                setattr(args, name, float(v))
            except ValueError as exc:
                raise InvalidArgument(f"--{name} must be a number, got {v!r}") from exc


def main(argv: list[str] | None = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        _coerce_scalars(args)
        return args.func(args, out)
    except HDB92Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
