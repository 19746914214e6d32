"""Command-line entry point: ``declarealign {align,batch,verify}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .aligner import Alignment, AlignResult, Move, SearchConfig, align, default_timeout
from .model import LogParseError, Model, ModelParseError, Trace, parse_log, parse_model
from .repair import UNIT_COSTS, CostFunction, parse_costs

EXIT_OK, EXIT_INPUT, EXIT_TIMEOUT, EXIT_UNSAT = 0, 1, 2, 3
GAP = ">>"


class InputError(Exception):
    pass


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def load_inputs(args) -> tuple[Model, list[Trace], CostFunction]:
    try:
        model = parse_model(_read(args.model))
        log = parse_log(_read(args.log))
        cf = parse_costs(_read(args.costs)) if args.costs else UNIT_COSTS
    except (ModelParseError, LogParseError, ValueError) as e:
        raise InputError(str(e)) from None
    return model, log.traces, cf


def config_from(args, cf: CostFunction) -> SearchConfig:
    timeout = args.timeout if args.timeout is not None else default_timeout()
    return SearchConfig(
        early_pruning=not args.no_early_pruning,
        chain_preprocessing=not args.no_chain_preprocessing,
        grouped_fixes=not args.no_grouped_fixes,
        timeout_seconds=timeout,
        cost_function=cf,
    )


# ---------------------------------------------------------------------------
# rendering


def result_json(trace_id, r: AlignResult) -> dict:
    moves = r.alignment.moves if r.alignment else ()
    return {
        "trace_id": trace_id,
        "cost": r.cost,
        "moves": [{"kind": m.kind, "log": m.log, "model": m.model} for m in moves],
        "stats": {
            "expanded_states": r.stats.expanded_states,
            "discovered_states": r.stats.discovered_states,
            "time_ms": round(r.stats.time_ms, 3),
            "timed_out": r.stats.timed_out,
        },
    }


def moves_from_json(doc: dict) -> tuple[Move, ...]:
    return tuple(Move(m["kind"], m["log"], m["model"]) for m in doc["moves"])


def _fmt_cost(cost: float) -> str:
    return str(int(cost)) if float(cost).is_integer() else f"{cost:g}"


def render_table(alignment: Alignment) -> str:
    logs = [m.log if m.log is not None else GAP for m in alignment.moves]
    models = [m.model if m.model is not None else GAP for m in alignment.moves]
    widths = [max(len(a), len(b)) for a, b in zip(logs, models)]

    def row(label, cells):
        return (label + " | ".join(c.ljust(w) for c, w in zip(cells, widths))).rstrip()

    return "\n".join([row("log   | ", logs), row("model | ", models), f"cost: {_fmt_cost(alignment.cost)}"])


def parse_table(text: str) -> tuple[Move, ...]:
    """Inverse of :func:`render_table` (moves only)."""
    lines = text.splitlines()
    logs = [c.strip() for c in lines[0].split("|")[1:]]
    models = [c.strip() for c in lines[1].split("|")[1:]]
    moves = []
    for a, b in zip(logs, models):
        if a == GAP:
            moves.append(Move("model", None, b))
        elif b == GAP:
            moves.append(Move("log", a, None))
        else:
            moves.append(Move("synchronous", a, b))
    return tuple(moves)


def render(trace: Trace, r: AlignResult, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result_json(trace.id, r), indent=2) + "\n"
    if r.status == "ok":
        return render_table(r.alignment) + "\n"
    return f"{r.status.upper()} ({r.stats.expanded_states} states expanded)\n"


def exit_code(r: AlignResult) -> int:
    return {"ok": EXIT_OK, "timeout": EXIT_TIMEOUT, "unsat": EXIT_UNSAT}[r.status]


# ---------------------------------------------------------------------------
# commands


def cmd_align(args) -> int:
    model, traces, cf = load_inputs(args)
    cfg = config_from(args, cf)
    out_dir = args.out is not None and Path(args.out).is_dir()
    if args.trace is not None:
        chosen = [t for t in traces if t.id == args.trace]
        if not chosen:
            raise InputError(f"unknown trace id {args.trace!r}")
    elif out_dir or len(traces) == 1:
        chosen = traces
    else:
        raise InputError("the log has several traces: pass --trace or an --out directory")
    code = EXIT_OK
    for t in chosen:
        r = align(t, model, cfg)
        text = render(t, r, args.format)
        if args.out is None:
            sys.stdout.write(text)
        elif out_dir:
            suffix = "json" if args.format == "json" else "txt"
            write_atomic(Path(args.out) / f"{t.id}.{suffix}", text)
        else:
            write_atomic(args.out, text)
        if code == EXIT_OK:
            code = exit_code(r)
    return code


def _batch_one(job):
    t, model, cfg = job
    r = align(t, model, cfg)
    result = _fmt_cost(r.cost) if r.status == "ok" else r.status.upper()
    return [t.id, result, f"{r.stats.time_ms:.1f}", r.stats.expanded_states, r.stats.discovered_states]


BATCH_HEADER = ["trace_id", "result", "time_ms", "expanded_states", "discovered_states"]


def batch_csv(rows: list[list]) -> str:
    done = [float(r[2]) for r in rows if r[1] not in ("TIMEOUT", "UNSAT")]
    mean = sum(done) / len(done) if done else 0.0
    timeouts = sum(1 for r in rows if r[1] == "TIMEOUT")
    unsat = sum(1 for r in rows if r[1] == "UNSAT")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BATCH_HEADER)
    w.writerows(rows)
    w.writerow([])
    w.writerow(["summary", "mean_time_ms", "timeouts", "unsat", "completed"])
    w.writerow(["summary", f"{mean:.1f}", timeouts, unsat, len(done)])
    return buf.getvalue()


def cmd_batch(args) -> int:
    model, traces, cf = load_inputs(args)
    cfg = config_from(args, cf)
    jobs = [(t, model, cfg) for t in traces]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_batch_one, jobs))
    else:
        rows = [_batch_one(j) for j in jobs]
    write_atomic(args.metrics, batch_csv(rows))
    print(f"{len(rows)} traces aligned; metrics in {args.metrics}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .harness import run_suite

    if args.instances < 0:
        raise InputError("--instances must be >= 0")
    bounds = dict(
        alphabet_size=args.alphabet_size, constraint_count=args.constraints, trace_length=args.trace_length
    )
    report = run_suite(
        args.instances,
        args.seed,
        max_cost=args.max_cost,
        admissibility=not args.skip_admissibility,
        jobs=args.jobs,
        **bounds,
    )
    for line in report.summary_lines():
        print(line)
    for r in report.mismatches[:10]:
        print(f"mismatch seed={r.seed} trace={list(r.trace)} oracle={r.oracle_cost} got={r.runs['on']}")
    return EXIT_OK if report.failures() == 0 else EXIT_INPUT


# ---------------------------------------------------------------------------


def _positive(kind):
    def conv(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return value

    return conv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="declarealign", description="Optimal alignment against declarative models.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", required=True)
        sp.add_argument("--log", required=True)
        sp.add_argument("--timeout", type=_positive(float), default=None, help="seconds per trace")
        sp.add_argument("--costs", default=None, help="CSV: activity,model_move_cost,log_move_cost")
        sp.add_argument("--no-early-pruning", action="store_true")
        sp.add_argument("--no-chain-preprocessing", action="store_true")
        sp.add_argument("--no-grouped-fixes", action="store_true")

    a = sub.add_parser("align", help="align one trace (or all, into a directory)")
    common(a)
    a.add_argument("--trace", default=None)
    a.add_argument("--out", default=None)
    a.add_argument("--format", choices=["json", "table"], default="json")
    a.set_defaults(func=cmd_align)

    b = sub.add_parser("batch", help="align every trace and write a metrics CSV")
    common(b)
    b.add_argument("--metrics", required=True)
    b.add_argument("--jobs", type=_positive(int), default=1)
    b.set_defaults(func=cmd_batch)

    v = sub.add_parser("verify", help="cross-check against the brute-force oracle")
    v.add_argument("--instances", type=int, required=True)
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--max-cost", type=_positive(float), default=6)
    v.add_argument("--alphabet-size", type=int, default=5)
    v.add_argument("--constraints", type=int, default=4)
    v.add_argument("--trace-length", type=int, default=8)
    v.add_argument("--jobs", type=_positive(int), default=1)
    v.add_argument("--skip-admissibility", action="store_true")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
