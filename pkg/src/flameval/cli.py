"""Command-line entry point.

Exit codes: 0 success, 1 I/O or runtime failure, 2 usage error,
3 FLAM result differs from the centralized result (self-check failure).

Every flag can also come from an INI-style ``--config`` file, one section per
command (``[evaluate]``, ``[sweep]``, ``[serve coordinator]`` ...), keys named
like the long flags. Command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import signal
import sys
from pathlib import Path

from .baseline import WeightScheme, build_deviation_report, weighted_average_evaluate
from .errors import FlamError, ProtocolError
from .measures import flam_evaluate
from .metrics import MetricSpec, Task, all_specs, concatenate, evaluate_centralized
from .partitioning import (
    SkewConfig,
    SkewKind,
    partition,
    read_labels,
    write_plan,
)
from .predictors import ingest_predictions
from .report import (
    REPORT_FIELDS,
    SWEEP_FIELDS,
    SyntheticConfig,
    report_rows,
    sweep,
    synthetic_federation,
    write_csv,
    write_rows,
)

log = logging.getLogger("flameval")

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_EQUIVALENCE = 0, 1, 2, 3
FLAM_TOLERANCE = 1e-9

ENV_ADDRESS = "FLAMEVAL_ADDRESS"
ENV_TIMEOUT = "FLAMEVAL_TIMEOUT"


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _specs(text: str, task: Task) -> list[MetricSpec]:
    if text.strip().lower() == "all":
        return all_specs(task)
    try:
        return [MetricSpec.parse(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"--metrics: {exc}") from None


def _schemes(text: str) -> list[WeightScheme]:
    try:
        return [WeightScheme.parse(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"--scheme: {exc}") from None


def _address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise UsageError(f"--address must be host:port, got {text!r}")
    return host, int(port)


def _add_skew_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", type=str, help="IID, QS, LS, LQS or MS")
    p.add_argument("--alpha-label", type=float)
    p.add_argument("--alpha-quantity", type=float)
    p.add_argument("--participants", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shared-classes", type=str, default="", help="comma-separated, MS only")


def _add_synthetic_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", type=str, default="classification")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--accuracy", type=float, default=0.7, help="synthetic kernel accuracy")
    p.add_argument("--heterogeneous", action="store_true", help="per-participant predictors")
    p.add_argument("--noise-sigma", type=float, default=0.5)


def _skew_config(args) -> SkewConfig:
    if not args.kind:
        raise UsageError("--kind is required")
    try:
        kind = SkewKind.parse(args.kind)
    except ValueError:
        raise UsageError(f"--kind: unknown skew {args.kind!r}") from None
    if kind in (SkewKind.LS, SkewKind.LQS) and args.alpha_label is None:
        raise UsageError(f"--alpha-label is required for {kind.value}")
    if kind in (SkewKind.QS, SkewKind.LQS) and args.alpha_quantity is None:
        raise UsageError(f"--alpha-quantity is required for {kind.value}")
    try:
        return SkewConfig(
            kind=kind,
            participants=args.participants,
            seed=args.seed,
            alpha_quantity=args.alpha_quantity if kind in (SkewKind.QS, SkewKind.LQS) else None,
            alpha_label=args.alpha_label if kind in (SkewKind.LS, SkewKind.LQS) else None,
            shared_classes=frozenset(_ints(args.shared_classes)),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _synthetic_config(args, skew: SkewConfig) -> SyntheticConfig:
    return SyntheticConfig(
        task=Task(args.task),
        class_count=args.classes or 10,
        samples=args.samples,
        participants=skew.participants,
        kind=skew.kind,
        alpha_label=skew.alpha_label,
        alpha_quantity=skew.alpha_quantity,
        shared_classes=skew.shared_classes,
        accuracy=args.accuracy,
        heterogeneous=args.heterogeneous,
        noise_sigma=args.noise_sigma,
    )


def _output(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="", encoding="utf-8")


def cmd_partition(args) -> int:
    cfg = _skew_config(args)
    if not args.labels:
        raise UsageError("--labels is required")
    labels = read_labels(args.labels)
    plan = partition(labels, cfg, class_count=args.classes)
    if args.out in (None, "-"):
        sys.stdout.write("pool_index,participant_id\n")
        for i, pid in enumerate(plan.assignment.tolist()):
            sys.stdout.write(f"{i},{pid}\n")
    else:
        write_plan(plan, args.out)
    return EXIT_OK


def _load_federation(args):
    try:
        task = Task(args.task)
    except ValueError:
        raise UsageError(f"--task: unknown task {args.task!r}") from None
    if args.predictions:
        if not Path(args.predictions).exists():
            raise FileNotFoundError(args.predictions)
        return task, ingest_predictions(args.predictions, task, args.classes if task is Task.CLASSIFICATION else None)
    if not args.kind:
        raise UsageError("give --predictions FILE or synthetic flags (--kind ...)")
    skew = _skew_config(args)
    return task, synthetic_federation(_synthetic_config(args, skew), args.seed)


def cmd_evaluate(args) -> int:
    task, parts = _load_federation(args)
    specs = _specs(args.metrics, task)
    schemes = _schemes(args.scheme)
    if args.mode != "all":
        return _evaluate_single_mode(args, parts, specs, schemes)
    report = build_deviation_report(parts, specs, schemes)
    rows = report_rows(report)
    meta = {"command": "evaluate", "participants": report.participants,
            "sample_counts": report.sample_counts}
    if args.out in (None, "-"):
        write_csv(rows, REPORT_FIELDS, sys.stdout)
    else:
        write_rows(rows, REPORT_FIELDS, args.out, args.json, meta)
    worst = report.max_flam_deviation()
    if worst > FLAM_TOLERANCE:
        log.error("FLAM deviates from centralized evaluation by %r", worst)
        return EXIT_EQUIVALENCE
    return EXIT_OK


def _evaluate_single_mode(args, parts, specs, schemes) -> int:
    out = _output(args.out)
    try:
        out.write("metric,mode,value\n")
        pooled = concatenate(parts) if args.mode == "centralized" else None
        for spec in specs:
            if args.mode == "flam":
                values = [("flam", flam_evaluate(parts, spec).value)]
            elif args.mode == "centralized":
                values = [("centralized", evaluate_centralized(pooled, spec).value)]
            else:
                values = [(f"weighted_average:{s.value}", weighted_average_evaluate(parts, spec, s).value)
                          for s in schemes]
            for mode, v in values:
                out.write(f"{spec.name},{mode},{v!r}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.seeds is not None and args.seeds <= 0:
        raise UsageError("--seeds must be positive")
    seeds = _ints(args.seed_list) if args.seed_list else list(range(args.seed, args.seed + (args.seeds or 0)))
    if not seeds:
        raise UsageError("a sweep needs at least one seed (--seeds N or --seed-list)")
    args.seed = seeds[0]
    alphas = _floats(args.alphas) if args.alphas else [None]
    kind = SkewKind.parse(args.kind) if args.kind else None
    if kind in (SkewKind.LS, SkewKind.LQS) and args.alpha_label is None and alphas != [None]:
        args.alpha_label = alphas[0]
    if kind is SkewKind.QS and args.alpha_quantity is None and alphas != [None]:
        args.alpha_quantity = alphas[0]
    skew = _skew_config(args)
    task = Task(args.task)
    rows = sweep(_synthetic_config(args, skew), alphas, seeds, _specs(args.metrics, task), _schemes(args.scheme))
    if args.out in (None, "-"):
        write_csv(rows, SWEEP_FIELDS, sys.stdout)
    else:
        write_rows(rows, SWEEP_FIELDS, args.out, args.json, {"command": "sweep", "seeds": seeds})
    bad = [r for r in rows if r["flam"] is not None and abs(r["flam"] - r["centralized"]) > FLAM_TOLERANCE]
    return EXIT_EQUIVALENCE if bad else EXIT_OK


def _install_sigterm():
    def handler(signum, frame):
        raise KeyboardInterrupt

    try:
        signal.signal(signal.SIGTERM, handler)
    except ValueError:
        pass  # not on the main thread


def cmd_serve_coordinator(args) -> int:
    from .federation import Coordinator, Listener

    host, port = _address(args.address)
    task = Task(args.task)
    if task is Task.CLASSIFICATION and not args.classes:
        raise UsageError("--classes is required for classification")
    if args.participants < 1:
        raise UsageError("--participants must be >= 1")
    specs = _specs(args.metrics, task)
    coordinator = Coordinator(task, args.classes, timeout=args.timeout, allow_partial=args.allow_partial)
    listener = Listener(host, port)
    log.info("coordinator listening on %s:%d", *listener.address)
    if args.port_file:
        Path(args.port_file).write_text(f"{listener.address[1]}\n")
    _install_sigterm()
    try:
        for _ in range(args.participants):
            try:
                conn = listener.accept(args.timeout)
            except TimeoutError:
                if args.allow_partial and coordinator.connections:
                    break
                raise ProtocolError(
                    f"timeout: {len(coordinator.connections)} of {args.participants} participants registered"
                ) from None
            coordinator.register(conn)
        out = _output(args.out)
        try:
            out.write("round,metric,mode,value,sample_count\n")
            for r in range(1, args.rounds + 1):
                for v in coordinator.run_round(specs, round_id=r):
                    out.write(f"{r},{v.spec.name},{v.mode.value},{v.value!r},{v.sample_count}\n")
        finally:
            if out is not sys.stdout:
                out.close()
    except KeyboardInterrupt:
        log.warning("interrupted; shutting down")
        return 130
    finally:
        coordinator.close()
        listener.close()
    return EXIT_OK


def cmd_serve_participant(args) -> int:
    from .federation import Participant, SocketConnection

    host, port = _address(args.address)
    task = Task(args.task)
    parts = ingest_predictions(args.predictions, task, args.classes if task is Task.CLASSIFICATION else None)
    ids = _participant_ids(args.predictions)
    if args.id not in ids:
        raise UsageError(f"participant {args.id} has no rows in {args.predictions}")
    data = parts[ids.index(args.id)]
    participant = Participant(args.id, data)
    _install_sigterm()
    conn = SocketConnection.connect(host, port, args.timeout)
    try:
        if args.schema_version is not None:
            conn.send(participant.registration(version=args.schema_version))
            participant.serve(conn, register=False)
        else:
            participant.serve(conn)
    except KeyboardInterrupt:
        return 130
    finally:
        conn.close()
    return EXIT_OK


def _participant_ids(path) -> list[int]:
    ids = set()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row and row[0].strip().lstrip("-").isdigit():
                ids.add(int(row[0]))
    return sorted(ids)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flameval", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI file with one section per command")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="split a label pool into a partition plan CSV")
    _add_skew_flags(p)
    p.add_argument("--labels", help="one label per line")
    p.add_argument("--classes", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_partition, section="partition")

    p = sub.add_parser("evaluate", help="centralized vs weighted-average vs FLAM report")
    p.add_argument("--predictions", help="participant_id,y_true,y_pred CSV")
    _add_skew_flags(p)
    _add_synthetic_flags(p)
    p.set_defaults(classes=None)
    p.add_argument("--metrics", default="all")
    p.add_argument("--scheme", default="sample-count")
    p.add_argument("--mode", choices=["all", "flam", "centralized", "weighted"], default="all")
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_evaluate, section="evaluate")

    p = sub.add_parser("sweep", help="tidy CSV over alphas x seeds")
    _add_skew_flags(p)
    _add_synthetic_flags(p)
    p.add_argument("--alphas", help="comma-separated alpha values")
    p.add_argument("--seeds", type=int, help="number of consecutive seeds starting at --seed")
    p.add_argument("--seed-list", help="explicit comma-separated seeds")
    p.add_argument("--metrics", default="all")
    p.add_argument("--scheme", default="sample-count")
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_sweep, section="sweep")

    serve = sub.add_parser("serve", help="run a coordinator or participant over TCP")
    roles = serve.add_subparsers(dest="role", required=True)
    default_addr = os.environ.get(ENV_ADDRESS, "127.0.0.1:7878")
    default_timeout = float(os.environ.get(ENV_TIMEOUT, "30"))

    p = roles.add_parser("coordinator")
    p.add_argument("--address", default=default_addr)
    p.add_argument("--timeout", type=float, default=default_timeout)
    p.add_argument("--participants", type=int, default=1)
    p.add_argument("--task", default="classification")
    p.add_argument("--classes", type=int)
    p.add_argument("--metrics", default="all")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--allow-partial", action="store_true")
    p.add_argument("--port-file", help="write the bound port here (useful with port 0)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_serve_coordinator, section="serve coordinator")

    p = roles.add_parser("participant")
    p.add_argument("--address", default=default_addr)
    p.add_argument("--timeout", type=float, default=default_timeout)
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--task", default="classification")
    p.add_argument("--classes", type=int)
    p.add_argument("--schema-version", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_serve_participant, section="serve participant")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cp = configparser.ConfigParser()
    if not cp.read(args.config):
        raise FileNotFoundError(args.config)
    if not cp.has_section(args.section):
        return args
    explicit = {a.split("=", 1)[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    for key, raw in cp.items(args.section):
        dest = key.replace("-", "_")
        if dest in explicit:
            continue
        if not hasattr(args, dest):
            raise UsageError(f"unknown key {key!r} in [{args.section}]")
        current = getattr(args, dest)
        if isinstance(current, bool):
            value = cp.getboolean(args.section, key)
        elif isinstance(current, int) and not isinstance(current, bool):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        elif dest in ("participants", "seed", "seeds", "classes", "samples", "rounds", "id"):
            value = int(raw)
        elif dest in ("alpha_label", "alpha_quantity", "timeout", "accuracy", "noise_sigma"):
            value = float(raw)
        else:
            value = raw
        setattr(args, dest, value)
    return args


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except FileNotFoundError as exc:
        print(f"flameval: no such file: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError) as exc:
        print(f"flameval: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"flameval: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"flameval: no such file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, FlamError) as exc:
        print(f"flameval: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
