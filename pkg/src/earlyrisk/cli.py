"""Command-line front end.

Subcommands: stats, preprocess, train-ss3, extract-vocab, serve, run,
simulate, evaluate, plot-data. Exit codes: 0 on success, 1 on usage errors,
2 on runtime failures. Diagnostics go to stderr, data to stdout or files.
Options can also come from a JSON config file (``--config``); explicit flags
win on conflict.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__, wordconf
from .classifier import ClassifierError, ClassifierSpec, OracleClassifier, make_classifier
from .client import ProtocolError, RunRecord, run as run_session, simulate
from .corpus import (
    CorpusError,
    DEFAULT_TASK_ID,
    SPLITS,
    corpus_stats,
    load_corpus,
    load_gold,
    train_valid_split,
    training_samples,
)
from .metrics import DEFAULT_ERDE_O, DEFAULT_SPEED_PENALTY, full_report
from .policy import PRESETS, PolicyConfig
from .preprocess import normalize
from .server import build_httpd


class UsageError(Exception):
    """Bad invocation discovered after argparse (missing merged option, bad value)."""


class _Parser(argparse.ArgumentParser):
    # Usage problems exit 1; exit 2 is reserved for runtime failures.
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _print_json(payload: object) -> None:
    print(json.dumps(payload, ensure_ascii=False, indent=2))


def _load_config(args: argparse.Namespace) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError("config file must contain a JSON object")
    return data


def _merge(args: argparse.Namespace, defaults: dict[str, object]) -> None:
    """Fill unset options from the config file, then from defaults."""
    config = _load_config(args)
    unknown = set(config) - set(defaults) - {"predict_after_alarm"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for dest, default in defaults.items():
        if getattr(args, dest, None) is None:
            setattr(args, dest, config.get(dest, default))
    if not getattr(args, "predict_after_alarm", True) and config.get("predict_after_alarm"):
        args.predict_after_alarm = True


def _require(args: argparse.Namespace, *dests: str) -> None:
    for dest in dests:
        if getattr(args, dest) is None:
            flag = "--" + dest.replace("_", "-")
            raise UsageError(f"{flag} is required (flag or config file)")


def _parse_policy(text: str) -> PolicyConfig:
    if text in PRESETS:
        return PRESETS[text]
    path = Path(text)
    if not path.exists():
        raise UsageError(f"unknown policy {text!r}: expected one of {sorted(PRESETS)} or a JSON config path")
    try:
        return PolicyConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise UsageError(f"policy file {path} is not valid JSON: {exc}")


def _parse_classifier(text: str, corpus=None):
    if text == "oracle":
        if corpus is None:
            raise UsageError("the oracle classifier is only available in simulate")
        gold = corpus.gold_labels()
        if len(gold) != len(corpus.users):
            raise UsageError("the oracle classifier needs a fully labeled corpus")
        return OracleClassifier(gold)
    if text.startswith("builtin:"):
        return make_classifier(ClassifierSpec(kind="builtin", model_path=text[len("builtin:") :]))
    if text.startswith("external:"):
        return make_classifier(ClassifierSpec(kind="external", endpoint=text[len("external:") :]))
    raise UsageError(f"unknown classifier {text!r}: expected builtin:<model.json>, external:<url>, or oracle")


def _cmd_stats(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus, args.split, args.task)
    _print_json(corpus_stats(corpus).to_dict())
    return 0


def _cmd_preprocess(args: argparse.Namespace) -> int:
    if args.json:
        _print_json([normalize(line.rstrip("\n")) for line in sys.stdin])
    else:
        for line in sys.stdin:
            print(normalize(line.rstrip("\n")))
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus, args.split, args.task)
    samples = training_samples(corpus, parts=args.parts)
    normalized = [type(s)(normalize(s.text), s.label, s.origin_user, s.part_index) for s in samples]
    train, valid = train_valid_split(normalized, valid_fraction=args.valid_fraction, seed=args.seed)
    model = wordconf.fit(train, smoothing=args.smoothing)
    wordconf.save_model(model, args.out)
    _print_json(
        {
            "model": str(args.out),
            "n_samples": len(normalized),
            "n_train": len(train),
            "n_valid": len(valid),
            "valid_f1_positive": wordconf.validation_f1_positive(model, valid),
        }
    )
    return 0


def _cmd_extract_vocab(args: argparse.Namespace) -> int:
    model = wordconf.load_model(args.model)
    words = wordconf.extract_vocabulary(model, args.k)
    _print_json([{"token": w.token, "confidence": w.confidence} for w in words])
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    _merge(args, {"corpus": None, "split": "train", "task": DEFAULT_TASK_ID, "host": "127.0.0.1", "port": 8080, "runs_dir": "runs"})
    _require(args, "corpus")
    corpus = load_corpus(args.corpus, args.split, args.task)
    httpd = build_httpd(corpus, args.host, args.port, args.runs_dir)
    host, port = httpd.server_address[:2]
    print(
        f"serving task {corpus.task_id!r} on http://{host}:{port} "
        f"({httpd.mock.total_rounds} rounds, {len(corpus.users)} users)",
        file=sys.stderr,
    )
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        print("stopped", file=sys.stderr)
    finally:
        httpd.server_close()
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    _merge(
        args,
        {
            "server": None,
            "token": None,
            "task": DEFAULT_TASK_ID,
            "classifier": None,
            "policy": None,
            "window": 10,
            "out": "run.json",
        },
    )
    _require(args, "server", "token", "classifier", "policy")
    record = run_session(
        args.server,
        args.token,
        args.task,
        _parse_classifier(args.classifier),
        _parse_policy(args.policy),
        n_window=args.window,
        out_path=args.out,
        predict_after_alarm=args.predict_after_alarm,
    )
    alarms = sum(1 for u in record.users.values() if u.decision == 1)
    _print_json({"run": str(args.out), "rounds": len(record.round_durations_s), "users": len(record.users), "alarms": alarms})
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    _merge(
        args,
        {
            "corpus": None,
            "split": "train",
            "task": DEFAULT_TASK_ID,
            "classifier": None,
            "policy": None,
            "window": 10,
            "out_dir": "simulation",
            "gold": None,
            "token": "simulation",
        },
    )
    _require(args, "corpus", "classifier", "policy")
    corpus = load_corpus(args.corpus, args.split, args.task)
    record, report = simulate(
        corpus,
        _parse_classifier(args.classifier, corpus=corpus),
        _parse_policy(args.policy),
        n_window=args.window,
        out_dir=args.out_dir,
        gold=load_gold(args.gold) if args.gold else None,
        token=args.token,
        predict_after_alarm=args.predict_after_alarm,
    )
    if report is not None:
        _print_json(report.to_dict())
    else:
        print("no gold labels available, metrics skipped", file=sys.stderr)
        _print_json({"run": str(Path(args.out_dir) / "run.json"), "rounds": len(record.round_durations_s), "users": len(record.users)})
    return 0


def _parse_erde_o(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise UsageError(f"--erde-o must be comma-separated integers, got {text!r}")
    if not values:
        raise UsageError("--erde-o needs at least one deadline")
    return values


_CSV_FIELDS = ("run", "accuracy", "macro_precision", "macro_recall", "macro_f1", "f1_positive", "latency_tp", "speed", "latency_weighted_f1")


def _append_csv_row(path: Path, run_name: str, report_dict: dict) -> None:
    erde_fields = [f"erde_{o}" for o in report_dict["erde"]]
    fields = list(_CSV_FIELDS[:6]) + erde_fields + list(_CSV_FIELDS[6:])
    row = {k: report_dict.get(k) for k in _CSV_FIELDS[1:]}
    row["run"] = run_name
    for o, value in report_dict["erde"].items():
        row[f"erde_{o}"] = value
    new_file = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        if new_file:
            writer.writeheader()
        writer.writerow(row)


def _cmd_evaluate(args: argparse.Namespace) -> int:
    record = RunRecord.load(args.run)
    gold = load_gold(args.gold)
    report = full_report(
        record.final_decisions(),
        gold,
        erde_o=_parse_erde_o(args.erde_o),
        c_fp=args.cfp,
        p_penalty=args.penalty,
    )
    payload = report.to_dict()
    _print_json(payload)
    if args.csv:
        _append_csv_row(Path(args.csv), str(args.run), payload)
    return 0


def _cmd_plot_data(args: argparse.Namespace) -> int:
    record = RunRecord.load(args.run_file)
    if args.user not in record.users:
        raise ValueError(f"user {args.user!r} does not appear in the run record")
    rows = [(pt.round, pt.p_positive) for pt in record.users[args.user].trajectory if pt.p_positive is not None]
    if args.json:
        _print_json([{"round": r, "p_positive": p} for r, p in rows])
    else:
        print("round\tp_positive")
        for r, p in rows:
            print(f"{r}\t{p!r}")
    if args.figure:
        from . import figures

        gold_label = None
        if args.gold:
            gold_label = load_gold(args.gold).get(args.user)
        figures.save_trajectory_figure(record, args.user, args.figure, gold_label=gold_label)
        print(f"figure written to {args.figure}", file=sys.stderr)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="earlyrisk", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="summarize a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default="train", choices=SPLITS)
    p.add_argument("--task", default=DEFAULT_TASK_ID)
    p.add_argument("--json", action="store_true", help="output is always JSON; accepted for symmetry")
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser("preprocess", help="normalize stdin lines to stdout")
    p.add_argument("--json", action="store_true", help="emit one JSON array instead of plain lines")
    p.set_defaults(handler=_cmd_preprocess)

    p = sub.add_parser("train-ss3", help="fit the word-confidence model on a labeled corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train", choices=SPLITS)
    p.add_argument("--task", default=DEFAULT_TASK_ID)
    p.add_argument("--smoothing", type=float, default=wordconf.DEFAULT_SMOOTHING)
    p.add_argument("--parts", type=int, default=3, help="chunks per user history for augmentation")
    p.add_argument("--valid-fraction", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--json", action="store_true", help="output is always JSON; accepted for symmetry")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("extract-vocab", help="top-k confident tokens from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("-k", type=int, default=wordconf.DEFAULT_TOP_WORDS)
    p.add_argument("--json", action="store_true", help="output is always JSON; accepted for symmetry")
    p.set_defaults(handler=_cmd_extract_vocab)

    p = sub.add_parser("serve", help="serve a corpus round by round over HTTP")
    p.add_argument("--corpus")
    p.add_argument("--split", default=None, choices=SPLITS)
    p.add_argument("--task", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--runs-dir", default=None, help="directory for per-round submission snapshots")
    p.add_argument("--config", help="JSON config file; flags win on conflict")
    p.set_defaults(handler=_cmd_serve)

    p = sub.add_parser("run", help="participate against a running server")
    p.add_argument("--server")
    p.add_argument("--token")
    p.add_argument("--task", default=None)
    p.add_argument("--classifier", help="builtin:<model.json> or external:<url>")
    p.add_argument("--policy", help="preset name or JSON config path")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--out", default=None, help="run record path (default run.json)")
    p.add_argument("--predict-after-alarm", action="store_true")
    p.add_argument("--config", help="JSON config file; flags win on conflict")
    p.add_argument("--json", action="store_true", help="output is always JSON; accepted for symmetry")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("simulate", help="run server and client in-process and score the run")
    p.add_argument("--corpus")
    p.add_argument("--split", default=None, choices=SPLITS)
    p.add_argument("--task", default=None)
    p.add_argument("--classifier", help="builtin:<model.json>, external:<url>, or oracle")
    p.add_argument("--policy", help="preset name or JSON config path")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--gold", default=None, help="gold sidecar when the corpus is unlabeled")
    p.add_argument("--token", default=None)
    p.add_argument("--predict-after-alarm", action="store_true")
    p.add_argument("--config", help="JSON config file; flags win on conflict")
    p.add_argument("--json", action="store_true", help="output is always JSON; accepted for symmetry")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("evaluate", help="score a run record against gold labels")
    p.add_argument("--run", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--erde-o", default=",".join(str(o) for o in DEFAULT_ERDE_O))
    p.add_argument("--cfp", type=float, default=None, help="false-positive cost (default: positive prevalence)")
    p.add_argument("--penalty", type=float, default=DEFAULT_SPEED_PENALTY)
    p.add_argument("--csv", default=None, help="append one ranking row to this CSV file")
    p.add_argument("--json", action="store_true", help="output is always JSON; accepted for symmetry")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("plot-data", help="per-round probabilities for one user, optionally as a figure")
    p.add_argument("run_file")
    p.add_argument("--user", required=True)
    p.add_argument("--figure", default=None, help="also render the trajectory to this image file")
    p.add_argument("--gold", default=None, help="gold sidecar used to color the alarm line")
    p.add_argument("--json", action="store_true", help="emit a JSON array instead of the tab-separated table")
    p.set_defaults(handler=_cmd_plot_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code is None else int(exc.code)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CorpusError, ClassifierError, ProtocolError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
