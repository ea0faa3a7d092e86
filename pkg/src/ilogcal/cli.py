"""Command-line front end.

Subcommands wrap the library one-to-one: ``validate``, ``expand``,
``simulate``, ``quality``, ``heatmap``, ``predict``, ``recommend`` and
``serve``.  Data goes to stdout, diagnostics to stderr; exit code 0 on
success, 1 on validation/operational failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import timedelta
from pathlib import Path

from .context import ParticipantProfile, read_profiles
from .events import EventLog
from .plan import PlanError
from .plan_io import diagnose, parse_plan
from .predict import ClassifierSpec, extract_features, recommend_windows, train_eval
from .quality import QualityParameters, compliance_heatmap, rank_all, run_quality_checks
from .schedule import compile_plan, occurrence_record
from .simulate import (
    behavior_model_from_dict,
    default_behavior_model,
    generate_life_sequence,
    run_simulation,
)

CLASSIFIER_ALIASES = {
    "rf": "RandomForest",
    "random-forest": "RandomForest",
    "knn": "KNearestNeighbors",
    "logreg": "LogisticRegression",
    "logistic-regression": "LogisticRegression",
    "gnb": "GaussianNaiveBayes",
    "naive-bayes": "GaussianNaiveBayes",
    "svm": "LinearSVM",
}


def _read_plan(path: str):
    return parse_plan(Path(path).read_text())


def _read_log(path: str) -> EventLog:
    with open(path) as fh:
        return EventLog.read(fh)


def _read_profiles_file(path: str | None, log: EventLog | None = None) -> list[ParticipantProfile]:
    if path:
        with open(path) as fh:
            return read_profiles(fh)
    if log is not None:
        return [ParticipantProfile(pid) for pid in sorted({r.participant for r in log})]
    return []


def _quality_params(path: str | None) -> QualityParameters:
    if not path:
        return QualityParameters()
    raw = json.loads(Path(path).read_text())
    return QualityParameters(
        max_unanswered=raw["max_unanswered"],
        max_avg_completion_time=raw["max_avg_completion_time"],
        max_avg_response_time=raw["max_avg_response_time"],
        medium_band=tuple(raw.get("medium_band", (0.0, 0.5))),
    )


def cmd_validate(args) -> int:
    diags = diagnose(Path(args.plan).read_text())
    for d in diags:
        print(f"{d.severity}: {d.path}: {d.message}", file=sys.stderr)
    return 1 if any(d.is_error for d in diags) else 0


def cmd_expand(args) -> int:
    plan = _read_plan(args.plan)
    participant = args.participant or "p0"
    timeline = compile_plan(plan, [participant])
    for occ in timeline.for_participant(participant):
        record = occurrence_record(participant, occ)
        if args.format == "ndjson":
            print(json.dumps(record))
        else:
            print(
                f"{record['scheduled_at']} {record['kind']} "
                f"{record['calendar']}/{record['collection']} #{record['seq']} "
                f"until {record['window_end']}"
            )
    return 0


def cmd_simulate(args) -> int:
    plan = _read_plan(args.plan)
    profiles = _read_profiles_file(args.profiles)
    if not profiles:
        profiles = [ParticipantProfile(f"p{i}") for i in range(args.participants)]
    if args.model:
        raw = json.loads(Path(args.model).read_text())
        raw["seed"] = args.seed
        model = behavior_model_from_dict(raw)
    else:
        model = default_behavior_model(args.seed)
    timeline = compile_plan(plan, profiles)
    starts = [info.dtstart for info in timeline.collections.values()]
    ends = [info.dtend for info in timeline.collections.values()]
    lo, hi = min(starts), max(ends) + timedelta(hours=1)
    truth = {p.id: generate_life_sequence(p.id, lo, hi, seed=model.seed) for p in profiles}
    log = run_simulation(timeline, profiles, truth, model)
    with open(args.out, "w") as fh:
        log.write(fh)
    print(f"wrote {len(log)} records to {args.out} (digest {log.digest()[:16]})", file=sys.stderr)
    return 0


def cmd_quality(args) -> int:
    log = _read_log(args.log)
    params = _quality_params(args.params)
    timeline = None
    if args.plan:
        plan = _read_plan(args.plan)
        timeline = compile_plan(plan, sorted({r.participant for r in log}))
    rankings = rank_all(log, params)
    flags = run_quality_checks(log, timeline)
    if args.format == "ndjson":
        for r in rankings:
            print(json.dumps({"record": "ranking", "participant": r.participant, "verdict": r.verdict,
                              "unanswered": r.unanswered_count, "avg_reaction": r.avg_reaction,
                              "avg_completion": r.avg_completion}))
        for f in flags:
            print(json.dumps({"record": "flag", "participant": f.participant, "kind": f.kind,
                              "at": f.at.isoformat(), "detail": f.detail, "evidence": list(f.evidence)}))
    else:
        for r in rankings:
            reaction = f"{r.avg_reaction:.1f}s" if r.avg_reaction is not None else "-"
            completion = f"{r.avg_completion:.1f}s" if r.avg_completion is not None else "-"
            print(f"{r.participant}\t{r.verdict}\tunanswered={r.unanswered_count}\t"
                  f"reaction={reaction}\tcompletion={completion}")
        for f in flags:
            print(f"FLAG\t{f.participant}\t{f.kind}\t{f.at.isoformat()}\t{f.detail}")
    return 0


def cmd_heatmap(args) -> int:
    log = _read_log(args.log)
    print(compliance_heatmap(log).to_csv(), end="")
    return 0


def cmd_predict(args) -> int:
    log = _read_log(args.log)
    profiles = _read_profiles_file(args.profiles, log)
    kind = CLASSIFIER_ALIASES.get(args.classifier, args.classifier)
    protocol = "per_participant_split" if args.protocol == "per-participant" else "five_fold_cv"
    if protocol == "per_participant_split":
        if not args.participant:
            print("--participant is required with --protocol per-participant", file=sys.stderr)
            return 2
        profiles = [p for p in profiles if p.id == args.participant]
    rows = []
    for profile in profiles:
        rows.extend(extract_features(log, None, profile, label_source=args.label))
    report = train_eval(rows, ClassifierSpec(kind=kind, seed=args.seed), protocol=protocol)
    if args.format == "ndjson":
        print(json.dumps(report.to_dict()))
    else:
        if report.skipped:
            print(f"skipped: {report.reason}")
        else:
            print(f"classifier={report.classifier} protocol={report.split_spec} rows={len(rows)}")
            print(f"accuracy={report.accuracy:.4f} kappa={report.kappa:.4f} "
                  f"precision={report.precision:.4f} recall={report.recall:.4f} f1={report.f1:.4f}")
            print(f"confusion={report.confusion}")
    return 0


def cmd_recommend(args) -> int:
    log = _read_log(args.log)
    profiles = [p for p in _read_profiles_file(args.profiles, log) if p.id == args.participant]
    if not profiles:
        print(f"unknown participant {args.participant}", file=sys.stderr)
        return 1
    rows = extract_features(log, None, profiles[0])
    rec = recommend_windows(rows, ClassifierSpec(seed=args.seed))
    if args.format == "ndjson":
        print(json.dumps({
            "participant": rec.participant,
            "no_preference": rec.no_preference,
            "ranked": [{"day_period": p, "weekday": w, "score": rec.scores[(p, w)]} for p, w in rec.ranked],
        }))
    else:
        if rec.no_preference:
            print(f"{rec.participant}: no preference (scores too close)")
        for period, weekday in rec.ranked[: args.top]:
            print(f"{rec.participant}\t{period}\tweekday={weekday}\tscore={rec.scores[(period, weekday)]:.3f}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.data_dir, args.bind)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ilogcal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a plan document, diagnostics to stderr")
    p.add_argument("plan")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("expand", help="expand a plan into its occurrence timeline")
    p.add_argument("plan")
    p.add_argument("--participant")
    p.add_argument("--format", choices=["text", "ndjson"], default="text")
    p.set_defaults(fn=cmd_expand)

    p = sub.add_parser("simulate", help="simulate participants executing a plan")
    p.add_argument("plan")
    p.add_argument("--profiles")
    p.add_argument("--model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--participants", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("quality", help="rank participants and run quality checks over a log")
    p.add_argument("log")
    p.add_argument("--params")
    p.add_argument("--plan", help="plan document, enables sensor-gap detection")
    p.add_argument("--format", choices=["text", "ndjson"], default="text")
    p.set_defaults(fn=cmd_quality)

    p = sub.add_parser("heatmap", help="participant x day answer-rate matrix as CSV")
    p.add_argument("log")
    p.set_defaults(fn=cmd_heatmap)

    p = sub.add_parser("predict", help="train and evaluate an answer-quality classifier")
    p.add_argument("log")
    p.add_argument("--profiles")
    p.add_argument("--classifier", default="rf")
    p.add_argument("--protocol", choices=["cv", "per-participant"], default="cv")
    p.add_argument("--participant")
    p.add_argument("--label", choices=["timing", "correctness"], default="timing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["text", "ndjson"], default="text")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("recommend", help="rank asking windows for one participant")
    p.add_argument("log")
    p.add_argument("--participant", required=True)
    p.add_argument("--profiles")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--format", choices=["text", "ndjson"], default="text")
    p.set_defaults(fn=cmd_recommend)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data-dir")
    p.add_argument("--bind")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PlanError as err:
        print(f"invalid plan: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"missing file: {err}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # downstream pipe (e.g. head) closed early; exit quietly
        try:
            sys.stdout.close()
        except BrokenPipeError:
            pass
        return 0


if __name__ == "__main__":
    sys.exit(main())
