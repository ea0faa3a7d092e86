"""Answer-quality prediction from temporal, situational and demographic context.

An answer counts as *high quality* when it was stored within 30 minutes
of delivery (inclusive); missed or late answers are low quality.  For
each question occurrence we extract the weekday (1 = Monday), the day
period (Morning/Afternoon/Evening/Night over the participant-local
hour), the most recent answers to the where/what-doing/who-with
questions at delivery time, and the participant's demographics.

Five classifier families train on the one-hot encoding, either with
deterministic 5-fold cross-validation (hash-assigned, balanced folds)
or with a per-participant two-weeks-train / two-weeks-predict split.
Trained per-participant models rank (day period, weekday) cells by the
predicted chance of a high-quality answer; top cells can be turned into
platform shift proposals bounded by the revision policy.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Mapping, Optional, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .classifiers import CLASSIFIERS
from .context import LifeSequence, ParticipantProfile, context_at
from .events import EventLog, QAEvent, TimingMetrics
from .schedule import (
    Actor,
    Revision,
    RevisionPolicy,
    RevisionTarget,
    Shift,
    Timeline,
    apply_revision,
    PolicyViolationError,
    ImmutablePastError,
)
from .simulate import day_period

QUALITY_HORIZON_S = 30 * 60
DAY_PERIODS = ("Morning", "Afternoon", "Evening", "Night")
UNKNOWN = "Unknown"

CONTEXT_CATEGORIES = ("WE", "WA", "WO")


class DegenerateDataError(ValueError):
    """Training data holds a single class; nothing to learn."""


def label_quality(timing: TimingMetrics) -> int:
    """1 when the answer was stored within 30 minutes of delivery."""
    if timing.reaction_time is None or timing.completion_time is None:
        return 0
    return int(timing.reaction_time + timing.completion_time <= QUALITY_HORIZON_S)


@dataclass(frozen=True)
class FeatureVector:
    row_id: str
    participant: str
    delivered_at: datetime
    weekday: int  # 1 = Monday .. 7 = Sunday
    day_period: str
    we_label: str
    wa_label: str
    wo_label: str
    gender: str
    degree: str
    department: str
    label: int
    wi_label: Optional[str] = None
    correct_label: Optional[int] = None


def extract_features(
    log: EventLog,
    ground: Optional[LifeSequence],
    profile: ParticipantProfile,
    include_mood: bool = False,
    label_source: str = "timing",
) -> list[FeatureVector]:
    """One vector per delivered question occurrence of one participant.

    Context labels come from the participant's own most recent stored
    answers at or before delivery (the cold-start sentinel is Unknown);
    ``label_source`` may be "timing" (the 30-minute rule) or
    "correctness" (simulator ground truth, also recomputable from
    ``ground`` when event records lack the annotation).
    """
    if label_source not in ("timing", "correctness"):
        raise ValueError(f"unknown label source {label_source!r}")
    tz = ZoneInfo(profile.timezone)
    mine = [e for e in log.qa_events() if e.participant == profile.id]
    by_ref: dict = {}
    for event in mine:
        by_ref.setdefault(event.ref, {})[event.kind] = event
    answers = sorted(
        (e for e in mine if e.kind == "AnswerStored" and e.payload is not None),
        key=lambda e: e.at,
    )

    def latest_answer(category: str, at: datetime) -> str:
        label = UNKNOWN
        for event in answers:
            if event.at > at:
                break
            if event.category == category:
                label = event.payload
        return label

    rows: list[FeatureVector] = []
    for ref in sorted(by_ref, key=lambda r: (r.calendar_id, r.collection_id, r.seq_no)):
        events = by_ref[ref]
        delivered = events.get("QuestionDelivered")
        if delivered is None:
            continue
        stored = events.get("AnswerStored")
        within = stored is not None and (stored.at - delivered.at).total_seconds() <= QUALITY_HORIZON_S
        correct: Optional[int] = None
        if stored is not None and stored.correct is not None:
            correct = int(stored.correct)
        elif stored is not None and ground is not None and stored.category:
            ctx = context_at(ground, delivered.at)
            truth = ctx.label_for(stored.category) if ctx is not None else None
            correct = int(truth is not None and stored.payload == truth)
        elif stored is None:
            correct = 0
        if label_source == "timing":
            label = int(within)
        else:
            if correct is None:
                continue  # no correctness oracle available for this row
            label = correct
        local = delivered.at.astimezone(tz)
        rows.append(
            FeatureVector(
                row_id=f"{profile.id}:{ref.calendar_id}:{ref.collection_id}:{ref.seq_no}",
                participant=profile.id,
                delivered_at=delivered.at,
                weekday=local.isoweekday(),
                day_period=day_period(local.hour),
                we_label=latest_answer("WE", delivered.at),
                wa_label=latest_answer("WA", delivered.at),
                wo_label=latest_answer("WO", delivered.at),
                gender=profile.gender,
                degree=profile.degree,
                department=profile.department,
                label=label,
                wi_label=latest_answer("WI", delivered.at) if include_mood else None,
                correct_label=correct,
            )
        )
    rows.sort(key=lambda r: (r.delivered_at, r.row_id))
    return rows


def extract_features_all(
    log: EventLog,
    grounds: Mapping[str, LifeSequence],
    profiles: Iterable[ParticipantProfile],
    include_mood: bool = False,
    label_source: str = "timing",
) -> list[FeatureVector]:
    rows: list[FeatureVector] = []
    for profile in sorted(profiles, key=lambda p: p.id):
        rows.extend(extract_features(log, grounds.get(profile.id), profile, include_mood, label_source))
    return rows


# --------------------------------------------------------------------------
# Encoding


@dataclass(frozen=True)
class Encoding:
    columns: tuple[tuple[str, str], ...]  # (field, value) per indicator column

    def transform(self, rows: Sequence[FeatureVector]) -> np.ndarray:
        index = {pair: j for j, pair in enumerate(self.columns)}
        X = np.zeros((len(rows), len(self.columns)))
        for i, row in enumerate(rows):
            for name, value in _categoricals(row):
                j = index.get((name, value))
                if j is not None:
                    X[i, j] = 1.0
        return X


def _categoricals(row: FeatureVector) -> list[tuple[str, str]]:
    pairs = [
        ("weekday", str(row.weekday)),
        ("day_period", row.day_period),
        ("we", row.we_label),
        ("wa", row.wa_label),
        ("wo", row.wo_label),
        ("gender", row.gender),
        ("degree", row.degree),
        ("department", row.department),
    ]
    if row.wi_label is not None:
        pairs.append(("wi", row.wi_label))
    return pairs


def fit_encoding(rows: Sequence[FeatureVector]) -> Encoding:
    """Indicator columns for every (field, value) pair seen, plus an
    explicit Unknown column per context field; order-independent."""
    values: dict[str, set[str]] = {}
    for row in rows:
        for name, value in _categoricals(row):
            values.setdefault(name, set()).add(value)
    for name in ("we", "wa", "wo"):
        values.setdefault(name, set()).add(UNKNOWN)
    columns = tuple(
        (name, value) for name in sorted(values) for value in sorted(values[name])
    )
    return Encoding(columns)


def features_to_csv(rows: Sequence[FeatureVector]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["row_id", "participant", "delivered_at", "weekday", "day_period",
         "we", "wa", "wo", "gender", "degree", "department", "label", "correct"]
    )
    for r in rows:
        writer.writerow(
            [r.row_id, r.participant, r.delivered_at.isoformat(), r.weekday, r.day_period,
             r.we_label, r.wa_label, r.wo_label, r.gender, r.degree, r.department,
             r.label, "" if r.correct_label is None else r.correct_label]
        )
    return out.getvalue()


# --------------------------------------------------------------------------
# Metrics


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    matrix = np.zeros((2, 2), dtype=int)
    for t, p in zip(np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)):
        matrix[t, p] += 1
    return matrix


def metrics_from_confusion(matrix: np.ndarray) -> dict:
    matrix = np.asarray(matrix, dtype=float)
    total = matrix.sum()
    if total == 0:
        return {"accuracy": 0.0, "kappa": 0.0, "precision": 0.0, "recall": 0.0, "f1": 0.0}
    accuracy = np.trace(matrix) / total
    p_e = float(np.sum(matrix.sum(axis=1) * matrix.sum(axis=0)) / (total * total))
    kappa = 0.0 if abs(1.0 - p_e) < 1e-12 else (accuracy - p_e) / (1.0 - p_e)
    tp, fp, fn = matrix[1, 1], matrix[0, 1], matrix[1, 0]
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "accuracy": float(accuracy),
        "kappa": float(kappa),
        "precision": float(precision),
        "recall": float(recall),
        "f1": float(f1),
    }


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "RandomForest"
    hyperparameters: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def build(self):
        if self.kind not in CLASSIFIERS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        cls = CLASSIFIERS[self.kind]
        return cls(**{"seed": self.seed, **dict(self.hyperparameters)})


@dataclass(frozen=True)
class EvalReport:
    classifier: str
    accuracy: float
    kappa: float
    precision: float
    recall: float
    f1: float
    confusion: tuple[tuple[int, int], tuple[int, int]]
    fold_count: int
    split_spec: str
    per_fold: tuple[dict, ...] = ()
    skipped: bool = False
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "classifier": self.classifier,
            "accuracy": self.accuracy,
            "kappa": self.kappa,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": [list(row) for row in self.confusion],
            "fold_count": self.fold_count,
            "split_spec": self.split_spec,
            "per_fold": list(self.per_fold),
            "skipped": self.skipped,
            "reason": self.reason,
        }


def _skipped_report(spec: ClassifierSpec, split_spec: str, reason: str) -> EvalReport:
    return EvalReport(
        classifier=spec.kind, accuracy=0.0, kappa=0.0, precision=0.0, recall=0.0, f1=0.0,
        confusion=((0, 0), (0, 0)), fold_count=0, split_spec=split_spec,
        skipped=True, reason=reason,
    )


def assign_folds(rows: Sequence[FeatureVector], folds: int, seed: int) -> list[int]:
    """Stable, balanced fold assignment: rows are ordered by a keyed hash
    of their id and dealt round-robin, so the partition is independent of
    input order and balanced to within one row."""
    def row_hash(row: FeatureVector) -> str:
        return hashlib.sha256(f"{row.row_id}|{seed}".encode("utf-8")).hexdigest()

    order = sorted(range(len(rows)), key=lambda i: (row_hash(rows[i]), rows[i].row_id))
    assignment = [0] * len(rows)
    for position, i in enumerate(order):
        assignment[i] = position % folds
    return assignment


def _report_from_predictions(
    spec: ClassifierSpec, split_spec: str, fold_results: list[tuple[np.ndarray, np.ndarray]]
) -> EvalReport:
    pooled = np.zeros((2, 2), dtype=int)
    per_fold = []
    for y_true, y_pred in fold_results:
        matrix = confusion_matrix(y_true, y_pred)
        pooled += matrix
        per_fold.append(metrics_from_confusion(matrix))
    final = metrics_from_confusion(pooled)
    return EvalReport(
        classifier=spec.kind,
        accuracy=final["accuracy"],
        kappa=final["kappa"],
        precision=final["precision"],
        recall=final["recall"],
        f1=final["f1"],
        confusion=tuple(tuple(int(v) for v in row) for row in pooled),
        fold_count=len(fold_results),
        split_spec=split_spec,
        per_fold=tuple(per_fold),
    )


def _fit_predict(spec: ClassifierSpec, X_train, y_train, X_test) -> np.ndarray:
    if len(np.unique(y_train)) < 2:
        return np.full(len(X_test), int(y_train[0]))
    model = spec.build()
    model.fit(X_train, y_train)
    return np.asarray(model.predict(X_test), dtype=int)


def train_eval(
    rows: Sequence[FeatureVector],
    spec: ClassifierSpec,
    protocol: str = "five_fold_cv",
    folds: int = 5,
    train_days: int = 14,
) -> EvalReport:
    """Train and evaluate under one of the two supported protocols.

    ``five_fold_cv`` trains on 80% / tests on 20% five times over the
    hash-balanced partition and reports metrics of the pooled confusion
    matrix.  ``per_participant_split`` trains on the first ``train_days``
    days of one participant and predicts the rest.  A single-class data
    set yields a report marked skipped rather than an exception.
    """
    if not rows:
        return _skipped_report(spec, protocol, "no rows")
    # Canonical row order: reports are invariant under input permutation.
    rows = sorted(rows, key=lambda r: r.row_id)
    labels = {row.label for row in rows}
    if len(labels) < 2:
        return _skipped_report(spec, protocol, "single-class data")
    encoding = fit_encoding(rows)
    X = encoding.transform(rows)
    y = np.array([row.label for row in rows], dtype=int)

    if protocol == "five_fold_cv":
        assignment = np.array(assign_folds(rows, folds, spec.seed))
        results = []
        for fold in range(folds):
            test = assignment == fold
            if not test.any() or test.all():
                continue
            y_pred = _fit_predict(spec, X[~test], y[~test], X[test])
            results.append((y[test], y_pred))
        return _report_from_predictions(spec, f"{folds}-fold-cv", results)

    if protocol == "per_participant_split":
        participants = {row.participant for row in rows}
        if len(participants) != 1:
            raise ValueError("per_participant_split expects rows of a single participant")
        cut = min(row.delivered_at for row in rows) + timedelta(days=train_days)
        train = np.array([row.delivered_at < cut for row in rows])
        if not train.any() or train.all():
            return _skipped_report(spec, "per-participant-split", "empty train or test window")
        if len(np.unique(y[train])) < 2:
            return _skipped_report(spec, "per-participant-split", "single-class training window")
        y_pred = _fit_predict(spec, X[train], y[train], X[~train])
        return _report_from_predictions(spec, "per-participant-split", [(y[~train], y_pred)])

    raise ValueError(f"unknown protocol {protocol!r}")


# --------------------------------------------------------------------------
# Scheduling recommendations


@dataclass(frozen=True)
class Recommendation:
    participant: str
    ranked: tuple[tuple[str, int], ...]  # (day_period, weekday), best first
    scores: Mapping[tuple[str, int], float]
    no_preference: bool


def recommend_windows(
    rows: Sequence[FeatureVector],
    spec: Optional[ClassifierSpec] = None,
    indifference: float = 0.05,
) -> Recommendation:
    """Rank (day period, weekday) cells for one participant by the
    predicted probability of a high-quality answer.

    Declares "no preference" when the spread between the best and worst
    cell is below the indifference threshold.  Ties rank by (weekday,
    day period).
    """
    if not rows:
        raise ValueError("no feature rows for this participant")
    participants = {row.participant for row in rows}
    if len(participants) != 1:
        raise ValueError("recommend_windows expects rows of a single participant")
    participant = rows[0].participant
    spec = spec or ClassifierSpec()
    encoding = fit_encoding(rows)
    X = encoding.transform(rows)
    y = np.array([row.label for row in rows], dtype=int)

    if len(np.unique(y)) < 2:
        share = float(y.mean()) if len(y) else 0.0
        proba = {cell: share for cell in _all_cells()}
    else:
        model = spec.build()
        model.fit(X, y)
        modal = _modal_row(rows)
        probe_rows = []
        for period, weekday in _all_cells():
            probe_rows.append(
                FeatureVector(
                    row_id=f"probe:{period}:{weekday}", participant=participant,
                    delivered_at=rows[0].delivered_at, weekday=weekday, day_period=period,
                    we_label=modal["we"], wa_label=modal["wa"], wo_label=modal["wo"],
                    gender=rows[0].gender, degree=rows[0].degree, department=rows[0].department,
                    label=0,
                )
            )
        scores = model.predict_proba(encoding.transform(probe_rows))
        proba = {cell: float(p) for cell, p in zip(_all_cells(), scores)}

    spread = max(proba.values()) - min(proba.values())
    ranked = tuple(
        sorted(proba, key=lambda cell: (-proba[cell], cell[1], cell[0]))
    )
    return Recommendation(participant, ranked, proba, bool(spread < indifference))


def _all_cells() -> list[tuple[str, int]]:
    return [(period, weekday) for period in DAY_PERIODS for weekday in range(1, 8)]


def _modal_row(rows: Sequence[FeatureVector]) -> dict:
    def mode(values: list[str]) -> str:
        counts: dict[str, int] = {}
        for v in values:
            counts[v] = counts.get(v, 0) + 1
        return sorted(counts, key=lambda v: (-counts[v], v))[0]

    return {
        "we": mode([r.we_label for r in rows]),
        "wa": mode([r.wa_label for r in rows]),
        "wo": mode([r.wo_label for r in rows]),
    }


_PERIOD_ANCHOR_HOUR = {"Morning": 8, "Afternoon": 14, "Evening": 20, "Night": 2}


def apply_recommendation(
    timeline: Timeline,
    participant: str,
    recommendation: Recommendation,
    policy: RevisionPolicy,
    issued_at: datetime,
    horizon: timedelta = timedelta(days=1),
    top_n: int = 3,
) -> tuple[Timeline, list[Revision], list[tuple[Revision, str]]]:
    """Turn the top-ranked cells into platform shift proposals.

    Each upcoming question occurrence outside the preferred periods gets
    a shift toward the nearest preferred period's anchor hour; proposals
    the policy rejects are returned with the rejection reason instead of
    being applied.
    """
    applied: list[Revision] = []
    rejected: list[tuple[Revision, str]] = []
    if recommendation.no_preference:
        return timeline, applied, rejected
    preferred = {period for period, _ in recommendation.ranked[:top_n]}
    current = timeline
    for occ in timeline.for_participant(participant):
        if occ.cancelled or occ.source.kind != "question":
            continue
        if not (issued_at <= occ.scheduled_at <= issued_at + horizon):
            continue
        period = day_period(occ.scheduled_at.hour)
        if period in preferred:
            continue
        best = min(
            (p for p in preferred),
            key=lambda p: abs(_PERIOD_ANCHOR_HOUR[p] - occ.scheduled_at.hour),
        )
        target_hour = _PERIOD_ANCHOR_HOUR[best]
        delta = timedelta(hours=target_hour - occ.scheduled_at.hour)
        revision = Revision(
            actor=Actor.PLATFORM,
            target=RevisionTarget(
                calendar_id=occ.source.calendar_id,
                collection_id=occ.source.collection_id,
                kind="question",
                seq_no=occ.seq_no,
                participant=participant,
            ),
            change=Shift(delta),
            issued_at=issued_at,
        )
        try:
            current = apply_revision(current, revision, policy)
            applied.append(revision)
        except (PolicyViolationError, ImmutablePastError) as exc:
            rejected.append((revision, str(exc)))
    return current, applied, rejected


def reports_to_ndjson(reports: Iterable[EvalReport]) -> str:
    return "\n".join(json.dumps(r.to_dict()) for r in reports) + "\n"


# --------------------------------------------------------------------------
# Model persistence

MODEL_SCHEMA = "ilog-classifier/1"


def _model_params(kind: str, model) -> dict:
    if kind == "RandomForest":
        return {"trees": [t.tree_ for t in model.trees_]}
    if kind == "KNearestNeighbors":
        return {"k": model.k, "X": model.X_.tolist(), "y": model.y_.tolist()}
    if kind == "LogisticRegression":
        return {"w": model.w_.tolist(), "b": model.b_}
    if kind == "GaussianNaiveBayes":
        return {
            "classes": model.classes_.tolist(),
            "theta": model.theta_.tolist(),
            "var": model.var_.tolist(),
            "log_prior": model.log_prior_.tolist(),
        }
    if kind == "LinearSVM":
        return {"w": model.w_.tolist(), "b": model.b_}
    raise ValueError(f"unknown classifier kind {kind!r}")


def _restore_params(kind: str, model, params: dict):
    from .classifiers import DecisionTree

    if kind == "RandomForest":
        model.trees_ = []
        for tree_dict in params["trees"]:
            tree = DecisionTree(model.max_depth)
            tree.tree_ = tree_dict
            model.trees_.append(tree)
    elif kind == "KNearestNeighbors":
        model.k = params["k"]
        model.X_ = np.asarray(params["X"], dtype=float)
        model.y_ = np.asarray(params["y"], dtype=int)
        model._row_sums = model.X_.sum(axis=1)
    elif kind == "LogisticRegression":
        model.w_ = np.asarray(params["w"], dtype=float)
        model.b_ = float(params["b"])
    elif kind == "GaussianNaiveBayes":
        model.classes_ = np.asarray(params["classes"], dtype=int)
        model.theta_ = np.asarray(params["theta"], dtype=float)
        model.var_ = np.asarray(params["var"], dtype=float)
        model.log_prior_ = np.asarray(params["log_prior"], dtype=float)
    elif kind == "LinearSVM":
        model.w_ = np.asarray(params["w"], dtype=float)
        model.b_ = float(params["b"])
    else:
        raise ValueError(f"unknown classifier kind {kind!r}")
    return model


def save_model(spec: ClassifierSpec, model, encoding: Encoding) -> str:
    """Serialize a fitted classifier (and its column layout) to a flat,
    versioned JSON document suitable for reload."""
    return json.dumps(
        {
            "schema": MODEL_SCHEMA,
            "kind": spec.kind,
            "seed": spec.seed,
            "hyperparameters": dict(spec.hyperparameters),
            "columns": [list(pair) for pair in encoding.columns],
            "params": _model_params(spec.kind, model),
        }
    )


def load_model(text: str):
    """Rebuild (spec, model, encoding) from :func:`save_model` output."""
    raw = json.loads(text)
    if raw.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unexpected model schema {raw.get('schema')!r}")
    spec = ClassifierSpec(raw["kind"], raw.get("hyperparameters", {}), raw.get("seed", 0))
    model = _restore_params(raw["kind"], spec.build(), raw["params"])
    encoding = Encoding(tuple((name, value) for name, value in raw["columns"]))
    return spec, model, encoding
