"""iLogCal document syntax: parse, serialize, diagnose.

The concrete syntax is iCalendar-style content lines (``NAME;PARAM=V:VALUE``,
CRLF line endings, 75-octet folding) with the component nesting::

    BEGIN:VCALENDAR            one per calendar; UID + X-ILOG-USER
      BEGIN:X-ILOG-CONTEXT     context collection; UID
        BEGIN:X-ILOG-QUESTION  question collection
        BEGIN:X-ILOG-SENSOR    sensor collection

Question components carry UID, DTSTART, DTEND, STATUS, RRULE, X-QID,
X-QCATEGORY, X-QCONTENT, X-QOPTIONS, X-QTYPE and optionally X-ACONTENT;
sensor components carry UID, DTSTART, DTEND, RRULE, X-SENSOR-NAME,
X-SENSOR-DESC, X-SENSOR-TYPE.  Timestamps are iCalendar UTC
(``YYYYMMDDTHHMMSSZ``).  Unknown properties are preserved verbatim as
opaque extensions and written back on serialization.

RRULE values follow RFC 5545 shape (``FREQ=...;INTERVAL=...;COUNT=...``).
The standard frequency tokens SECONDLY/MINUTELY/HOURLY/DAILY/WEEKLY/
MONTHLY/YEARLY are emitted where they exist; the extra millisecond
frequency is written ``FREQ=X-MILLISECOND``.  ``X-SECOND``/``X-MINUTE``/
``X-HOUR`` are accepted on input as aliases.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from .plan import (
    Calendar,
    ContextCollection,
    Diagnostic,
    DuplicateIdError,
    ExperimentPlan,
    Frequency,
    PlanSyntaxError,
    PlanValidationError,
    Question,
    QuestionCategory,
    QuestionCollection,
    QuestionType,
    RecurrenceRule,
    Sensor,
    SensorCollection,
    SensorType,
    validate_plan,
)

FOLD_OCTETS = 75

_NAME_RE = re.compile(r"^[A-Za-z0-9-]+$")
_INT_RE = re.compile(r"^\d+$")
_TIMESTAMP_RE = re.compile(r"^\d{8}T\d{6}Z$")

_FREQ_TO_WIRE = {
    Frequency.MILLISECOND: "X-MILLISECOND",
    Frequency.SECOND: "SECONDLY",
    Frequency.MINUTE: "MINUTELY",
    Frequency.HOUR: "HOURLY",
    Frequency.DAILY: "DAILY",
    Frequency.WEEKLY: "WEEKLY",
    Frequency.MONTHLY: "MONTHLY",
    Frequency.YEARLY: "YEARLY",
}
_WIRE_TO_FREQ = {wire: freq for freq, wire in _FREQ_TO_WIRE.items()}
_WIRE_TO_FREQ.update(
    {
        "X-MILLISECONDLY": Frequency.MILLISECOND,
        "X-SECOND": Frequency.SECOND,
        "X-MINUTE": Frequency.MINUTE,
        "X-HOUR": Frequency.HOUR,
    }
)

_QTYPE_TO_WIRE = {
    QuestionType.DICHOTOMOUS: "DICHOTOMOUS",
    QuestionType.MULTIPLE_CHOICE: "MULTIPLE-CHOICE",
    QuestionType.SINGLE_CHOICE: "SINGLE-CHOICE",
    QuestionType.FREE_TEXT: "FREE-TEXT",
}
_WIRE_TO_QTYPE = {wire: q for q, wire in _QTYPE_TO_WIRE.items()}

_SENSOR_TYPE_TO_WIRE = {
    SensorType.SOCIAL: "SOCIAL",
    SensorType.MOTION: "MOTION",
    SensorType.LOCATION: "LOCATION",
    SensorType.INERTIAL: "INERTIAL",
    SensorType.DEVICE: "DEVICE",
    SensorType.AMBIENT: "AMBIENT",
    SensorType.SOFTWARE: "SOFTWARE",
    SensorType.QUESTION_ANSWERING: "QUESTION-ANSWERING",
}
_WIRE_TO_SENSOR_TYPE = {wire: s for s, wire in _SENSOR_TYPE_TO_WIRE.items()}

_KNOWN_PROPS = {
    "VCALENDAR": {"UID", "X-ILOG-USER"},
    "X-ILOG-CONTEXT": {"UID"},
    "X-ILOG-QUESTION": {
        "UID", "DTSTART", "DTEND", "STATUS", "RRULE",
        "X-QID", "X-QCATEGORY", "X-QCONTENT", "X-QOPTIONS", "X-QTYPE", "X-ACONTENT",
    },
    "X-ILOG-SENSOR": {
        "UID", "DTSTART", "DTEND", "RRULE",
        "X-SENSOR-NAME", "X-SENSOR-DESC", "X-SENSOR-TYPE",
    },
}
_CHILD_COMPONENTS = {
    None: {"VCALENDAR"},
    "VCALENDAR": {"X-ILOG-CONTEXT"},
    "X-ILOG-CONTEXT": {"X-ILOG-QUESTION", "X-ILOG-SENSOR"},
    "X-ILOG-QUESTION": set(),
    "X-ILOG-SENSOR": set(),
}


# --------------------------------------------------------------------------
# Content-line layer


def escape_text(value: str) -> str:
    return (
        value.replace("\\", "\\\\").replace(";", "\\;").replace(",", "\\,").replace("\n", "\\n")
    )


def unescape_text(value: str) -> str:
    out: list[str] = []
    it = iter(value)
    for ch in it:
        if ch != "\\":
            out.append(ch)
            continue
        nxt = next(it, "")
        out.append("\n" if nxt in ("n", "N") else nxt)
    return "".join(out)


def _split_options(value: str) -> list[str]:
    parts: list[list[str]] = [[]]
    escaped = False
    for ch in value:
        if escaped:
            parts[-1].append("\n" if ch in ("n", "N") else ch)
            escaped = False
        elif ch == "\\":
            escaped = True
        elif ch == ",":
            parts.append([])
        else:
            parts[-1].append(ch)
    return ["".join(p) for p in parts]


def fold_line(line: str) -> str:
    """Fold one logical line to physical lines of at most 75 octets."""
    raw = line.encode("utf-8")
    if len(raw) <= FOLD_OCTETS:
        return line
    segments: list[str] = []
    chars = list(line)
    budget = FOLD_OCTETS
    current: list[str] = []
    used = 0
    for ch in chars:
        width = len(ch.encode("utf-8"))
        if used + width > budget:
            segments.append("".join(current))
            current, used = [ch], width
            budget = FOLD_OCTETS - 1  # continuation lines spend one octet on the space
        else:
            current.append(ch)
            used += width
    segments.append("".join(current))
    return "\r\n ".join(segments)


def unfold_lines(text: str) -> list[tuple[int, str]]:
    """Undo folding; returns (first physical line number, logical line)."""
    logical: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line:
            continue
        if line[0] in (" ", "\t"):
            if not logical:
                raise PlanSyntaxError(lineno, "continuation line with nothing to continue")
            start, prev = logical[-1]
            logical[-1] = (start, prev + line[1:])
        else:
            logical.append((lineno, line))
    return logical


@dataclass
class _RawProp:
    name: str
    raw_name: str  # name with parameters, exactly as written
    value: str
    line: int


@dataclass
class _RawComponent:
    kind: str
    line: int
    props: list[_RawProp] = field(default_factory=list)
    children: list[_RawComponent] = field(default_factory=list)


def _split_content_line(lineno: int, line: str) -> tuple[str, str, str]:
    in_quotes = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_quotes = not in_quotes
        elif ch == ":" and not in_quotes:
            raw_name, value = line[:i], line[i + 1:]
            name = raw_name.split(";", 1)[0].upper()
            if not _NAME_RE.match(name):
                raise PlanSyntaxError(lineno, f"malformed property name {raw_name!r}")
            return name, raw_name, value
    raise PlanSyntaxError(lineno, "content line without ':' separator")


def _parse_components(text: str) -> list[_RawComponent]:
    roots: list[_RawComponent] = []
    stack: list[_RawComponent] = []
    last_line = 0
    for lineno, line in unfold_lines(text):
        last_line = lineno
        name, raw_name, value = _split_content_line(lineno, line)
        if name == "BEGIN":
            kind = value.strip().upper()
            parent = stack[-1].kind if stack else None
            if kind not in _CHILD_COMPONENTS.get(parent, set()):
                where = f"inside {parent}" if parent else "at top level"
                raise PlanSyntaxError(lineno, f"unexpected component {value.strip()!r} {where}")
            component = _RawComponent(kind, lineno)
            (stack[-1].children if stack else roots).append(component)
            stack.append(component)
        elif name == "END":
            kind = value.strip().upper()
            if not stack or stack[-1].kind != kind:
                raise PlanSyntaxError(lineno, f"END:{value.strip()} does not match open component")
            stack.pop()
        else:
            if not stack:
                raise PlanSyntaxError(lineno, f"property {name} outside any component")
            if name in _KNOWN_PROPS[stack[-1].kind] and raw_name != name:
                raise PlanSyntaxError(lineno, f"parameters are not supported on {name}")
            stack[-1].props.append(_RawProp(name, raw_name, value, lineno))
    if stack:
        raise PlanSyntaxError(last_line, f"unterminated component {stack[-1].kind}")
    return roots


# --------------------------------------------------------------------------
# Raw -> typed conversion


class _Converter:
    def __init__(self) -> None:
        self.diags: list[Diagnostic] = []

    def error(self, path: str, message: str, code: str = "invalid") -> None:
        self.diags.append(Diagnostic("error", path, message, code))

    def _props(self, comp: _RawComponent, path: str) -> tuple[dict[str, str], list[tuple[str, str]]]:
        known: dict[str, str] = {}
        extensions: list[tuple[str, str]] = []
        for prop in comp.props:
            if prop.name in _KNOWN_PROPS[comp.kind]:
                if prop.name in known:
                    self.error(f"{path}.{prop.name}", f"property {prop.name} given twice", "duplicate-property")
                else:
                    known[prop.name] = prop.value
            else:
                extensions.append((prop.raw_name, prop.value))
        return known, extensions

    def _required(self, props: dict[str, str], name: str, path: str) -> Optional[str]:
        if name not in props:
            self.error(f"{path}.{name}", f"required property {name} is missing", "missing-property")
            return None
        return props[name]

    def _int(self, value: Optional[str], path: str) -> Optional[int]:
        if value is None:
            return None
        if not _INT_RE.match(value.strip()):
            self.error(path, f"expected a non-negative integer, got {value!r}", "bad-int")
            return None
        return int(value.strip())

    def _timestamp(self, value: Optional[str], path: str) -> Optional[datetime]:
        if value is None:
            return None
        text = value.strip()
        if not _TIMESTAMP_RE.match(text):
            self.error(path, f"expected UTC timestamp YYYYMMDDTHHMMSSZ, got {value!r}", "bad-timestamp")
            return None
        try:
            return datetime.strptime(text, "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
        except ValueError:
            self.error(path, f"impossible calendar date {value!r}", "bad-timestamp")
            return None

    def _token(self, value: Optional[str], table: dict[str, object], path: str, what: str):
        if value is None:
            return None
        token = value.strip().upper()
        if token not in table:
            self.error(path, f"unknown {what} {value.strip()!r}", "bad-token")
            return None
        return table[token]

    def _rrule(self, value: Optional[str], path: str) -> Optional[RecurrenceRule]:
        if value is None:
            return None
        fields: dict[str, str] = {}
        for part in value.strip().split(";"):
            if not part:
                continue
            if "=" not in part:
                self.error(path, f"malformed rrule part {part!r}", "bad-rrule")
                return None
            key, val = part.split("=", 1)
            fields[key.strip().upper()] = val.strip()
        freq_token = fields.get("FREQ", "").upper()
        if freq_token not in _WIRE_TO_FREQ:
            self.error(path, f"unknown rrule frequency {fields.get('FREQ')!r}", "bad-rrule")
            return None
        interval = self._int(fields.get("INTERVAL", "1"), path)
        if "COUNT" not in fields:
            self.error(path, "rrule is missing COUNT", "bad-rrule")
            return None
        count = self._int(fields["COUNT"], path)
        if interval is None or count is None:
            return None
        return RecurrenceRule(_WIRE_TO_FREQ[freq_token], interval, count)

    # -- components --------------------------------------------------------

    def question_collection(self, comp: _RawComponent, path: str) -> Optional[QuestionCollection]:
        props, extensions = self._props(comp, path)
        before = len(self.diags)
        cid = self._int(self._required(props, "UID", path), f"{path}.UID")
        dtstart = self._timestamp(self._required(props, "DTSTART", path), f"{path}.DTSTART")
        dtend = self._timestamp(self._required(props, "DTEND", path), f"{path}.DTEND")
        status_raw = props.get("STATUS", "1").strip()
        status: Optional[bool] = None
        if status_raw in ("0", "1"):
            status = status_raw == "1"
        else:
            self.error(f"{path}.STATUS", f"status must be 1 or 0, got {status_raw!r}", "bad-status")
        rrule = self._rrule(self._required(props, "RRULE", path), f"{path}.RRULE")
        qid = self._int(self._required(props, "X-QID", path), f"{path}.X-QID")
        qcategory = self._token(
            self._required(props, "X-QCATEGORY", path),
            {c.value: c for c in QuestionCategory},
            f"{path}.X-QCATEGORY",
            "question category",
        )
        content_raw = self._required(props, "X-QCONTENT", path)
        qtype = self._token(
            self._required(props, "X-QTYPE", path), _WIRE_TO_QTYPE, f"{path}.X-QTYPE", "question type"
        )
        if len(self.diags) > before:
            return None
        options = tuple(_split_options(props["X-QOPTIONS"])) if props.get("X-QOPTIONS") else ()
        answer = unescape_text(props["X-ACONTENT"]) if "X-ACONTENT" in props else None
        question = Question(qid, qcategory, unescape_text(content_raw), options, qtype, answer)
        return QuestionCollection(cid, dtstart, dtend, rrule, question, status, tuple(extensions))

    def sensor_collection(self, comp: _RawComponent, path: str) -> Optional[SensorCollection]:
        props, extensions = self._props(comp, path)
        before = len(self.diags)
        sid = self._int(self._required(props, "UID", path), f"{path}.UID")
        dtstart = self._timestamp(self._required(props, "DTSTART", path), f"{path}.DTSTART")
        dtend = self._timestamp(self._required(props, "DTEND", path), f"{path}.DTEND")
        rrule = self._rrule(self._required(props, "RRULE", path), f"{path}.RRULE")
        name_raw = self._required(props, "X-SENSOR-NAME", path)
        sensor_type = self._token(
            self._required(props, "X-SENSOR-TYPE", path),
            _WIRE_TO_SENSOR_TYPE,
            f"{path}.X-SENSOR-TYPE",
            "sensor type",
        )
        if len(self.diags) > before:
            return None
        sensor = Sensor(unescape_text(name_raw), unescape_text(props.get("X-SENSOR-DESC", "")), sensor_type)
        return SensorCollection(sid, dtstart, dtend, rrule, sensor, tuple(extensions))

    def context_collection(self, comp: _RawComponent, path: str) -> Optional[ContextCollection]:
        props, extensions = self._props(comp, path)
        cc_id = self._int(self._required(props, "UID", path), f"{path}.UID")
        if cc_id is None:
            return None
        questions, sensors = [], []
        for child in comp.children:
            if child.kind == "X-ILOG-QUESTION":
                qc = self.question_collection(child, f"{path}.question@line{child.line}")
                if qc is not None:
                    questions.append(qc)
            else:
                sc = self.sensor_collection(child, f"{path}.sensor@line{child.line}")
                if sc is not None:
                    sensors.append(sc)
        return ContextCollection(cc_id, tuple(questions), tuple(sensors), tuple(extensions))

    def calendar(self, comp: _RawComponent) -> tuple[Optional[Calendar], Optional[str]]:
        path = f"calendar@line{comp.line}"
        props, extensions = self._props(comp, path)
        cal_id = self._int(self._required(props, "UID", path), f"{path}.UID")
        user_raw = self._required(props, "X-ILOG-USER", path)
        user = unescape_text(user_raw) if user_raw is not None else None
        if cal_id is None:
            return None, user
        contexts = []
        for child in comp.children:
            cc = self.context_collection(child, f"calendar[{cal_id}].context@line{child.line}")
            if cc is not None:
                contexts.append(cc)
        return Calendar(cal_id, tuple(contexts), tuple(extensions)), user


def _build_plan(components: list[_RawComponent]) -> tuple[Optional[ExperimentPlan], list[Diagnostic]]:
    conv = _Converter()
    calendars: list[Calendar] = []
    users: list[str] = []
    for comp in components:
        cal, user = conv.calendar(comp)
        if cal is not None:
            calendars.append(cal)
        if user is not None:
            users.append(user)
    if len(set(users)) > 1:
        conv.error("plan.user", f"calendars disagree on the participant set: {sorted(set(users))}", "user-mismatch")
    user = users[0] if users else ""
    if any(d.is_error for d in conv.diags):
        return None, conv.diags
    return ExperimentPlan(user, tuple(calendars)), conv.diags


# --------------------------------------------------------------------------
# Public surface


def parse_plan(text: str) -> ExperimentPlan:
    """Parse an iLogCal document into a validated plan.

    Raises :class:`PlanSyntaxError` for malformed content lines or
    component nesting, :class:`DuplicateIdError` for id collisions, and
    :class:`PlanValidationError` for other invariant violations.
    """
    plan, diags = _build_plan(_parse_components(text))
    if plan is None:
        raise PlanValidationError(diags)
    diags = diags + validate_plan(plan)
    errors = [d for d in diags if d.is_error]
    if errors:
        if any(d.code == "duplicate-id" for d in errors):
            raise DuplicateIdError(diags)
        raise PlanValidationError(diags)
    return plan


def diagnose(text: str) -> list[Diagnostic]:
    """Non-raising document check: all diagnostics for a document.

    Syntax failures surface as a single error diagnostic located by line;
    otherwise the conversion and validation diagnostics are returned.
    """
    try:
        components = _parse_components(text)
    except PlanSyntaxError as exc:
        return [Diagnostic("error", f"line {exc.line}", exc.reason, "syntax")]
    plan, diags = _build_plan(components)
    if plan is not None:
        diags = diags + validate_plan(plan)
    return diags


def _serialize_rrule(rrule: RecurrenceRule) -> str:
    return f"FREQ={_FREQ_TO_WIRE[rrule.frequency]};INTERVAL={rrule.interval};COUNT={rrule.count}"


def _serialize_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def serialize_plan(plan: ExperimentPlan) -> str:
    """Render a plan as an iLogCal document.

    Deterministic: components are ordered by id, properties canonically,
    extensions verbatim in stored order.  ``parse_plan`` of the output
    reproduces the plan structurally.
    """
    lines: list[str] = []

    def emit(name: str, value: str) -> None:
        lines.append(f"{name}:{value}")

    def emit_extensions(extensions) -> None:
        for raw_name, value in extensions:
            lines.append(f"{raw_name}:{value}")

    for cal in sorted(plan.calendars, key=lambda c: c.calendar_id):
        lines.append("BEGIN:VCALENDAR")
        emit("UID", str(cal.calendar_id))
        emit("X-ILOG-USER", escape_text(plan.user))
        emit_extensions(cal.extensions)
        for cc in sorted(cal.context_collections, key=lambda c: c.id):
            lines.append("BEGIN:X-ILOG-CONTEXT")
            emit("UID", str(cc.id))
            emit_extensions(cc.extensions)
            for qc in sorted(cc.question_collections, key=lambda q: q.cid):
                lines.append("BEGIN:X-ILOG-QUESTION")
                emit("UID", str(qc.cid))
                emit("DTSTART", _serialize_timestamp(qc.dtstart))
                emit("DTEND", _serialize_timestamp(qc.dtend))
                emit("STATUS", "1" if qc.status else "0")
                emit("RRULE", _serialize_rrule(qc.rrule))
                emit("X-QID", str(qc.question.qid))
                emit("X-QCATEGORY", qc.question.qcategory.value)
                emit("X-QCONTENT", escape_text(qc.question.question_content))
                if qc.question.answer_options:
                    emit("X-QOPTIONS", ",".join(escape_text(o) for o in qc.question.answer_options))
                emit("X-QTYPE", _QTYPE_TO_WIRE[qc.question.qtype])
                if qc.question.answer_content is not None:
                    emit("X-ACONTENT", escape_text(qc.question.answer_content))
                emit_extensions(qc.extensions)
                lines.append("END:X-ILOG-QUESTION")
            for sc in sorted(cc.sensor_collections, key=lambda s: s.sid):
                lines.append("BEGIN:X-ILOG-SENSOR")
                emit("UID", str(sc.sid))
                emit("DTSTART", _serialize_timestamp(sc.dtstart))
                emit("DTEND", _serialize_timestamp(sc.dtend))
                emit("RRULE", _serialize_rrule(sc.rrule))
                emit("X-SENSOR-NAME", escape_text(sc.sensor.name))
                emit("X-SENSOR-DESC", escape_text(sc.sensor.description))
                emit("X-SENSOR-TYPE", _SENSOR_TYPE_TO_WIRE[sc.sensor.sensor_type])
                emit_extensions(sc.extensions)
                lines.append("END:X-ILOG-SENSOR")
            lines.append("END:X-ILOG-CONTEXT")
        lines.append("END:VCALENDAR")
    return "".join(fold_line(line) + "\r\n" for line in lines)
