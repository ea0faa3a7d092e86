"""ilogcal: orchestration for context-rich personal data collection.

The package covers the full loop of a question-and-sensor experiment:
iLogCal plan documents, recurrence expansion and runtime revision,
participant simulation, live quality monitoring, answer-quality
prediction, and an HTTP service tying them together.
"""

from .context import (
    ContextGraph,
    DanglingEdgeError,
    LifeSequence,
    OrderError,
    OverlapError,
    ParticipantProfile,
    SituationalContext,
    append_context,
    context_at,
    context_to_graph,
)
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
from .plan_io import diagnose, parse_plan, serialize_plan
from .schedule import (
    Actor,
    Cancel,
    ExpansionOverflowError,
    FrequencyOverride,
    ImmutablePastError,
    Occurrence,
    PolicyViolationError,
    Reinstate,
    Revision,
    RevisionPolicy,
    RevisionTarget,
    Shift,
    Timeline,
    apply_revision,
    compile_plan,
    expand,
    next_due,
    replay,
)
from .events import EventLog, LifecycleError, OccurrenceRef, QAEvent, SensorReading, TimingMetrics, derive_timing
from .simulate import (
    AnswerBurst,
    BehaviorModel,
    BlackoutDay,
    CellParams,
    CellRule,
    CoverageError,
    SensorDropout,
    default_behavior_model,
    generate_life_sequence,
    inject_fault,
    run_simulation,
)
from .quality import (
    AuthorizationError,
    ComplianceSnapshot,
    DashboardSummary,
    ParticipantRanking,
    QualityFlag,
    QualityParameters,
    compliance_heatmap,
    compliance_snapshot,
    dashboard_summary,
    participant_metrics,
    rank_all,
    rank_participant,
    run_quality_checks,
)
from .predict import (
    ClassifierSpec,
    EvalReport,
    FeatureVector,
    Recommendation,
    extract_features,
    extract_features_all,
    label_quality,
    load_model,
    recommend_windows,
    save_model,
    train_eval,
)

__version__ = "0.1.0"
