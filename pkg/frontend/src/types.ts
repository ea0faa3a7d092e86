// Wire types mirroring the service JSON responses. The dashboard never
// aggregates on its own: every displayed number exists in one of these.

export type RoleKind = "Researcher" | "Participant" | "Platform"

export interface Summary {
    quality_params: QualityParams
    participant_count: number | null // null on participant views (panel B hidden)
    progress: { days_covered: number; days_left: number }
    delivery_rate: number | null
    answers: {
        answered_total: number
        answer_rate: number | null
        avg_reaction_s: number | null
        avg_completion_s: number | null
    }
    sensors: Record<string, { readings: number; cadence: string; rate: number | null }>
    role: string
    participant: string | null
    offset: number
    timeline_version: number
}

export interface QualityParams {
    max_unanswered: number
    max_avg_completion_time: number
    max_avg_response_time: number
    medium_band: number[]
}

export interface Heatmap {
    offset: number
    participants: string[]
    days: string[]
    cells: (number | null)[][] // row per participant, column per day
    counts: [number, number][][] // (answered, delivered)
    flagged_days: string[]
}

export interface CompareSeries {
    days: string[]
    cumulative_answers: number[]
    avg_reaction_s: (number | null)[]
}

export interface Comparison {
    offset: number
    series: Record<string, CompareSeries>
}

export interface StreamRecord {
    offset: number
    type: "event" | "flag"
    body: any
}

export interface StreamResponse {
    records: StreamRecord[]
    next_offset: number
}

export interface ParticipantData {
    participant: string
    days: Record<string, Record<string, string[]>>
}

export interface TimelineOccurrence {
    participant: string
    calendar: number
    collection: number
    kind: string
    seq: number
    scheduled_at: string
    window_end: string
    cancelled: boolean
}

export interface Timeline {
    version: number
    occurrences: TimelineOccurrence[]
}

export interface Problem {
    code: string
    message: string
    diagnostics?: { severity: string; path: string; message: string; code: string }[]
}

export interface Revision {
    actor: RoleKind
    target: {
        calendar_id?: number | null
        collection_id?: number | null
        kind?: string | null
        seq_no?: number | null
        day?: string | null
        participant?: string | null
    }
    change:
        | { kind: "shift"; delta_s: number }
        | { kind: "cancel" }
        | { kind: "reinstate" }
        | { kind: "frequency_override"; rrule: { frequency: string; interval: number; count: number } }
    issued_at: string
}
