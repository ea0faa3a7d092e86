// Client-side view state and the pre-submission revision check.
//
// The service is the authority on revision bounds; these defaults mirror
// its documented out-of-the-box policy so obviously doomed revisions can
// be warned about before a round-trip. The server's verdict always wins
// and is surfaced inline when it rejects.

import type { Revision, RoleKind } from "./types"

export const DEFAULT_BOUNDS = {
    maxParticipantShiftS: 60 * 60,
    maxParticipantCancelsPerDay: 4,
    platformShiftWindowS: 30 * 60,
}

export interface ViewState {
    experiment: string
    role: RoleKind
    participant: string | null
    view: string
    selectedParticipants: string[]
    dateRange: { from: string | null; to: string | null }
    pendingRevisions: Revision[]
    streamOffset: number
}

export function initialState(experiment: string, role: RoleKind, participant: string | null): ViewState {
    return {
        experiment,
        role,
        participant,
        view: "summary",
        selectedParticipants: [],
        dateRange: { from: null, to: null },
        pendingRevisions: [],
        streamOffset: 0,
    }
}

export function precheckRevision(revision: Revision): string | null {
    if (revision.change.kind === "shift") {
        const magnitude = Math.abs(revision.change.delta_s)
        if (revision.actor === "Participant" && magnitude > DEFAULT_BOUNDS.maxParticipantShiftS) {
            return `shift of ${magnitude}s exceeds the default participant bound of ${DEFAULT_BOUNDS.maxParticipantShiftS}s`
        }
        if (revision.actor === "Platform" && magnitude > DEFAULT_BOUNDS.platformShiftWindowS) {
            return `shift of ${magnitude}s exceeds the default platform window of ${DEFAULT_BOUNDS.platformShiftWindowS}s`
        }
    }
    if (revision.change.kind === "cancel" && revision.actor === "Platform") {
        return "the platform may not cancel occurrences"
    }
    if (revision.change.kind === "frequency_override" && revision.actor !== "Researcher") {
        return "cadence overrides are researcher-only by default"
    }
    return null
}
