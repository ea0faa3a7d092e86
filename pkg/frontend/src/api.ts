// Thin typed client over the service endpoints. Participant sessions are
// hard-scoped here: every request a participant can make is pinned to
// their own id, so foreign slices are unreachable by construction.

import type {
    Comparison,
    Heatmap,
    ParticipantData,
    Problem,
    QualityParams,
    Revision,
    RoleKind,
    StreamResponse,
    Summary,
    Timeline,
} from "./types"

export class ApiError extends Error {
    status: number
    problem: Problem

    constructor(status: number, problem: Problem) {
        super(problem.message)
        this.status = status
        this.problem = problem
    }
}

export interface Session {
    base: string
    token: string
    role: RoleKind
    participant: string | null
}

export class ApiClient {
    private session: Session
    fetcher: typeof fetch

    constructor(session: Session, fetcher: typeof fetch = fetch) {
        this.session = session
        this.fetcher = fetcher
    }

    get role(): RoleKind {
        return this.session.role
    }

    get participant(): string | null {
        return this.session.participant
    }

    private async request(method: string, path: string, body?: string, contentType?: string): Promise<any> {
        const headers: Record<string, string> = { Authorization: `Bearer ${this.session.token}` }
        if (contentType) headers["Content-Type"] = contentType
        const response = await this.fetcher(this.session.base + path, { method, headers, body })
        const text = await response.text()
        const payload = text && text.trimStart().startsWith("{") ? JSON.parse(text) : text
        if (!response.ok) {
            const problem: Problem =
                typeof payload === "object" ? payload : { code: "unknown", message: String(payload) }
            throw new ApiError(response.status, problem)
        }
        return payload
    }

    private ownScope(requested?: string): string {
        if (this.session.role === "Participant") return this.session.participant as string
        if (!requested) throw new Error("participant id required for researcher queries")
        return requested
    }

    getSummary(experiment: string): Promise<Summary> {
        return this.request("GET", `/experiments/${experiment}/summary`)
    }

    getHeatmap(experiment: string, from?: string, to?: string): Promise<Heatmap> {
        const range = from && to ? `?from=${from}&to=${to}` : ""
        return this.request("GET", `/experiments/${experiment}/heatmap${range}`)
    }

    getPlan(experiment: string): Promise<string> {
        return this.request("GET", `/experiments/${experiment}/plan`)
    }

    putPlan(experiment: string, text: string): Promise<{ calendars: number }> {
        return this.request("PUT", `/experiments/${experiment}/plan`, text, "text/calendar")
    }

    getTimeline(experiment: string, participant?: string): Promise<Timeline> {
        const pid = this.ownScope(participant)
        return this.request("GET", `/experiments/${experiment}/timeline?participant=${encodeURIComponent(pid)}`)
    }

    getQualityParams(experiment: string): Promise<QualityParams> {
        return this.request("GET", `/experiments/${experiment}/quality-params`)
    }

    putQualityParams(experiment: string, params: QualityParams): Promise<{ ok: boolean }> {
        return this.request(
            "PUT", `/experiments/${experiment}/quality-params`, JSON.stringify(params), "application/json"
        )
    }

    postRevision(experiment: string, revision: Revision): Promise<{ version: number }> {
        return this.request(
            "POST", `/experiments/${experiment}/revisions`, JSON.stringify(revision), "application/json"
        )
    }

    getCompare(experiment: string, pids: string[]): Promise<Comparison> {
        return this.request(
            "GET", `/experiments/${experiment}/compare?pids=${encodeURIComponent(pids.join(","))}`
        )
    }

    getParticipantData(experiment: string, participant?: string): Promise<ParticipantData> {
        const pid = this.ownScope(participant)
        return this.request("GET", `/experiments/${experiment}/participants/${encodeURIComponent(pid)}/data`)
    }

    getStream(experiment: string, offset: number, waitS = 0): Promise<StreamResponse> {
        return this.request(
            "GET", `/experiments/${experiment}/stream?offset=${offset}&wait_s=${waitS}`
        )
    }
}
