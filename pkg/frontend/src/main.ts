// Application entry: a login form builds the session, then the nav swaps
// views in place while a 5-second stream poll keeps the alerts pane and
// the data views fresh (dedup by stream offset, no reloads).

import { ApiClient, Session } from "./api"
import { el } from "./dom"
import { initialState, ViewState } from "./state"
import type { RoleKind } from "./types"
import { AlertsPane } from "./views/alerts"
import { renderComparison } from "./views/comparison"
import { renderHeatmap } from "./views/heatmap"
import { renderPersonalData } from "./views/personal"
import { renderQualityParamsForm, renderQuestionForm, renderShiftForm } from "./views/editor"
import { renderSummary } from "./views/summary"
import { renderTimeline } from "./views/timeline"

const POLL_INTERVAL_MS = 5000

export function startApp(root: HTMLElement): void {
    root.append(loginForm(root))
}

function loginForm(root: HTMLElement): HTMLElement {
    const form = el("form", { class: "login" })
    const base = el("input", { name: "base", value: "http://127.0.0.1:8080" })
    const experiment = el("input", { name: "experiment", value: "demo" })
    const token = el("input", { name: "token", placeholder: "bearer token" })
    const role = el("select", { name: "role" })
    for (const r of ["Researcher", "Participant", "Platform"]) role.append(el("option", { text: r, value: r }))
    const participant = el("input", { name: "participant", placeholder: "participant id (participant role)" })
    const go = el("button", { type: "submit", text: "Open experiment" })
    form.append(
        el("h2", { text: "ilogcal dashboard" }),
        base, experiment, token, role, participant, go,
    )
    form.addEventListener("submit", (event) => {
        event.preventDefault()
        const session: Session = {
            base: (base as HTMLInputElement).value.replace(/\/$/, ""),
            token: (token as HTMLInputElement).value,
            role: (role as HTMLSelectElement).value as RoleKind,
            participant: (participant as HTMLInputElement).value || null,
        }
        const api = new ApiClient(session)
        const state = initialState(
            (experiment as HTMLInputElement).value, session.role, session.participant,
        )
        root.replaceChildren()
        mountDashboard(root, api, state)
    })
    return form
}

export function mountDashboard(root: HTMLElement, api: ApiClient, state: ViewState): () => void {
    const alerts = new AlertsPane()
    const content = el("main", { id: "content" })
    const status = el("span", { class: "status", id: "connection-status" })

    const views: Record<string, () => Promise<HTMLElement>> = {
        summary: async () => renderSummary(await api.getSummary(state.experiment)),
        heatmap: async () =>
            renderHeatmap(
                await api.getHeatmap(
                    state.experiment, state.dateRange.from ?? undefined, state.dateRange.to ?? undefined,
                ),
            ),
        timeline: async () =>
            renderTimeline(await api.getTimeline(state.experiment, state.participant ?? state.selectedParticipants[0])),
        compare: async () => {
            if (state.selectedParticipants.length < 2) {
                return renderComparison({ offset: 0, series: {} }, state.selectedParticipants)
            }
            return renderComparison(
                await api.getCompare(state.experiment, state.selectedParticipants),
                state.selectedParticipants,
            )
        },
        "my-data": async () =>
            renderPersonalData(await api.getParticipantData(state.experiment, state.participant ?? undefined)),
        edit: async () => {
            const wrap = el("div", { class: "edit-view" })
            wrap.append(
                renderQuestionForm(api, state.experiment, () => show("timeline")),
                renderShiftForm(api, state.experiment, () => show("timeline")),
                renderQualityParamsForm(
                    api, state.experiment, await api.getQualityParams(state.experiment), () => show("summary"),
                ),
            )
            return wrap
        },
    }

    async function show(name: string): Promise<void> {
        state.view = name
        try {
            const view = await views[name]()
            content.replaceChildren(view)
        } catch (err) {
            content.replaceChildren(
                el("p", { class: "inline-error", text: (err as Error).message }),
            )
        }
    }

    const nav = el("nav", { class: "topnav" })
    const tabs: [string, string][] = [
        ["summary", "Summary"],
        ["heatmap", "Heatmap"],
        ["timeline", "Timeline"],
        ["compare", "Compare"],
        ["my-data", "My data"],
        ["edit", "Plan & parameters"],
    ]
    for (const [name, label] of tabs) {
        if (name === "compare" && state.role === "Participant") continue
        const button = el("button", { text: label, "data-view": name })
        button.addEventListener("click", () => void show(name))
        nav.append(button)
    }
    nav.append(status)

    root.append(nav, content, alerts.root)
    void show("summary")

    let stopped = false
    async function poll(): Promise<void> {
        if (stopped) return
        try {
            const response = await api.getStream(state.experiment, state.streamOffset)
            state.streamOffset = response.next_offset
            alerts.deliver(response.records)
            status.textContent = `live · offset ${state.streamOffset}`
        } catch (err) {
            status.textContent = `disconnected: ${(err as Error).message}`
        }
        if (!stopped) setTimeout(() => void poll(), POLL_INTERVAL_MS)
    }
    void poll()
    return () => {
        stopped = true
    }
}
