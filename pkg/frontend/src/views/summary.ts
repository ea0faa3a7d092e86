// The landing view: six panels (A-F) summarising a running experiment.
// Panel B (live participant count) exists only on researcher sessions.

import { el, verbatim } from "../dom"
import type { Summary } from "../types"

function panel(id: string, title: string, body: HTMLElement): HTMLElement {
    return el("section", { class: "panel", id }, [el("h3", { text: title }), body])
}

function statList(pairs: [string, number | string | null][]): HTMLElement {
    const list = el("dl", { class: "stats" })
    for (const [label, value] of pairs) {
        list.append(el("dt", { text: label }))
        list.append(el("dd", { class: "value", text: verbatim(value) }))
    }
    return list
}

export function renderSummary(summary: Summary): HTMLElement {
    const root = el("div", { class: "summary-grid" })

    const qp = summary.quality_params
    root.append(
        panel("panel-a", "Quality parameters", statList([
            ["max unanswered", qp.max_unanswered],
            ["max avg completion (s)", qp.max_avg_completion_time],
            ["max avg response (s)", qp.max_avg_response_time],
            ["medium band", qp.medium_band.join(" – ")],
        ])),
    )

    if (summary.participant_count !== null) {
        root.append(
            panel("panel-b", "Participants live", statList([
                ["in the experiment now", summary.participant_count],
            ])),
        )
    }

    root.append(
        panel("panel-c", "Progress", statList([
            ["days covered", summary.progress.days_covered],
            ["days left", summary.progress.days_left],
        ])),
        panel("panel-d", "Question delivery", statList([
            ["delivery rate", summary.delivery_rate],
        ])),
        panel("panel-e", summary.participant ? "Your answers" : "Answers", statList([
            ["answers stored", summary.answers.answered_total],
            ["answer rate", summary.answers.answer_rate],
            ["avg reaction (s)", summary.answers.avg_reaction_s],
            ["avg completion (s)", summary.answers.avg_completion_s],
        ])),
    )

    const sensorTable = el("table", { class: "sensors" })
    sensorTable.append(el("tr", {}, [
        el("th", { text: "sensor" }), el("th", { text: "readings" }),
        el("th", { text: "cadence" }), el("th", { text: "rate" }),
    ]))
    for (const [name, stats] of Object.entries(summary.sensors)) {
        sensorTable.append(el("tr", {}, [
            el("td", { text: name }),
            el("td", { class: "value", text: verbatim(stats.readings) }),
            el("td", { class: "value", text: verbatim(stats.cadence) }),
            el("td", { class: "value", text: verbatim(stats.rate) }),
        ]))
    }
    root.append(panel("panel-f", "Sensors", sensorTable))

    if (summary.answers.answered_total === 0) {
        root.append(el("p", { class: "zero-state", text: "No data collected yet: check the plan and the participants' devices." }))
    }
    return root
}
