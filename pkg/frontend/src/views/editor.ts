// Plan and parameter editing: a question-definition form (name, content,
// category, answer options, cadence, scheduled window), a schedule-shift
// form, and the quality-parameter thresholds. Participants get read-only
// controls; policy and validation rejections from the service surface
// inline next to the form that caused them.

import type { ApiClient, ApiError } from "../api"
import { el } from "../dom"
import { insertQuestion, QuestionDraft } from "../plan-edit"
import type { QualityParams, Revision } from "../types"

function field(label: string, input: HTMLElement): HTMLElement {
    return el("label", { class: "field" }, [el("span", { text: label }), input])
}

function inlineError(form: HTMLElement, message: string): void {
    let box = form.querySelector<HTMLElement>(".inline-error")
    if (!box) {
        box = el("p", { class: "inline-error", role: "alert" })
        form.append(box)
    }
    box.textContent = message
}

function clearError(form: HTMLElement): void {
    form.querySelector(".inline-error")?.remove()
}

export function renderQuestionForm(
    api: ApiClient,
    experiment: string,
    onPlanUpdated: () => void,
): HTMLElement {
    const form = el("form", { class: "question-form", id: "question-form" })
    const name = el("input", { name: "content", placeholder: "Question text, e.g. What are you doing?" })
    const category = el("select", { name: "category" })
    for (const c of ["WA", "WE", "WO", "WI", "WU"]) category.append(el("option", { text: c, value: c }))
    const qtype = el("select", { name: "qtype" })
    for (const t of ["SINGLE-CHOICE", "MULTIPLE-CHOICE", "DICHOTOMOUS", "FREE-TEXT"])
        qtype.append(el("option", { text: t, value: t }))
    const options = el("input", { name: "options", placeholder: "answer options, comma separated" })
    const frequency = el("select", { name: "frequency" })
    for (const f of ["MINUTELY", "HOURLY", "DAILY", "WEEKLY"]) frequency.append(el("option", { text: f, value: f }))
    const interval = el("input", { name: "interval", type: "number", value: "30" })
    const count = el("input", { name: "count", type: "number", value: "672" })
    const dtstart = el("input", { name: "dtstart", placeholder: "20201102T080000Z" })
    const dtend = el("input", { name: "dtend", placeholder: "20201116T080000Z" })
    const calendarId = el("input", { name: "calendar", type: "number", value: "1" })
    const contextId = el("input", { name: "context", type: "number", value: "1" })
    const collectionId = el("input", { name: "collection", type: "number", value: "900" })
    const submit = el("button", { type: "submit", text: "Add question to the plan" })

    form.append(
        el("h3", { text: "Define a question" }),
        field("Question", name), field("Category", category), field("Type", qtype),
        field("Answer options", options),
        field("Repeat every", interval), field("Frequency", frequency), field("Times", count),
        field("From", dtstart), field("Until", dtend),
        field("Calendar", calendarId), field("Context collection", contextId),
        field("New collection id", collectionId),
        submit,
    )
    if (api.role !== "Researcher") {
        for (const control of form.querySelectorAll("input, select, button")) {
            control.setAttribute("disabled", "")
        }
        form.append(el("p", { class: "hint", text: "Only the researcher can edit the plan; you can view it." }))
        return form
    }

    form.addEventListener("submit", async (event) => {
        event.preventDefault()
        clearError(form)
        const draft: QuestionDraft = {
            calendarId: parseInt((calendarId as HTMLInputElement).value, 10),
            contextId: parseInt((contextId as HTMLInputElement).value, 10),
            collectionId: parseInt((collectionId as HTMLInputElement).value, 10),
            questionId: parseInt((collectionId as HTMLInputElement).value, 10),
            category: (category as HTMLSelectElement).value as QuestionDraft["category"],
            content: (name as HTMLInputElement).value,
            options: (options as HTMLInputElement).value.split(",").map((s) => s.trim()).filter(Boolean),
            qtype: (qtype as HTMLSelectElement).value as QuestionDraft["qtype"],
            dtstart: (dtstart as HTMLInputElement).value,
            dtend: (dtend as HTMLInputElement).value,
            frequency: (frequency as HTMLSelectElement).value,
            interval: parseInt((interval as HTMLInputElement).value, 10),
            count: parseInt((count as HTMLInputElement).value, 10),
        }
        try {
            const plan = await api.getPlan(experiment)
            await api.putPlan(experiment, insertQuestion(plan, draft))
            onPlanUpdated()
        } catch (err) {
            const problem = err as ApiError
            const detail = problem.problem?.diagnostics?.[0]
            inlineError(form, detail ? `${detail.path}: ${detail.message}` : problem.message)
        }
    })
    return form
}

export function renderShiftForm(api: ApiClient, experiment: string, onApplied: () => void): HTMLElement {
    const form = el("form", { class: "shift-form", id: "shift-form" })
    const calendarId = el("input", { name: "calendar", type: "number", value: "1" })
    const collectionId = el("input", { name: "collection", type: "number", value: "1" })
    const seq = el("input", { name: "seq", type: "number", value: "0" })
    const minutes = el("input", { name: "minutes", type: "number", value: "15" })
    const submit = el("button", { type: "submit", text: "Shift occurrence" })
    form.append(
        el("h3", { text: "Move a scheduled question" }),
        field("Calendar", calendarId), field("Collection", collectionId),
        field("Occurrence #", seq), field("Shift by (minutes)", minutes),
        submit,
    )
    form.addEventListener("submit", async (event) => {
        event.preventDefault()
        clearError(form)
        const revision: Revision = {
            actor: api.role,
            target: {
                calendar_id: parseInt((calendarId as HTMLInputElement).value, 10),
                collection_id: parseInt((collectionId as HTMLInputElement).value, 10),
                kind: "question",
                seq_no: parseInt((seq as HTMLInputElement).value, 10),
                participant: api.participant,
            },
            change: { kind: "shift", delta_s: parseInt((minutes as HTMLInputElement).value, 10) * 60 },
            issued_at: new Date().toISOString(),
        }
        try {
            await api.postRevision(experiment, revision)
            onApplied()
        } catch (err) {
            inlineError(form, (err as ApiError).message)
        }
    })
    return form
}

export function renderQualityParamsForm(
    api: ApiClient,
    experiment: string,
    params: QualityParams,
    onSaved: () => void,
): HTMLElement {
    const form = el("form", { class: "params-form", id: "params-form" })
    const unanswered = el("input", { name: "max_unanswered", type: "number", value: String(params.max_unanswered) })
    const completion = el("input", {
        name: "max_avg_completion_time", type: "number", value: String(params.max_avg_completion_time),
    })
    const response = el("input", {
        name: "max_avg_response_time", type: "number", value: String(params.max_avg_response_time),
    })
    const submit = el("button", { type: "submit", text: "Save thresholds" })
    form.append(
        el("h3", { text: "Quality parameters" }),
        field("Max unanswered questions", unanswered),
        field("Max avg completion time (s)", completion),
        field("Max avg response time (s)", response),
        submit,
    )
    if (api.role !== "Researcher") {
        for (const control of form.querySelectorAll("input, button")) control.setAttribute("disabled", "")
        form.append(el("p", { class: "hint", text: "Thresholds are set by the researcher; shown here read-only." }))
        return form
    }
    form.addEventListener("submit", async (event) => {
        event.preventDefault()
        clearError(form)
        try {
            await api.putQualityParams(experiment, {
                max_unanswered: parseInt((unanswered as HTMLInputElement).value, 10),
                max_avg_completion_time: parseFloat((completion as HTMLInputElement).value),
                max_avg_response_time: parseFloat((response as HTMLInputElement).value),
                medium_band: params.medium_band,
            })
            onSaved()
        } catch (err) {
            inlineError(form, (err as ApiError).message)
        }
    })
    return form
}
