// Personal data exploration: one day at a time, answers grouped by
// question category, with previous/next navigation across the
// experiment days.

import { el } from "../dom"
import type { ParticipantData } from "../types"

const CATEGORY_TITLES: Record<string, string> = {
    WE: "Where",
    WA: "Doing",
    WI: "Mood",
    WO: "With",
    WU: "Using",
}

export function renderPersonalData(data: ParticipantData, dayIndex = 0): HTMLElement {
    const days = Object.keys(data.days).sort()
    const root = el("div", { class: "personal" })
    root.append(el("h3", { text: `Collected answers of ${data.participant}` }))
    if (days.length === 0) {
        root.append(el("p", { class: "zero-state", text: "No answers recorded yet." }))
        return root
    }
    const index = Math.max(0, Math.min(dayIndex, days.length - 1))
    const day = days[index]

    const nav = el("nav", { class: "daynav" })
    const previous = el("button", { text: "← previous day", ...(index === 0 ? { disabled: "" } : {}) })
    const next = el("button", { text: "next day →", ...(index === days.length - 1 ? { disabled: "" } : {}) })
    const label = el("strong", { class: "current-day", text: day })
    nav.append(previous, label, next)
    root.append(nav)

    const byCategory = data.days[day]
    const listWrap = el("div", { class: "day-answers", "data-day": day })
    for (const category of Object.keys(byCategory).sort()) {
        const title = CATEGORY_TITLES[category] ?? category
        const answers = byCategory[category]
        const section = el("section", {}, [el("h4", { text: `${title} (${answers.length})` })])
        const list = el("ul")
        for (const answer of answers) list.append(el("li", { text: answer }))
        section.append(list)
        listWrap.append(section)
    }
    root.append(listWrap)

    previous.addEventListener("click", () => {
        root.replaceWith(renderPersonalData(data, index - 1))
    })
    next.addEventListener("click", () => {
        root.replaceWith(renderPersonalData(data, index + 1))
    })
    return root
}
