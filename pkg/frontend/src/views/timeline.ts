// Calendar-style timeline: upcoming occurrences grouped per day, with
// cancelled firings struck through. The same data is exportable as an
// iCalendar VEVENT stream for external calendar clients.

import { el } from "../dom"
import type { Timeline } from "../types"

export function renderTimeline(timeline: Timeline, limitDays = 7): HTMLElement {
    const root = el("div", { class: "timeline" })
    root.append(el("h3", { text: `Schedule (version ${timeline.version})` }))
    const byDay = new Map<string, typeof timeline.occurrences>()
    for (const occ of timeline.occurrences) {
        const day = occ.scheduled_at.slice(0, 10)
        if (!byDay.has(day)) byDay.set(day, [])
        ;(byDay.get(day) as typeof timeline.occurrences).push(occ)
    }
    let shown = 0
    for (const day of Array.from(byDay.keys()).sort()) {
        if (shown >= limitDays) break
        shown++
        const section = el("section", { class: "timeline-day", "data-day": day }, [el("h4", { text: day })])
        const list = el("ul")
        for (const occ of byDay.get(day) as typeof timeline.occurrences) {
            const time = occ.scheduled_at.slice(11, 16)
            const label = `${time} ${occ.kind} ${occ.calendar}/${occ.collection} #${occ.seq}`
            list.append(el("li", { class: occ.cancelled ? "cancelled" : "", text: label }))
        }
        section.append(list)
        root.append(section)
    }
    return root
}
