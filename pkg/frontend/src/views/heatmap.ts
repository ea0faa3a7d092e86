// Participant-by-day answer-rate heatmap: participants on the x-axis,
// experiment days on the y-axis, green for high rates, yellow for low,
// blank-but-marked rows for days with no data at all (systemic issues).

import { el } from "../dom"
import type { Heatmap } from "../types"

function cellColor(rate: number | null): string {
    if (rate === null) return "transparent"
    // yellow (low) -> green (high)
    const hue = 50 + Math.round(70 * rate)
    return `hsl(${hue}, 85%, ${55 - 10 * rate}%)`
}

export function renderHeatmap(heatmap: Heatmap): HTMLElement {
    const flagged = new Set(heatmap.flagged_days)
    const root = el("div", { class: "heatmap-scroll" })
    const table = el("table", { class: "heatmap" })

    const head = el("tr", {}, [el("th", { text: "day" })])
    for (const pid of heatmap.participants) {
        head.append(el("th", { class: "pid", text: pid }))
    }
    table.append(head)

    heatmap.days.forEach((day, dayIndex) => {
        const isFlagged = flagged.has(day)
        const row = el("tr", { class: isFlagged ? "day-flagged" : "", "data-day": day })
        row.append(el("th", { text: isFlagged ? `${day} ⚠ no data` : day }))
        heatmap.participants.forEach((pid, pIndex) => {
            const rate = heatmap.cells[pIndex][dayIndex]
            const [answered, delivered] = heatmap.counts[pIndex][dayIndex]
            const cell = el("td", {
                class: "cell",
                "data-participant": pid,
                "data-day": day,
                title: `${pid} ${day}: ${answered}/${delivered} answered`,
            })
            cell.style.background = cellColor(rate)
            row.append(cell)
        })
        table.append(row)
    })

    root.append(table)
    return root
}
