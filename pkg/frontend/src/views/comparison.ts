// Side-by-side answering behavior for 2-4 selected participants: the top
// chart accumulates stored answers, the bottom one tracks the reaction
// time in seconds, one colored polyline per participant.

import { el } from "../dom"
import type { Comparison } from "../types"

const COLORS = ["#2a9d8f", "#e76f51", "#e9c46a", "#264653"]
const WIDTH = 640
const HEIGHT = 180
const SVG_NS = "http://www.w3.org/2000/svg"

function lineChart(
    title: string,
    series: { pid: string; points: (number | null)[] }[],
    nDays: number,
): HTMLElement {
    const wrap = el("figure", { class: "chart" }, [el("figcaption", { text: title })])
    const svg = document.createElementNS(SVG_NS, "svg")
    svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`)
    svg.setAttribute("class", "comparison-chart")
    const peak = Math.max(1, ...series.flatMap((s) => s.points.filter((p): p is number => p !== null)))
    series.forEach((s, index) => {
        const polyline = document.createElementNS(SVG_NS, "polyline")
        const coords: string[] = []
        s.points.forEach((value, i) => {
            if (value === null) return
            const x = nDays > 1 ? (i / (nDays - 1)) * (WIDTH - 20) + 10 : WIDTH / 2
            const y = HEIGHT - 10 - (value / peak) * (HEIGHT - 30)
            coords.push(`${x.toFixed(1)},${y.toFixed(1)}`)
        })
        polyline.setAttribute("points", coords.join(" "))
        polyline.setAttribute("fill", "none")
        polyline.setAttribute("stroke", COLORS[index % COLORS.length])
        polyline.setAttribute("stroke-width", "2")
        polyline.setAttribute("data-participant", s.pid)
        svg.append(polyline)
    })
    wrap.append(svg as unknown as Node)
    return wrap
}

export function renderComparison(comparison: Comparison, selected: string[]): HTMLElement {
    const root = el("div", { class: "comparison" })
    if (selected.length < 2 || selected.length > 4) {
        root.append(
            el("p", {
                class: "hint",
                text: "Select two to four participants to compare their answering behavior.",
            }),
        )
        return root
    }
    const days = Array.from(
        new Set(selected.flatMap((pid) => comparison.series[pid]?.days ?? [])),
    ).sort()
    const index = new Map(days.map((d, i) => [d, i]))

    const answers = selected.map((pid) => {
        const s = comparison.series[pid]
        const points: (number | null)[] = new Array(days.length).fill(null)
        let last = 0
        s.days.forEach((d, i) => {
            points[index.get(d) as number] = s.cumulative_answers[i]
            last = s.cumulative_answers[i]
        })
        // carry the running total across quiet days
        for (let i = 0; i < points.length; i++) if (points[i] === null && i > 0) points[i] = points[i - 1]
        void last
        return { pid, points }
    })
    const reactions = selected.map((pid) => {
        const s = comparison.series[pid]
        const points: (number | null)[] = new Array(days.length).fill(null)
        s.days.forEach((d, i) => {
            points[index.get(d) as number] = s.avg_reaction_s[i]
        })
        return { pid, points }
    })

    const legend = el("ul", { class: "legend" })
    selected.forEach((pid, i) => {
        const item = el("li", { text: pid })
        item.style.color = COLORS[i % COLORS.length]
        legend.append(item)
    })
    root.append(
        legend,
        lineChart("Answers contributed so far", answers, days.length),
        lineChart("Reaction time (seconds)", reactions, days.length),
    )
    return root
}
