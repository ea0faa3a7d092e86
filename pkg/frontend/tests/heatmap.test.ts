// The cohort-scale heatmap must render one cell per participant-day with
// no loss, flag all-empty days, and expose answered/delivered tooltips.

import { describe, expect, it } from "vitest"

import { renderHeatmap } from "../src/views/heatmap"
import type { Heatmap } from "../src/types"
import cohortFixture from "../fixtures/heatmap-cohort.json"
import smallFixture from "../fixtures/heatmap-small.json"

describe("heatmap", () => {
    it("renders every cell of the 170x28 cohort matrix", () => {
        const heatmap = cohortFixture as unknown as Heatmap
        expect(heatmap.participants.length).toBe(170)
        expect(heatmap.days.length).toBe(28)
        const root = renderHeatmap(heatmap)
        expect(root.querySelectorAll("td.cell").length).toBe(170 * 28)
    })

    it("marks days with no data at all", () => {
        const heatmap = cohortFixture as unknown as Heatmap
        const root = renderHeatmap(heatmap)
        const flagged = root.querySelectorAll("tr.day-flagged")
        expect(flagged.length).toBe(heatmap.flagged_days.length)
        expect(flagged.length).toBeGreaterThan(0)
        const label = flagged[0].querySelector("th")?.textContent ?? ""
        expect(label).toContain(heatmap.flagged_days[0])
        expect(label).toContain("no data")
    })

    it("tooltips carry answered/delivered counts", () => {
        const heatmap = smallFixture as unknown as Heatmap
        const root = renderHeatmap(heatmap)
        const pid = heatmap.participants[0]
        const day = heatmap.days[0]
        const cell = root.querySelector(`td[data-participant="${pid}"][data-day="${day}"]`)
        const [answered, delivered] = heatmap.counts[0][0]
        expect(cell?.getAttribute("title")).toBe(`${pid} ${day}: ${answered}/${delivered} answered`)
    })

    it("uses transparent background for days without deliveries", () => {
        const heatmap = smallFixture as unknown as Heatmap
        const root = renderHeatmap(heatmap)
        const row = heatmap.cells.findIndex((cells) => cells.some((c) => c === null))
        if (row >= 0) {
            const day = heatmap.days[heatmap.cells[row].findIndex((c) => c === null)]
            const cell = root.querySelector(
                `td[data-participant="${heatmap.participants[row]}"][data-day="${day}"]`,
            ) as HTMLElement
            expect(cell.style.background).toBe("transparent")
        }
    })
})
