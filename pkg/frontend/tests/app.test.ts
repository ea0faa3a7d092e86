// Whole-app behavior: role-scoped requests (participant sessions never
// touch foreign endpoints), live flag delivery into the alerts pane, and
// the per-day personal data navigation.

import { afterEach, describe, expect, it } from "vitest"

import { ApiClient, Session } from "../src/api"
import { initialState } from "../src/state"
import { mountDashboard } from "../src/main"
import { renderPersonalData } from "../src/views/personal"
import type { ParticipantData, StreamResponse } from "../src/types"

import participantData from "../fixtures/participant-data.json"
import participantSummary from "../fixtures/summary-participant.json"
import qualityParams from "../fixtures/quality-params.json"
import streamFixture from "../fixtures/stream-tail.json"

const stops: (() => void)[] = []

afterEach(() => {
    while (stops.length) (stops.pop() as () => void)()
    document.body.replaceChildren()
})

function participantClient(calls: string[]): ApiClient {
    const session: Session = { base: "http://svc", token: "t", role: "Participant", participant: "p00" }
    const fetcher = (async (url: string) => {
        calls.push(url)
        let body: unknown = {}
        if (url.includes("/summary")) body = participantSummary
        else if (url.includes("/participants/p00/data")) body = participantData
        else if (url.includes("/quality-params")) body = qualityParams
        else if (url.includes("/stream")) body = streamFixture
        return { ok: true, status: 200, text: async () => JSON.stringify(body) }
    }) as unknown as typeof fetch
    return new ApiClient(session, fetcher)
}

function flush(): Promise<void> {
    return new Promise((resolve) => setTimeout(resolve, 0))
}

describe("participant session", () => {
    it("renders the dashboard without panel B and only queries its own slice", async () => {
        const calls: string[] = []
        const api = participantClient(calls)
        const root = document.createElement("div")
        document.body.append(root)
        stops.push(mountDashboard(root, api, initialState("demo", "Participant", "p00")))
        await flush()
        await flush()
        expect(root.querySelector("#panel-a")).not.toBeNull()
        expect(root.querySelector("#panel-b")).toBeNull()

        // navigate to the personal-data view through the nav
        const button = Array.from(root.querySelectorAll("nav button")).find(
            (b) => b.getAttribute("data-view") === "my-data",
        ) as HTMLButtonElement
        button.click()
        await flush()
        expect(root.querySelector(".personal")).not.toBeNull()

        // every request stays inside the participant's own slice
        const foreign = calls.filter((url) => /participants\/(?!p00\b)/.test(url))
        expect(foreign).toEqual([])
        expect(calls.every((url) => !url.includes("compare"))).toBe(true)
    })

    it("hides the compare tab from participants", async () => {
        const api = participantClient([])
        const root = document.createElement("div")
        document.body.append(root)
        stops.push(mountDashboard(root, api, initialState("demo", "Participant", "p00")))
        await flush()
        const tabs = Array.from(root.querySelectorAll("nav button")).map((b) => b.getAttribute("data-view"))
        expect(tabs).not.toContain("compare")
    })

    it("delivers stream flags into the alerts pane without reloading", async () => {
        const api = participantClient([])
        const root = document.createElement("div")
        document.body.append(root)
        stops.push(mountDashboard(root, api, initialState("demo", "Participant", "p00")))
        await flush()
        await flush()
        const stream = streamFixture as unknown as StreamResponse
        const visible = stream.records.filter(
            (r) => r.type === "flag",
        ).length
        expect(root.querySelectorAll("#alerts .alert").length).toBe(visible)
        expect(root.querySelector("#connection-status")?.textContent).toContain(
            `offset ${stream.next_offset}`,
        )
    })
})

describe("personal data navigation", () => {
    it("steps across days", () => {
        const data = participantData as unknown as ParticipantData
        const days = Object.keys(data.days).sort()
        const container = document.createElement("div")
        document.body.append(container)
        container.append(renderPersonalData(data))
        expect(container.querySelector(".current-day")?.textContent).toBe(days[0])
        const next = Array.from(container.querySelectorAll("button")).find((b) =>
            (b.textContent ?? "").includes("next day"),
        ) as HTMLButtonElement
        next.click()
        expect(container.querySelector(".current-day")?.textContent).toBe(days[1])
    })
})
