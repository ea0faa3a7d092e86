// Live alerts pane fed by the stream cursor: quality flags appear as
// they are detected, deduplicated by (offset, kind, participant), no
// page reload involved.

import { el } from "../dom"
import type { StreamRecord } from "../types"

export class AlertsPane {
    root: HTMLElement
    private list: HTMLElement
    private seen = new Set<string>()

    constructor() {
        this.list = el("ul", { class: "alerts-list" })
        this.root = el("aside", { class: "alerts", id: "alerts" }, [
            el("h3", { text: "Alerts" }),
            this.list,
        ])
    }

    deliver(records: StreamRecord[]): number {
        let added = 0
        for (const record of records) {
            if (record.type !== "flag") continue
            const body = record.body
            const key = `${record.offset}:${body.kind}:${body.participant}`
            if (this.seen.has(key)) continue
            this.seen.add(key)
            this.list.prepend(
                el("li", { class: `alert alert-${body.kind}`, "data-key": key }, [
                    el("strong", { text: body.kind }),
                    el("span", { text: ` ${body.participant} at ${body.at}: ${body.detail}` }),
                ]),
            )
            added++
        }
        return added
    }
}
