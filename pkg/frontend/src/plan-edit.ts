// Client-side plan editing: append a question collection to a context
// collection inside the plan document. Works on the canonical documents
// the service serves (one property per line, CRLF or LF).

export function escapeText(value: string): string {
    return value.replace(/\\/g, "\\\\").replace(/;/g, "\\;").replace(/,/g, "\\,").replace(/\n/g, "\\n")
}

export interface QuestionDraft {
    calendarId: number
    contextId: number
    collectionId: number
    questionId: number
    category: "WE" | "WA" | "WI" | "WO" | "WU"
    content: string
    options: string[]
    qtype: "DICHOTOMOUS" | "MULTIPLE-CHOICE" | "SINGLE-CHOICE" | "FREE-TEXT"
    dtstart: string // YYYYMMDDTHHMMSSZ
    dtend: string
    frequency: string // wire token, e.g. MINUTELY
    interval: number
    count: number
}

export function questionBlock(draft: QuestionDraft): string[] {
    const lines = [
        "BEGIN:X-ILOG-QUESTION",
        `UID:${draft.collectionId}`,
        `DTSTART:${draft.dtstart}`,
        `DTEND:${draft.dtend}`,
        "STATUS:1",
        `RRULE:FREQ=${draft.frequency};INTERVAL=${draft.interval};COUNT=${draft.count}`,
        `X-QID:${draft.questionId}`,
        `X-QCATEGORY:${draft.category}`,
        `X-QCONTENT:${escapeText(draft.content)}`,
    ]
    if (draft.options.length > 0) {
        lines.push(`X-QOPTIONS:${draft.options.map(escapeText).join(",")}`)
    }
    lines.push(`X-QTYPE:${draft.qtype}`, "END:X-ILOG-QUESTION")
    return lines
}

export function insertQuestion(planText: string, draft: QuestionDraft): string {
    const newline = planText.includes("\r\n") ? "\r\n" : "\n"
    const lines = planText.split(newline)
    let calendar: number | null = null
    let context: number | null = null
    const stack: string[] = []
    for (let i = 0; i < lines.length; i++) {
        const line = lines[i]
        if (line.startsWith("BEGIN:")) {
            stack.push(line.slice(6))
        } else if (line.startsWith("END:")) {
            const kind = line.slice(4)
            if (
                kind === "X-ILOG-CONTEXT" &&
                calendar === draft.calendarId &&
                context === draft.contextId
            ) {
                const updated = lines.slice(0, i).concat(questionBlock(draft), lines.slice(i))
                return updated.join(newline)
            }
            if (kind === "X-ILOG-CONTEXT") context = null
            if (kind === "VCALENDAR") calendar = null
            stack.pop()
        } else if (line.startsWith("UID:")) {
            const uid = parseInt(line.slice(4), 10)
            const inside = stack[stack.length - 1]
            if (inside === "VCALENDAR") calendar = uid
            else if (inside === "X-ILOG-CONTEXT") context = uid
        }
    }
    throw new Error(`context collection ${draft.calendarId}/${draft.contextId} not found in the plan`)
}
