// Minimal DOM construction helper.

export function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag)
    for (const [key, value] of Object.entries(attrs)) {
        if (key === "class") node.className = value
        else if (key === "text") node.textContent = value
        else node.setAttribute(key, value)
    }
    for (const child of children) {
        node.append(child)
    }
    return node
}

// Displayed numbers come from the service verbatim: no rounding here.
export function verbatim(value: number | string | null | undefined): string {
    if (value === null || value === undefined) return "–"
    return String(value)
}
