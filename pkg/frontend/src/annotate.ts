/**
 * Annotation drafting for grammar inference: the user selects spans of an
 * example program and labels them. Overlap and balance problems are
 * rejected inline, before anything reaches the service.
 */

import type { SpanPayload } from "./api.js";

export const LABELS = [
  "keyword",
  "attr-name",
  "attr-value",
  "object-class",
  "block-open",
  "block-close",
  "reference",
] as const;

export const VALUE_TYPES = ["string", "int", "float", "bool"] as const;

export type AddResult = { ok: true } | { ok: false; error: string };

export class AnnotationDraft {
  readonly spans: SpanPayload[] = [];

  constructor(public text: string) {}

  addSpan(start: number, end: number, label: string, type?: string): AddResult {
    if (!(LABELS as readonly string[]).includes(label)) {
      return { ok: false, error: `unknown label '${label}'` };
    }
    if (!(start >= 0 && start < end && end <= this.text.length)) {
      return { ok: false, error: "select a non-empty range inside the program" };
    }
    if (label === "attr-value") {
      if (!type || !(VALUE_TYPES as readonly string[]).includes(type)) {
        return { ok: false, error: "attr-value needs a type (string, int, float, bool)" };
      }
    }
    for (const span of this.spans) {
      if (start < span.end && span.start < end) {
        return {
          ok: false,
          error: `overlaps the ${span.label} span at ${span.start}..${span.end}`,
        };
      }
    }
    this.spans.push({ start, end, label, type: label === "attr-value" ? type : undefined });
    this.spans.sort((a, b) => a.start - b.start);
    return { ok: true };
  }

  removeSpan(index: number): void {
    this.spans.splice(index, 1);
  }

  /** Problems that must be fixed before submitting. */
  validate(): string[] {
    const problems: string[] = [];
    let depth = 0;
    for (const span of this.spans) {
      if (span.label === "block-open") depth += 1;
      if (span.label === "block-close") {
        depth -= 1;
        if (depth < 0) problems.push("block-close without a matching block-open");
      }
    }
    if (depth > 0) problems.push("unbalanced block-open labels");
    if (!this.spans.some((s) => s.label === "object-class")) {
      problems.push("mark at least one object-class span");
    }
    return problems;
  }
}
