/**
 * Window 1: the generated grammar rebuilt from the service's element index
 * as clickable token spans. The rendered text is byte-identical to the
 * service's canonical grammar text, so the view doubles as the text and
 * the selection surface.
 */

import type { ElementEntry } from "./api.js";

interface LineNode {
  entry: ElementEntry;
  elements: ElementEntry[];
  children: Map<number, LineNode[]>; // by block element index
}

const SUFFIX: Record<string, string> = { optional: "?", star: "*", plus: "+" };

function delimiterToken(delim: string): string {
  return delim === "INDENT" || delim === "DEDENT" ? delim : `'${delim}'`;
}

interface Segment {
  text: string;
  id: string | null;
  glued: boolean; // no space before this segment
}

function buildRuleTree(entries: ElementEntry[]): { rule: ElementEntry; top: LineNode[] } {
  const rule = entries.find((e) => e.kind === "rule");
  if (!rule) {
    throw new Error("element index lacks a rule entry");
  }
  const byPath = new Map<string, LineNode>();
  const top: LineNode[] = [];
  for (const entry of entries) {
    if (entry.kind === "rule" || !entry.line_path) continue;
    const key = entry.line_path.join(".");
    if (entry.element_index == null) {
      const node: LineNode = { entry, elements: [], children: new Map() };
      byPath.set(key, node);
      if (entry.line_path.length === 1) {
        top.push(node);
      } else {
        const hostKey = entry.line_path.slice(0, -2).join(".");
        const blockIndex = entry.line_path[entry.line_path.length - 2];
        const host = byPath.get(hostKey);
        if (!host) throw new Error(`orphan line ${key}`);
        if (!host.children.has(blockIndex)) host.children.set(blockIndex, []);
        host.children.get(blockIndex)!.push(node);
      }
    } else {
      byPath.get(key)?.elements.push(entry);
    }
  }
  return { rule, top };
}

function renderLine(node: LineNode, depth: number): Segment[][] {
  const card = node.entry.cardinality ?? "required";
  const grouped = card !== "required";
  const rows: Segment[][] = [];
  let segments: Segment[] = [];
  let firstSegment = true;

  const startRow = (): Segment[] => {
    const row: Segment[] = [{ text: "\t".repeat(depth), id: null, glued: true }];
    if (grouped && firstSegment) {
      row.push({ text: "(", id: null, glued: true });
    }
    return row;
  };

  const flush = (row: Segment[], final: boolean) => {
    if (final && grouped) {
      row.push({ text: ")" + (SUFFIX[card] ?? ""), id: null, glued: true });
    }
    rows.push(row);
  };

  let row = startRow();
  let gluedNext = true;
  for (const element of node.elements) {
    if (element.kind === "block") {
      const body = node.children.get(element.element_index!) ?? [];
      const open = delimiterToken(element.block_open ?? "{");
      const close = delimiterToken(element.block_close ?? "}");
      if (body.length === 0) {
        row.push({ text: open, id: element.id, glued: gluedNext });
        row.push({ text: close, id: element.id, glued: false });
        gluedNext = false;
        continue;
      }
      row.push({ text: open, id: element.id, glued: gluedNext });
      flush(row, false);
      firstSegment = false;
      for (const inner of body) {
        rows.push(...renderLine(inner, depth + 1));
      }
      row = [{ text: "\t".repeat(depth), id: null, glued: true }];
      row.push({ text: close, id: element.id, glued: true });
      gluedNext = false;
    } else {
      row.push({ text: element.label, id: element.id, glued: gluedNext });
      gluedNext = false;
    }
  }
  flush(row, true);
  return rows;
}

export function renderGrammar(container: HTMLElement, elements: ElementEntry[]): void {
  container.textContent = "";
  const doc = container.ownerDocument;
  const byRule = new Map<string, ElementEntry[]>();
  const ruleOrder: string[] = [];
  for (const entry of elements) {
    if (!byRule.has(entry.rule)) {
      byRule.set(entry.rule, []);
      ruleOrder.push(entry.rule);
    }
    byRule.get(entry.rule)!.push(entry);
  }

  const appendSegments = (rows: Segment[][]) => {
    for (const row of rows) {
      row.forEach((segment, i) => {
        if (!segment.glued && i > 0) {
          container.appendChild(doc.createTextNode(" "));
        }
        if (segment.id) {
          const span = doc.createElement("span");
          span.className = "el";
          span.dataset.id = segment.id;
          span.textContent = segment.text;
          container.appendChild(span);
        } else {
          container.appendChild(doc.createTextNode(segment.text));
        }
      });
      container.appendChild(doc.createTextNode("\n"));
    }
  };

  ruleOrder.forEach((ruleName, index) => {
    const { rule, top } = buildRuleTree(byRule.get(ruleName)!);
    if (index > 0) container.appendChild(doc.createTextNode("\n"));
    const header = doc.createElement("span");
    header.className = "el rule-header";
    header.dataset.id = rule.id;
    header.textContent = `${rule.rule} returns ${rule.returns ?? rule.rule}:`;
    container.appendChild(header);
    container.appendChild(doc.createTextNode("\n"));
    for (const line of top) {
      appendSegments(renderLine(line, 1));
    }
    container.appendChild(doc.createTextNode(";\n"));
  });
}

/** Canonical text of the rendered parser rules (terminal rules are not part
 * of the selectable index; the caller appends them when comparing). */
export function renderedText(container: HTMLElement): string {
  return container.textContent ?? "";
}
