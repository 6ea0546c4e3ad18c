/**
 * End-to-end tests against a live grammar-forge service (spawned in
 * service-setup.ts): the UI contract for selection, one-round-trip
 * updates, and the annotation-to-inference flow.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeEach, describe, expect, inject, it } from "vitest";

import { Workbench } from "../src/workbench.js";

const here = dirname(fileURLToPath(import.meta.url));
const FIXTURES = join(here, "..", "..", "tests", "fixtures");

const metamodelDoc = readFileSync(join(FIXTURES, "mini_eatxt_v1.mm.json"), "utf-8");
const annotation = JSON.parse(
  readFileSync(join(FIXTURES, "ann_basic.ann.json"), "utf-8"),
) as { text: string; spans: { start: number; end: number; label: string; type?: string }[] };

const baseUrl = inject("baseUrl");

function mount(): Workbench {
  document.body.innerHTML = '<div id="app"></div>';
  return new Workbench(document.getElementById("app")!, baseUrl);
}

async function createSession(wb: Workbench): Promise<void> {
  await wb.createSession(metamodelDoc);
  expect(wb.sessionId).toBeTruthy();
}

function window1(wb: Workbench): HTMLElement {
  return wb.root.querySelector("#window1") as HTMLElement;
}

function window2Text(wb: Workbench): string {
  return (wb.root.querySelector("#window2") as HTMLElement).textContent ?? "";
}

describe("workbench UI contract", () => {
  let wb: Workbench;

  beforeEach(async () => {
    wb = mount();
    await createSession(wb);
  });

  it("renders window 1 byte-identical to the canonical grammar text", () => {
    const paragraphs = wb.generatedText.replace(/\n$/, "").split("\n\n");
    const ruleParagraphs = paragraphs.filter(
      (p) => !p.startsWith("grammar ") && !p.startsWith("terminal "),
    );
    expect(window1(wb).textContent).toBe(ruleParagraphs.join("\n\n") + "\n");
  });

  it("starts with window 2 equal to window 1's grammar", () => {
    expect(window2Text(wb)).toBe(wb.generatedText);
  });

  it("clicking the shortName keyword prefills remove_keyword in the properties pane", async () => {
    const span = [...window1(wb).querySelectorAll("span.el")].find(
      (el) => el.textContent === "'shortName'" && (el as HTMLElement).dataset.id?.startsWith("EAPackage:"),
    ) as HTMLElement;
    expect(span).toBeTruthy();
    span.click();
    await new Promise((resolve) => setTimeout(resolve, 150));

    const candidates = [...wb.root.querySelectorAll("#candidates button.candidate")].map(
      (b) => (b as HTMLElement).dataset.ruleId,
    );
    expect(candidates).toContain("remove_keyword");

    const removeButton = wb.root.querySelector(
      '#candidates button[data-rule-id="remove_keyword"]',
    ) as HTMLElement;
    removeButton.click();
    const form = wb.root.querySelector("#entry-form") as HTMLFormElement;
    expect(form.hidden).toBe(false);
    expect(form.dataset.rule).toBe("EAPackage");
    expect(form.dataset.attr).toBe("shortName");
    const keywordInput = form.querySelector('input[name="keyword"]') as HTMLInputElement;
    expect(keywordInput.value).toBe("shortName");
  });

  it("submitting an entry updates windows 2 and 3 in one round trip", async () => {
    const before2 = window2Text(wb);
    const calls: string[] = [];
    const realFetch = globalThis.fetch;
    globalThis.fetch = async (input: any, init?: any) => {
      calls.push(`${init?.method ?? "GET"} ${String(input)}`);
      return realFetch(input, init);
    };
    try {
      await wb.addEntry("remove_keyword rule=* keyword=shortName");
    } finally {
      globalThis.fetch = realFetch;
    }
    // Exactly one request: the mutation itself carries windows 2 and 3.
    expect(calls).toHaveLength(1);
    expect(calls[0]).toContain("POST");
    expect(calls[0]).toContain("/config/entries");

    const after2 = window2Text(wb);
    expect(after2).not.toBe(before2);
    expect(after2).not.toContain("'shortName'");
    const samples = wb.root.querySelectorAll("#window3 .preview.sample pre");
    expect(samples.length).toBeGreaterThan(0);
    const configLines = wb.root.querySelectorAll("#config-list li");
    expect(configLines).toHaveLength(1);
  });

  it("deleting every entry makes window 2 equal window 1 again", async () => {
    await wb.addEntry("remove_keyword rule=* keyword=shortName");
    await wb.addEntry("rename_keyword rule=* old=comment new=doc");
    expect(window2Text(wb)).not.toBe(wb.generatedText);

    let deleteButtons = wb.root.querySelectorAll("#config-list button.delete-entry");
    expect(deleteButtons).toHaveLength(2);
    while (deleteButtons.length > 0) {
      (deleteButtons[0] as HTMLElement).click();
      await new Promise((resolve) => setTimeout(resolve, 200));
      deleteButtons = wb.root.querySelectorAll("#config-list button.delete-entry");
    }
    expect(window2Text(wb)).toBe(wb.generatedText);
  });

  it("reordering entries round-trips through the service", async () => {
    await wb.addEntry("rename_keyword rule=* old=comment new=doc");
    await wb.addEntry("rename_keyword rule=* old=doc new=note");
    expect(window2Text(wb)).toContain("'note'");

    (wb.root.querySelector("#config-list li:last-child button.move-up") as HTMLElement).click();
    await new Promise((resolve) => setTimeout(resolve, 250));
    // Reversed, the second rename misses and the first still applies.
    expect(window2Text(wb)).toContain("'doc'");
  });

  it("surfaces validation errors from the service inline", async () => {
    await wb.addEntry("frobnicate rule=*");
    const banner = wb.root.querySelector("#error-banner") as HTMLElement;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("unknown rule");
  });
});

describe("annotation flow", () => {
  let wb: Workbench;

  beforeEach(async () => {
    wb = mount();
    await createSession(wb);
  });

  it("labeling the fixture example yields an inferred grammar that parses it", async () => {
    const textarea = wb.root.querySelector("#annotate-text") as HTMLTextAreaElement;
    textarea.value = annotation.text;
    for (const span of annotation.spans) {
      wb.addAnnotationSpan(span.start, span.end, span.label, span.type);
    }
    const errorBox = wb.root.querySelector("#annotate-error") as HTMLElement;
    expect(errorBox.hidden).toBe(true);

    await wb.submitAnnotation();
    expect(window2Text(wb)).toContain("EAPackage returns EAPackage");
    expect(window2Text(wb)).toContain("('shortName' shortName=EString)?");
    const status = wb.root.querySelector("#annotate-status") as HTMLElement;
    expect(status.textContent).toContain("parses under the inferred grammar");
  });

  it("rejects overlapping spans inline before submit", () => {
    const textarea = wb.root.querySelector("#annotate-text") as HTMLTextAreaElement;
    textarea.value = annotation.text;
    wb.addAnnotationSpan(0, 9, "object-class");
    wb.addAnnotationSpan(5, 12, "keyword");
    const errorBox = wb.root.querySelector("#annotate-error") as HTMLElement;
    expect(errorBox.hidden).toBe(false);
    expect(errorBox.textContent).toContain("overlaps");
  });

  it("rejects unbalanced block labels before submit", async () => {
    const textarea = wb.root.querySelector("#annotate-text") as HTMLTextAreaElement;
    textarea.value = annotation.text;
    wb.addAnnotationSpan(0, 9, "object-class");
    wb.addAnnotationSpan(10, 11, "block-open");
    const calls: string[] = [];
    const realFetch = globalThis.fetch;
    globalThis.fetch = async (input: any, init?: any) => {
      calls.push(String(input));
      return realFetch(input, init);
    };
    try {
      await wb.submitAnnotation();
    } finally {
      globalThis.fetch = realFetch;
    }
    expect(calls).toHaveLength(0); // validation failed locally, nothing sent
    const errorBox = wb.root.querySelector("#annotate-error") as HTMLElement;
    expect(errorBox.hidden).toBe(false);
    expect(errorBox.textContent).toContain("unbalanced");
  });
});

describe("typed client contract", () => {
  it("exercises the session endpoints end to end", async () => {
    const wb = mount();
    await createSession(wb);
    const sid = wb.sessionId!;
    const client = wb.client;

    const generated = await client.getGenerated(sid);
    expect(generated.elements.length).toBeGreaterThan(50);

    const styles = await client.listStyles();
    expect(styles.map((s) => s.name)).toContain("python_style");

    const styled = await client.applyStyle(sid, wb.revision, "python_style");
    expect(styled.optimized).toContain("INDENT");
    expect(styled.config).toHaveLength(2);

    const evolved = await client.evolve(
      sid,
      styled.revision,
      readFileSync(join(FIXTURES, "mini_eatxt_v2.mm.json"), "utf-8"),
    );
    expect(evolved.optimized).toContain("EAPkg");
    expect(evolved.reuse.summary["applied"]).toBe(2);
  });
});
