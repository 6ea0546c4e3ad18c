/**
 * The three-window workbench: generated grammar with selectable elements
 * (window 1), live optimized grammar (window 2), instance previews
 * (window 3), a properties pane offering applicable catalog rules for the
 * current selection, and the ordered configuration list.
 *
 * The UI holds no state beyond the session id and pending form inputs;
 * every window renders from service payloads, and each config mutation
 * repaints windows 2 and 3 from the single mutation response.
 */

import {
  ApiError,
  CandidateView,
  ConfigEntryView,
  MutationResponse,
  PreviewView,
  WorkbenchClient,
} from "./api.js";
import { AnnotationDraft, LABELS, VALUE_TYPES } from "./annotate.js";
import { renderGrammar } from "./grammarView.js";

export class Workbench {
  readonly client: WorkbenchClient;
  sessionId: string | null = null;
  revision = 0;
  generatedText = "";
  private draft: AnnotationDraft | null = null;

  constructor(
    readonly root: HTMLElement,
    baseUrl = "",
  ) {
    this.client = new WorkbenchClient(baseUrl);
    this.mount();
  }

  private el<T extends HTMLElement = HTMLElement>(selector: string): T {
    const found = this.root.querySelector(selector);
    if (!found) throw new Error(`missing ${selector}`);
    return found as T;
  }

  private mount(): void {
    this.root.innerHTML = `
      <header class="topbar">
        <h1>grammar-forge</h1>
        <textarea id="metamodel-input" rows="3"
          placeholder="Paste a metamodel document (.mm.json) here"></textarea>
        <button id="create-session">Create session</button>
        <span id="session-info"></span>
        <span id="error-banner" class="error" hidden></span>
      </header>
      <main class="windows">
        <section class="window">
          <h2>&#9312; Generated grammar</h2>
          <pre id="window1" class="grammar"></pre>
        </section>
        <section class="window">
          <h2>&#9313; Optimized grammar</h2>
          <pre id="window2" class="grammar"></pre>
        </section>
        <section class="window">
          <h2>&#9314; Instance previews</h2>
          <div id="window3"></div>
        </section>
      </main>
      <aside class="panes">
        <section class="pane">
          <h2>Properties</h2>
          <div id="selection-label" class="muted">Select an element in window &#9312;.</div>
          <ul id="candidates"></ul>
          <form id="entry-form" hidden>
            <div id="entry-args"></div>
            <button type="submit">Add entry</button>
          </form>
        </section>
        <section class="pane">
          <h2>Configuration</h2>
          <ol id="config-list"></ol>
          <form id="raw-entry-form">
            <input id="raw-entry" placeholder="rule_id key=value ..." size="40">
            <button type="submit">Add line</button>
          </form>
        </section>
        <section class="pane">
          <h2>Annotate example</h2>
          <textarea id="annotate-text" rows="4" placeholder="Example program text"></textarea>
          <div>
            <select id="annotate-label">${LABELS.map((l) => `<option>${l}</option>`).join("")}</select>
            <select id="annotate-type">${VALUE_TYPES.map((t) => `<option>${t}</option>`).join("")}</select>
            <button id="annotate-add">Label selection</button>
          </div>
          <ul id="annotate-spans"></ul>
          <div id="annotate-error" class="error" hidden></div>
          <button id="annotate-submit">Infer grammar</button>
          <div id="annotate-status"></div>
        </section>
      </aside>
    `;

    this.el("#create-session").addEventListener("click", () => {
      void this.createSession(this.el<HTMLTextAreaElement>("#metamodel-input").value);
    });
    this.el("#window1").addEventListener("click", (event) => {
      const target = (event.target as HTMLElement).closest("span.el") as HTMLElement | null;
      if (target?.dataset.id) void this.select(target.dataset.id);
    });
    this.el<HTMLFormElement>("#raw-entry-form").addEventListener("submit", (event) => {
      event.preventDefault();
      const input = this.el<HTMLInputElement>("#raw-entry");
      if (input.value.trim()) void this.addEntry(input.value.trim());
      input.value = "";
    });
    this.el("#annotate-add").addEventListener("click", (event) => {
      event.preventDefault();
      this.addAnnotationSpan();
    });
    this.el("#annotate-submit").addEventListener("click", (event) => {
      event.preventDefault();
      void this.submitAnnotation();
    });
  }

  private showError(message: string | null): void {
    const banner = this.el("#error-banner");
    banner.hidden = message === null;
    banner.textContent = message ?? "";
  }

  private async guard<T>(work: () => Promise<T>): Promise<T | null> {
    try {
      const result = await work();
      this.showError(null);
      return result;
    } catch (error) {
      if (error instanceof ApiError) {
        const hint = error.status === 409 ? " (refresh: another tab changed the session)" : "";
        this.showError(`${error.module}: ${error.message}${hint}`);
      } else {
        this.showError(`connection lost: ${String(error)}`);
      }
      return null;
    }
  }

  // -- session lifecycle ----------------------------------------------------

  async createSession(metamodelDoc: string): Promise<void> {
    const session = await this.guard(() => this.client.createSession(metamodelDoc));
    if (!session) return;
    this.sessionId = session.session_id;
    this.revision = session.revision;
    this.el("#session-info").textContent =
      `session ${session.session_id} (${session.metamodel_name}), revision ${session.revision}`;
    await this.refreshAll();
  }

  /** Reload every window from the service (used on load and after 409s). */
  async refreshAll(): Promise<void> {
    if (!this.sessionId) return;
    const sid = this.sessionId;
    const generated = await this.guard(() => this.client.getGenerated(sid));
    if (!generated) return;
    this.generatedText = generated.text;
    renderGrammar(this.el("#window1"), generated.elements);
    const optimized = await this.guard(() => this.client.getOptimized(sid));
    if (!optimized) return;
    this.revision = optimized.revision;
    this.el("#window2").textContent = optimized.text;
    const previews = await this.guard(() => this.client.getPreviews(sid));
    if (previews) this.renderPreviews(previews);
    const config = await this.guard(() => this.client.getConfig(sid));
    if (config) this.renderConfig(config);
  }

  // -- selection / properties pane -------------------------------------------

  async select(elementId: string): Promise<void> {
    if (!this.sessionId) return;
    const sid = this.sessionId;
    for (const marked of this.root.querySelectorAll("span.el.selected")) {
      marked.classList.remove("selected");
    }
    for (const span of this.root.querySelectorAll("span.el")) {
      if ((span as HTMLElement).dataset.id === elementId) {
        span.classList.add("selected");
      }
    }
    const candidates = await this.guard(() => this.client.candidates(sid, elementId));
    if (!candidates) return;
    this.el("#selection-label").textContent = elementId;
    this.renderCandidates(candidates);
  }

  private renderCandidates(candidates: CandidateView[]): void {
    const list = this.el("#candidates");
    list.innerHTML = "";
    const doc = this.root.ownerDocument;
    for (const candidate of candidates) {
      const item = doc.createElement("li");
      const button = doc.createElement("button");
      button.type = "button";
      button.className = "candidate";
      button.dataset.ruleId = candidate.rule_id;
      button.textContent = candidate.rule_id;
      button.title = candidate.doc;
      button.addEventListener("click", () => this.showEntryForm(candidate));
      item.appendChild(button);
      const doc_ = doc.createElement("small");
      doc_.textContent = " " + candidate.doc;
      item.appendChild(doc_);
      list.appendChild(item);
    }
    this.el("#entry-form").hidden = true;
  }

  private showEntryForm(candidate: CandidateView): void {
    const form = this.el<HTMLFormElement>("#entry-form");
    const args = this.el("#entry-args");
    const doc = this.root.ownerDocument;
    args.innerHTML = "";
    form.hidden = false;
    form.dataset.ruleId = candidate.rule_id;
    form.dataset.rule = candidate.rule;
    form.dataset.attr = candidate.attr ?? "";

    const scope = doc.createElement("div");
    scope.className = "muted";
    scope.textContent =
      `scope: rule=${candidate.rule}` + (candidate.attr ? ` attr=${candidate.attr}` : "");
    args.appendChild(scope);

    for (const spec of candidate.args_schema) {
      const label = doc.createElement("label");
      label.textContent = `${spec.name} `;
      const input = doc.createElement("input");
      input.name = spec.name;
      input.dataset.argType = spec.type;
      const prefilled = candidate.prefilled_args[spec.name];
      input.value = prefilled != null ? String(prefilled) : spec.default != null ? String(spec.default) : "";
      label.appendChild(input);
      args.appendChild(label);
    }
    form.onsubmit = (event) => {
      event.preventDefault();
      void this.addEntry(this.buildEntryLine(form));
    };
  }

  private buildEntryLine(form: HTMLFormElement): string {
    const parts = [form.dataset.ruleId ?? "", `rule=${form.dataset.rule}`];
    if (form.dataset.attr) parts.push(`attr=${form.dataset.attr}`);
    for (const input of form.querySelectorAll("input")) {
      const value = (input as HTMLInputElement).value;
      if (value === "") continue;
      const quoted = /[\s'#]/.test(value) || value === "" ? `'${value}'` : value;
      parts.push(`${(input as HTMLInputElement).name}=${quoted}`);
    }
    return parts.join(" ");
  }

  // -- configuration ----------------------------------------------------------

  async addEntry(line: string): Promise<void> {
    if (!this.sessionId) return;
    const sid = this.sessionId;
    const response = await this.guard(() => this.client.addEntry(sid, this.revision, line));
    if (response) this.applyMutation(response);
  }

  async deleteEntry(index: number): Promise<void> {
    if (!this.sessionId) return;
    const sid = this.sessionId;
    const response = await this.guard(() => this.client.deleteEntry(sid, this.revision, index));
    if (response) this.applyMutation(response);
  }

  async moveEntry(index: number, delta: number): Promise<void> {
    if (!this.sessionId) return;
    const sid = this.sessionId;
    const config = await this.guard(() => this.client.getConfig(sid));
    if (!config) return;
    const order = config.map((entry) => entry.index);
    const target = index + delta;
    if (target < 0 || target >= order.length) return;
    [order[index], order[target]] = [order[target], order[index]];
    const response = await this.guard(() => this.client.reorder(sid, this.revision, order));
    if (response) this.applyMutation(response);
  }

  /** One mutation response repaints windows 2 and 3 and the config list. */
  private applyMutation(response: MutationResponse): void {
    this.revision = response.revision;
    this.el("#window2").textContent = response.optimized;
    this.renderPreviews(response.previews);
    this.renderConfig(response.config);
  }

  private renderConfig(entries: ConfigEntryView[]): void {
    const list = this.el("#config-list");
    const doc = this.root.ownerDocument;
    list.innerHTML = "";
    entries.forEach((entry, index) => {
      const item = doc.createElement("li");
      const code = doc.createElement("code");
      code.textContent = entry.line;
      item.appendChild(code);
      const up = doc.createElement("button");
      up.textContent = "↑";
      up.className = "move-up";
      up.addEventListener("click", () => void this.moveEntry(index, -1));
      const down = doc.createElement("button");
      down.textContent = "↓";
      down.className = "move-down";
      down.addEventListener("click", () => void this.moveEntry(index, 1));
      const del = doc.createElement("button");
      del.textContent = "×";
      del.className = "delete-entry";
      del.addEventListener("click", () => void this.deleteEntry(index));
      item.append(" ", up, down, del);
      list.appendChild(item);
    });
  }

  private renderPreviews(previews: PreviewView): void {
    const container = this.el("#window3");
    const doc = this.root.ownerDocument;
    container.innerHTML = "";
    for (const program of previews.programs) {
      const block = doc.createElement("div");
      block.className = "preview program";
      const title = doc.createElement("h3");
      title.textContent = program.error ? `${program.name} (migration failed)` : program.name;
      block.appendChild(title);
      const pre = doc.createElement("pre");
      pre.textContent = program.error ?? program.text;
      block.appendChild(pre);
      if (program.dropped.length) {
        const note = doc.createElement("small");
        note.textContent = "dropped: " + program.dropped.join("; ");
        block.appendChild(note);
      }
      container.appendChild(block);
    }
    previews.samples.forEach((sample, i) => {
      const block = doc.createElement("div");
      block.className = "preview sample";
      const title = doc.createElement("h3");
      title.textContent = `sample ${i + 1}`;
      block.appendChild(title);
      const pre = doc.createElement("pre");
      pre.textContent = sample;
      block.appendChild(pre);
      container.appendChild(block);
    });
  }

  // -- annotation --------------------------------------------------------------

  get annotation(): AnnotationDraft {
    const textarea = this.el<HTMLTextAreaElement>("#annotate-text");
    if (!this.draft || this.draft.text !== textarea.value) {
      this.draft = new AnnotationDraft(textarea.value);
      this.renderSpans();
    }
    return this.draft;
  }

  addAnnotationSpan(start?: number, end?: number, label?: string, type?: string): void {
    const textarea = this.el<HTMLTextAreaElement>("#annotate-text");
    const draft = this.annotation;
    const from = start ?? textarea.selectionStart;
    const to = end ?? textarea.selectionEnd;
    const chosenLabel = label ?? this.el<HTMLSelectElement>("#annotate-label").value;
    const chosenType =
      type ?? (chosenLabel === "attr-value" ? this.el<HTMLSelectElement>("#annotate-type").value : undefined);
    const result = draft.addSpan(from, to, chosenLabel, chosenType);
    const errorBox = this.el("#annotate-error");
    if (!result.ok) {
      errorBox.hidden = false;
      errorBox.textContent = result.error;
      return;
    }
    errorBox.hidden = true;
    this.renderSpans();
  }

  private renderSpans(): void {
    const list = this.el("#annotate-spans");
    const doc = this.root.ownerDocument;
    list.innerHTML = "";
    if (!this.draft) return;
    this.draft.spans.forEach((span, index) => {
      const item = doc.createElement("li");
      const token = this.draft!.text.slice(span.start, span.end);
      item.textContent = `${span.label}${span.type ? `(${span.type})` : ""}: "${token}" `;
      const remove = doc.createElement("button");
      remove.textContent = "×";
      remove.addEventListener("click", () => {
        this.draft!.removeSpan(index);
        this.renderSpans();
      });
      item.appendChild(remove);
      list.appendChild(item);
    });
  }

  async submitAnnotation(): Promise<void> {
    if (!this.sessionId) return;
    const draft = this.annotation;
    const errorBox = this.el("#annotate-error");
    const problems = draft.validate();
    if (problems.length) {
      errorBox.hidden = false;
      errorBox.textContent = problems.join("; ");
      return;
    }
    errorBox.hidden = true;
    const sid = this.sessionId;
    const response = await this.guard(() =>
      this.client.infer(
        sid,
        draft.text,
        draft.spans.map((s) => ({ ...s, type: s.type ?? null })),
      ),
    );
    if (!response) return;
    // The inferred grammar opens in window 2 for inspection.
    this.el("#window2").textContent = response.grammar;
    this.el("#annotate-status").textContent = response.parse_ok
      ? "example parses under the inferred grammar"
      : `example does not parse: ${response.message ?? ""}`;
  }
}
