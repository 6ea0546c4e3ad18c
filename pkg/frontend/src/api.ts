/**
 * Typed client for the grammar-forge session API.
 *
 * Field names mirror the service's pydantic models exactly; every mutation
 * carries the caller's revision and returns the fresh window 2/3 payloads.
 */

export interface SessionView {
  session_id: string;
  revision: number;
  metamodel_name: string;
  seed: number;
}

export interface ElementEntry {
  id: string;
  kind: string;
  rule: string;
  returns?: string | null;
  line_path?: number[] | null;
  element_index?: number | null;
  label: string;
  feature?: string | null;
  keyword?: string | null;
  cardinality?: string | null;
  block_open?: string | null;
  block_close?: string | null;
}

export interface GeneratedView {
  text: string;
  elements: ElementEntry[];
}

export interface ReportEntryView {
  index: number;
  rule_id: string;
  status: string;
  matched: number;
  lines_changed: number;
  message?: string | null;
}

export interface ReportView {
  entries: ReportEntryView[];
  totals: Record<string, number>;
}

export interface ConfigEntryView {
  index: number;
  line: string;
  rule_id: string;
  rule: string;
  attr?: string | null;
  context?: string | null;
  args: Record<string, unknown>;
}

export interface MigratedProgramView {
  name: string;
  text: string;
  dropped: string[];
  error?: string | null;
}

export interface PreviewView {
  programs: MigratedProgramView[];
  samples: string[];
}

export interface MutationResponse {
  revision: number;
  optimized: string;
  report: ReportView;
  previews: PreviewView;
  config: ConfigEntryView[];
}

export interface OptimizedView {
  revision: number;
  text: string;
  report: ReportView;
}

export interface CandidateView {
  rule_id: string;
  doc: string;
  rule: string;
  attr?: string | null;
  prefilled_args: Record<string, unknown>;
  args_schema: { name: string; type: string; required: boolean; default?: unknown }[];
  line?: string | null;
}

export interface SpanPayload {
  start: number;
  end: number;
  label: string;
  type?: string | null;
}

export interface InferResponse {
  metamodel: string;
  grammar: string;
  parse_ok: boolean;
  message?: string | null;
}

export interface EvolveResponse {
  revision: number;
  reuse: {
    entries: {
      index: number;
      rule_id: string;
      status: string;
      suggestion?: string | null;
    }[];
    summary: Record<string, unknown>;
  };
  optimized: string;
  report: ReportView;
  previews: PreviewView;
}

export interface StyleInfo {
  name: string;
  description: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly module: string,
    message: string,
  ) {
    super(message);
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let module = "service";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (body && body.error) {
      module = body.error.module ?? module;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(response.status, module, message);
}

export class WorkbenchClient {
  constructor(readonly baseUrl: string = "") {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return unwrap<T>(response);
  }

  private async get<T>(path: string): Promise<T> {
    return unwrap<T>(await fetch(this.baseUrl + path));
  }

  createSession(metamodel: string, seed = 42): Promise<SessionView> {
    return this.post("/api/sessions", { metamodel, seed });
  }

  getGenerated(sid: string): Promise<GeneratedView> {
    return this.get(`/api/sessions/${sid}/generated`);
  }

  getOptimized(sid: string): Promise<OptimizedView> {
    return this.get(`/api/sessions/${sid}/optimized`);
  }

  getPreviews(sid: string): Promise<PreviewView> {
    return this.get(`/api/sessions/${sid}/previews`);
  }

  getConfig(sid: string): Promise<ConfigEntryView[]> {
    return this.get(`/api/sessions/${sid}/config`);
  }

  addEntry(sid: string, revision: number, line: string): Promise<MutationResponse> {
    return this.post(`/api/sessions/${sid}/config/entries`, { revision, line });
  }

  async deleteEntry(sid: string, revision: number, index: number): Promise<MutationResponse> {
    const response = await fetch(
      `${this.baseUrl}/api/sessions/${sid}/config/entries/${index}?revision=${revision}`,
      { method: "DELETE" },
    );
    return unwrap<MutationResponse>(response);
  }

  reorder(sid: string, revision: number, order: number[]): Promise<MutationResponse> {
    return this.post(`/api/sessions/${sid}/config/reorder`, { revision, order });
  }

  candidates(sid: string, elementId: string): Promise<CandidateView[]> {
    return this.post(`/api/sessions/${sid}/selection`, { element_id: elementId });
  }

  applyStyle(sid: string, revision: number, name: string): Promise<MutationResponse> {
    return this.post(`/api/sessions/${sid}/style`, { revision, name });
  }

  listStyles(): Promise<StyleInfo[]> {
    return this.get("/api/styles");
  }

  importProgram(sid: string, revision: number, name: string, text: string): Promise<MutationResponse> {
    return this.post(`/api/sessions/${sid}/programs`, { revision, name, text });
  }

  infer(sid: string, text: string, spans: SpanPayload[]): Promise<InferResponse> {
    return this.post(`/api/sessions/${sid}/infer`, { text, spans });
  }

  evolve(sid: string, revision: number, metamodel: string): Promise<EvolveResponse> {
    return this.post(`/api/sessions/${sid}/evolve`, { revision, metamodel });
  }
}
