/** Typed HTTP client for the feedback service. */

export type Condition = "feedback" | "explanation_only";

export interface LengthConstraint {
  min_chars: number;
  max_chars: number;
}

export interface CriterionSpec {
  id: string;
  description: string;
  max_score: number;
}

export interface PromptDocument {
  id: string;
  prompt_text: string;
  question: string;
  length_constraint?: LengthConstraint | null;
  criteria: CriterionSpec[];
}

export interface CriterionEntry {
  score: number;
  cue_span?: [number, number] | null;
  error_signature?: string | null;
}

export interface AttemptRequest {
  text: string;
  per_criterion: Record<string, CriterionEntry>;
}

export interface AlignmentInfo {
  node_id: string | null;
  similarity: number | null;
  margin: number | null;
  aligned: boolean;
  runner_up_node_id: string | null;
  provider_kind: string | null;
}

export interface ReportItem {
  criterion_id: string;
  template_key: string;
  rendered_text: string;
  score: number;
  max_score: number;
  slots_used: Record<string, string>;
  alignment?: AlignmentInfo | null;
}

export interface FeedbackReport {
  response_id: string;
  total_score: number;
  max_total: number;
  overall_message: string;
  items: ReportItem[];
}

export interface ExplanationDocument {
  prompt_id: string;
  kind: "explanation";
  title: string;
  body: string;
}

export type LatestFeedback = FeedbackReport | ExplanationDocument;

export interface Attempt {
  index: number;
  submitted_at: string;
  text: string;
  per_criterion: Record<string, CriterionEntry>;
  total_score: number;
  delta: number | null;
  feedback_report_id: string | null;
}

export interface Session {
  session_id: string;
  prompt_id: string;
  condition: Condition;
  closed: boolean;
  attempts: Attempt[];
}

/** Error reported by the service with a machine-readable code. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly subject: string | null;

  constructor(status: number, code: string, message: string, subject: string | null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.subject = subject;
  }
}

/** The service could not be reached at all (network failure). */
export class OfflineError extends Error {
  constructor(cause: unknown) {
    super("service unreachable");
    this.name = "OfflineError";
    this.cause = cause;
  }
}

export function isExplanation(doc: LatestFeedback): doc is ExplanationDocument {
  return (doc as ExplanationDocument).kind === "explanation";
}

export interface ClientOptions {
  baseUrl: string;
  authToken?: string | null;
  /** Injectable for tests; defaults to the global fetch. */
  fetchFn?: typeof fetch;
}

export class ServiceClient {
  private readonly baseUrl: string;
  private readonly authToken: string | null;
  private readonly fetchFn: typeof fetch;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, "");
    this.authToken = options.authToken ?? null;
    this.fetchFn = options.fetchFn ?? fetch;
  }

  async health(): Promise<{ status: string }> {
    return this.request<{ status: string }>("GET", "/healthz");
  }

  async getPrompt(promptId: string): Promise<PromptDocument> {
    return this.request<PromptDocument>("GET", `/v1/prompts/${encodeURIComponent(promptId)}`);
  }

  async createSession(promptId: string, condition: Condition): Promise<Session> {
    return this.request<Session>("POST", "/v1/sessions", {
      prompt_id: promptId,
      condition,
    });
  }

  async getSession(sessionId: string): Promise<Session> {
    return this.request<Session>("GET", `/v1/sessions/${encodeURIComponent(sessionId)}`);
  }

  async submitAttempt(sessionId: string, body: AttemptRequest): Promise<Attempt> {
    return this.request<Attempt>(
      "POST",
      `/v1/sessions/${encodeURIComponent(sessionId)}/attempts`,
      body,
    );
  }

  async closeSession(sessionId: string): Promise<Session> {
    return this.request<Session>("POST", `/v1/sessions/${encodeURIComponent(sessionId)}/close`);
  }

  async latestFeedback(sessionId: string): Promise<LatestFeedback> {
    return this.request<LatestFeedback>(
      "GET",
      `/v1/sessions/${encodeURIComponent(sessionId)}/feedback/latest`,
    );
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { Accept: "application/json" };
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    if (this.authToken !== null) {
      headers["Authorization"] = `Bearer ${this.authToken}`;
    }
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new OfflineError(err);
    }
    if (!response.ok) {
      let code = "http-error";
      let message = `request failed with status ${response.status}`;
      let subject: string | null = null;
      try {
        const payload = (await response.json()) as Record<string, unknown>;
        if (typeof payload.code === "string") code = payload.code;
        if (typeof payload.message === "string") message = payload.message;
        if (typeof payload.subject === "string") subject = payload.subject;
      } catch {
        // Non-JSON error body; keep the status-based defaults.
      }
      throw new ApiError(response.status, code, message, subject);
    }
    return (await response.json()) as T;
  }
}
