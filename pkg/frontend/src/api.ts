import type {
  CandidatePayload,
  LabelRequest,
  LabelResult,
  MetricsReply,
  Progress,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
  },
) => Promise<{
  status: number;
  json(): Promise<unknown>;
}>;

/** Error carrying the HTTP status so callers can branch on 409/400. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

/**
 * Thin typed client over the annotation service; the fetch function is
 * injectable so tests can script the server side.
 */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly annotator: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(): Record<string, string> {
    return {
      "Content-Type": "application/json",
      "X-Annotator-Id": this.annotator,
    };
  }

  /** Claim the next queued candidate; null when the queue is drained. */
  async nextCandidate(): Promise<CandidatePayload | null> {
    const reply = await this.fetchFn(`${this.baseUrl}/api/candidates/next`, {
      headers: this.headers(),
    });
    if (reply.status === 204) return null;
    if (reply.status !== 200) {
      throw new ApiError(reply.status, `claim failed: ${reply.status}`);
    }
    return (await reply.json()) as CandidatePayload;
  }

  async submitLabel(request: LabelRequest): Promise<LabelResult> {
    const reply = await this.fetchFn(`${this.baseUrl}/api/labels`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(request),
    });
    if (reply.status !== 200) {
      throw new ApiError(reply.status, `label rejected: ${reply.status}`);
    }
    return (await reply.json()) as LabelResult;
  }

  async progress(): Promise<Progress> {
    const reply = await this.fetchFn(`${this.baseUrl}/api/progress`, {
      headers: this.headers(),
    });
    if (reply.status !== 200) {
      throw new ApiError(reply.status, `progress failed: ${reply.status}`);
    }
    return (await reply.json()) as Progress;
  }

  async advanceRound(): Promise<Progress> {
    const reply = await this.fetchFn(`${this.baseUrl}/api/rounds/advance`, {
      method: "POST",
      headers: this.headers(),
    });
    if (reply.status !== 200) {
      throw new ApiError(reply.status, `advance rejected: ${reply.status}`);
    }
    return (await reply.json()) as Progress;
  }

  async metrics(): Promise<MetricsReply> {
    const reply = await this.fetchFn(`${this.baseUrl}/api/metrics`, {
      headers: this.headers(),
    });
    if (reply.status !== 200) {
      throw new ApiError(reply.status, `metrics failed: ${reply.status}`);
    }
    return (await reply.json()) as MetricsReply;
  }
}
