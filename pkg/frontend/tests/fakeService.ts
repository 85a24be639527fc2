import type { FetchLike } from "../src/api.js";
import type { CandidatePayload, EntityType, Progress } from "../src/types.js";

interface StoredCandidate {
  payload: CandidatePayload;
  state: "queued" | "labeled" | "rejected";
  claimed: boolean;
}

interface Applied {
  request: string;
  result: { candidate_id: string; version: number; state: string };
}

export interface FixtureSpec {
  surface: string;
  truth: EntityType | null;
}

/**
 * In-memory double of the annotation service, faithful to its contract:
 * optimistic versioning, idempotent retries, 409 on stale or conflicting
 * claims, advance-merges-entities, pool exhaustion after one round.
 */
export class FakeService {
  private candidates = new Map<string, StoredCandidate>();
  private order: string[] = [];
  private applied = new Map<string, Applied>();
  private labeled = 0;
  private round = 1;
  private stopped = false;
  private dict = new Set<string>();
  private failures = 0;
  requestLog: string[] = [];

  constructor(fixtures: FixtureSpec[], initialDictSize = 5) {
    for (let i = 0; i < initialDictSize; i++) this.dict.add(`seed:${i}:PKG`);
    fixtures.forEach((fixture, i) => {
      const text = `some report mentioning ${fixture.surface} here`;
      const charStart = text.indexOf(fixture.surface);
      const payload: CandidatePayload = {
        candidate_id: `doc${i}:3:4`,
        version: 0,
        doc_id: `doc${i}`,
        text,
        surface: fixture.surface,
        token_start: 3,
        token_end: 4,
        char_start: charStart,
        char_end: charStart + fixture.surface.length,
        left_context: ["some", "report", "mentioning"],
        right_context: ["here"],
        classifier_confidence: 0.5,
        provider_score: 0.9,
      };
      this.candidates.set(payload.candidate_id, {
        payload,
        state: "queued",
        claimed: false,
      });
      this.order.push(payload.candidate_id);
    });
  }

  /** Make the next n fetches reject, simulating a network outage. */
  failNextRequests(n: number): void {
    this.failures = n;
  }

  /** Simulate a claim TTL expiry so another session can claim it. */
  releaseClaim(candidateId: string): void {
    const stored = this.candidates.get(candidateId);
    if (stored) stored.claimed = false;
  }

  dictSize(): number {
    return this.dict.size;
  }

  progress(): Progress {
    const states = [...this.candidates.values()].map((c) => c.state);
    const counts: Record<string, number> = {};
    for (const key of this.dict) {
      const code = key.split(":").at(-1) ?? "PKG";
      counts[code] = (counts[code] ?? 0) + 1;
    }
    return {
      round: this.round,
      pool: 0,
      queued: states.filter((s) => s === "queued").length,
      labeled: this.labeled,
      rejected: states.filter((s) => s === "rejected").length,
      entities: states.filter((s) => s === "labeled").length,
      dict_size: this.dict.size,
      dict_counts: counts,
      dataset_size: this.candidates.size,
      stopped: this.stopped,
      stop_reason: this.stopped ? "pool_exhausted" : null,
    };
  }

  private json(status: number, body: unknown) {
    return Promise.resolve({
      status,
      json: () => Promise.resolve(body),
    });
  }

  fetch: FetchLike = (input, init) => {
    this.requestLog.push(`${init?.method ?? "GET"} ${input}`);
    if (this.failures > 0) {
      this.failures -= 1;
      return Promise.reject(new TypeError("network down"));
    }
    const method = init?.method ?? "GET";
    if (input.endsWith("/api/candidates/next") && method === "GET") {
      for (const id of this.order) {
        const stored = this.candidates.get(id);
        if (stored && stored.state === "queued" && !stored.claimed) {
          stored.claimed = true;
          return this.json(200, { ...stored.payload });
        }
      }
      return this.json(204, null);
    }
    if (input.endsWith("/api/labels") && method === "POST") {
      const body = JSON.parse(init?.body ?? "{}") as {
        candidate_id: string;
        version: number;
        decision: string;
        entity_type?: string;
      };
      if (body.decision === "entity" && !body.entity_type) {
        return this.json(400, { error: "entity decision requires entity_type" });
      }
      if (body.decision !== "entity" && body.decision !== "non-entity") {
        return this.json(400, { error: "unknown decision" });
      }
      const replayKey = `${body.candidate_id}:${body.version}`;
      const requestDigest = `${body.decision}:${body.entity_type ?? ""}`;
      const earlier = this.applied.get(replayKey);
      if (earlier) {
        if (earlier.request === requestDigest) return this.json(200, earlier.result);
        return this.json(409, { error: "already labeled differently" });
      }
      const stored = this.candidates.get(body.candidate_id);
      if (!stored) return this.json(404, { error: "no such candidate" });
      if (stored.state !== "queued") {
        return this.json(409, { error: `candidate is ${stored.state}` });
      }
      if (stored.payload.version !== body.version) {
        return this.json(409, { error: "stale claim" });
      }
      stored.payload.version += 1;
      stored.claimed = false;
      stored.state = body.decision === "entity" ? "labeled" : "rejected";
      if (body.decision === "entity") {
        this.dict.add(`${stored.payload.surface.toLowerCase()}:${body.entity_type}`);
      }
      this.labeled += 1;
      const result = {
        candidate_id: body.candidate_id,
        version: stored.payload.version,
        state: stored.state,
      };
      this.applied.set(replayKey, { request: requestDigest, result });
      return this.json(200, result);
    }
    if (input.endsWith("/api/progress") && method === "GET") {
      return this.json(200, this.progress());
    }
    if (input.endsWith("/api/rounds/advance") && method === "POST") {
      const queued = [...this.candidates.values()].some((c) => c.state === "queued");
      if (queued) return this.json(409, { error: "queued candidates remain" });
      this.stopped = true; // single-round fixture: nothing left to harvest
      return this.json(200, this.progress());
    }
    if (input.endsWith("/api/metrics") && method === "GET") {
      return this.json(200, { available: false });
    }
    return this.json(404, { error: `no route for ${method} ${input}` });
  };
}

export const FIVE_CANDIDATES: FixtureSpec[] = [
  { surface: "netplan", truth: "PKG" },
  { surface: "kubuntu", truth: "OS" },
  { surface: "bzip", truth: "CMD" },
  { surface: "whatever", truth: null },
  { surface: "something", truth: null },
];
