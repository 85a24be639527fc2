import { ApiClient, ApiError } from "./api.js";
import { actionForKey } from "./keyboard.js";
import type { CandidatePayload, LabelRequest, Progress, Selection } from "./types.js";

export type ReviewState =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "reviewing"; candidate: CandidatePayload; selection: Selection | null }
  | { kind: "drained" }
  | { kind: "stopped"; reason: string | null }
  | { kind: "retrying" };

/**
 * Claim -> decide -> submit -> claim again, until the queue drains.
 *
 * Stale claims (409) refetch transparently; a network failure keeps the
 * decision locally and retries it, and the candidate version suppresses
 * duplicate submits on the service side.  Every number shown comes from
 * an API response held in `progress`.
 */
export class ReviewSession {
  state: ReviewState = { kind: "idle" };
  progress: Progress | null = null;
  pendingLabel: LabelRequest | null = null;
  private submitting = false;
  private readonly onChange: () => void;

  constructor(
    private readonly api: ApiClient,
    options: { onChange?: () => void } = {},
  ) {
    this.onChange = options.onChange ?? (() => {});
  }

  private emit(): void {
    this.onChange();
  }

  async refreshProgress(): Promise<void> {
    this.progress = await this.api.progress();
    this.emit();
  }

  /** Claim the next candidate (or learn that the queue is drained). */
  async next(): Promise<void> {
    if (this.pendingLabel) return; // a decision is still being delivered
    this.state = { kind: "loading" };
    this.emit();
    const candidate = await this.api.nextCandidate();
    await this.refreshProgress();
    if (candidate === null) {
      this.state =
        this.progress?.stopped === true
          ? { kind: "stopped", reason: this.progress.stop_reason }
          : { kind: "drained" };
    } else {
      this.state = { kind: "reviewing", candidate, selection: null };
    }
    this.emit();
  }

  select(selection: Selection): void {
    if (this.state.kind !== "reviewing") return;
    this.state = { ...this.state, selection };
    this.emit();
  }

  /** Submit stays disabled until a decision is complete. */
  canSubmit(): boolean {
    return this.state.kind === "reviewing" && this.state.selection !== null;
  }

  private toRequest(candidate: CandidatePayload, selection: Selection): LabelRequest {
    if (selection.decision === "entity") {
      return {
        candidate_id: candidate.candidate_id,
        version: candidate.version,
        decision: "entity",
        entity_type: selection.entityType,
      };
    }
    return {
      candidate_id: candidate.candidate_id,
      version: candidate.version,
      decision: "non-entity",
    };
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || this.submitting) return;
    if (this.state.kind !== "reviewing" || this.state.selection === null) return;
    const request = this.toRequest(this.state.candidate, this.state.selection);
    this.submitting = true;
    try {
      await this.deliver(request);
    } finally {
      this.submitting = false;
    }
    if (this.pendingLabel === null) {
      await this.next();
    }
  }

  /**
   * Deliver one label. 409 means the claim went stale (another
   * annotator got there first); dropping the candidate and refetching is
   * the correct recovery. A thrown fetch (network down) keeps the
   * decision for `retryPending`.
   */
  private async deliver(request: LabelRequest): Promise<void> {
    try {
      await this.api.submitLabel(request);
      this.pendingLabel = null;
    } catch (error) {
      if (error instanceof ApiError) {
        this.pendingLabel = null; // 4xx: the service made a decision; move on
        if (error.status !== 409) throw error;
      } else {
        this.pendingLabel = request;
        this.state = { kind: "retrying" };
        this.emit();
      }
    }
  }

  /** Retry a locally retained decision after a network failure. */
  async retryPending(): Promise<void> {
    const request = this.pendingLabel;
    if (request === null) return;
    await this.deliver(request);
    if (this.pendingLabel === null) {
      await this.next();
    }
  }

  /** The drained-queue prompt's action. */
  async advanceRound(): Promise<void> {
    if (this.state.kind !== "drained") return;
    this.progress = await this.api.advanceRound();
    this.emit();
    if (this.progress.stopped) {
      this.state = { kind: "stopped", reason: this.progress.stop_reason };
      this.emit();
      return;
    }
    await this.next();
  }

  /** Route a keystroke; returns true when it changed anything. */
  async handleKey(key: string): Promise<boolean> {
    const action = actionForKey(key);
    switch (action.kind) {
      case "select":
        if (this.state.kind !== "reviewing") return false;
        this.select(action.selection);
        return true;
      case "submit":
        if (!this.canSubmit()) return false;
        await this.submit();
        return true;
      case "next":
        if (this.state.kind === "reviewing") return false; // no silent skip
        await this.next();
        return true;
      default:
        return false;
    }
  }
}
