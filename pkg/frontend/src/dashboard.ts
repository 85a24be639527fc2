import { ApiClient } from "./api.js";
import type { MetricsReply, Progress } from "./types.js";

/**
 * Polls progress and metrics; on failure it keeps the last snapshot and
 * raises the stale flag instead of fabricating numbers.
 */
export class Dashboard {
  progress: Progress | null = null;
  metrics: MetricsReply | null = null;
  stale = false;

  constructor(private readonly api: ApiClient) {}

  async refresh(): Promise<void> {
    try {
      this.progress = await this.api.progress();
      this.metrics = await this.api.metrics();
      this.stale = false;
    } catch {
      this.stale = true;
    }
  }
}
