/**
 * Query orchestration: one in-flight restore per gap, later requests
 * supersede earlier ones, and stale responses are discarded by request id.
 * Service errors surface as panel state and never touch the working text.
 */

import type { ApiClient, Candidate, DateEstimate, PlaceRanking } from "./api.js";
import type { Session } from "./session.js";

export type QueryOutcome =
  | { kind: "fresh"; candidates: Candidate[] }
  | { kind: "stale" }
  | { kind: "error"; message: string };

export class RestoreController {
  private latest = new Map<string, number>();
  private counter = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly session: Session,
  ) {}

  /** Issue a restore query for one gap; resolves stale if superseded. */
  async query(gapId: string): Promise<QueryOutcome> {
    const gap = this.session.gap(gapId);
    const requestId = ++this.counter;
    this.latest.set(gapId, requestId);
    this.session.recordQuery(gapId, gap.letters);
    let candidates: Candidate[];
    try {
      const response = await this.api.restore({
        text: this.session.workingText,
        gap_start: gap.offset,
        gap_chars: gap.length,
        letters: gap.letters,
      });
      candidates = response.candidates;
    } catch (error) {
      if (this.latest.get(gapId) !== requestId) return { kind: "stale" };
      return { kind: "error", message: error instanceof Error ? error.message : String(error) };
    }
    if (this.latest.get(gapId) !== requestId) {
      return { kind: "stale" };
    }
    this.session.setPanel(gapId, candidates);
    return { kind: "fresh", candidates };
  }

  attributePlace(): Promise<PlaceRanking> {
    return this.api.attributePlace(this.session.workingText);
  }

  attributeDate(): Promise<DateEstimate> {
    return this.api.attributeDate(this.session.workingText);
  }
}
