/**
 * Typed client for the restoration service's /v1 JSON API.
 *
 * The fetch implementation is injectable so tests can substitute delayed
 * or scripted responses.
 */

export interface Provenance {
  model_id: string | null;
  seed: number;
  version: string;
}

export interface Candidate {
  text: string;
  score: number;
  letters_ok: boolean;
}

export interface RestoreResponse {
  letters: number;
  candidates: Candidate[];
  provenance: Provenance;
}

export interface PlaceRanking {
  labels: { label: string; score: number }[];
  provenance: Provenance;
}

export interface DateEstimate {
  year: number;
  distribution: { start: number; end: number; p: number }[];
  provenance: Provenance;
}

export interface GapRequest {
  text: string;
  gap_start: number;
  gap_chars: number;
  letters: number;
  n?: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      const detail = await response.text();
      throw new ApiError(response.status, `${path} failed: ${response.status} ${detail}`);
    }
    return (await response.json()) as T;
  }

  restore(request: GapRequest): Promise<RestoreResponse> {
    return this.post<RestoreResponse>("/v1/restore", { n: 20, ...request });
  }

  attributePlace(text: string): Promise<PlaceRanking> {
    return this.post<PlaceRanking>("/v1/attribute/place", { text });
  }

  attributeDate(text: string): Promise<DateEstimate> {
    return this.post<DateEstimate>("/v1/attribute/date", { text });
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchFn(`${this.baseUrl}/v1/health`);
      return response.ok;
    } catch {
      return false;
    }
  }
}
