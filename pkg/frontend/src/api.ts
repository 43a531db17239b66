/**
 * Thin typed client for the v1 wire protocol. The fetch implementation is
 * injected so tests can stub the network and the app can run under jsdom.
 */

import type {
  CandidatesResponse,
  DecisionRecord,
  DecisionRequest,
  FetchLike,
  UnresolvedPayload,
} from './types.js';

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number | null = null
  ) {
    super(message);
  }
}

export class TriageApi {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`);
    } catch (err) {
      throw new ApiError(`service unreachable: ${err}`);
    }
    if (!response.ok) {
      throw new ApiError(`GET ${path} failed (${response.status})`, response.status);
    }
    return (await response.json()) as T;
  }

  unresolved(): Promise<UnresolvedPayload> {
    return this.getJson<UnresolvedPayload>('/v1/unresolved');
  }

  candidates(callsite: number, k: number): Promise<CandidatesResponse> {
    return this.getJson<CandidatesResponse>(`/v1/candidates/${callsite}?k=${k}`);
  }

  async postDecision(decision: DecisionRequest): Promise<DecisionRecord> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/v1/decisions`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(decision),
      });
    } catch (err) {
      throw new ApiError(`service unreachable: ${err}`);
    }
    if (!response.ok) {
      throw new ApiError(`POST /v1/decisions failed (${response.status})`, response.status);
    }
    return (await response.json()) as DecisionRecord;
  }

  async exportEdges(onlyAnalyst = false): Promise<string> {
    const suffix = onlyAnalyst ? '?only=analyst' : '';
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/v1/export${suffix}`);
    } catch (err) {
      throw new ApiError(`service unreachable: ${err}`);
    }
    if (!response.ok) {
      throw new ApiError(`GET /v1/export failed (${response.status})`, response.status);
    }
    return await response.text();
  }
}
