/**
 * Wire-protocol types (triage service, v1).
 */

export interface SitePayload {
  id: number;
  kind: string;
  file: string | null;
  start: number;
  end: number;
  excerpt: string | null;
  excerpt_highlight: [number, number] | null;
}

export interface DecisionRecord {
  callsite: number;
  callee: number | null;
  verdict: Verdict;
  analyst: string;
  timestamp: string;
  id: number | null;
}

export interface UnresolvedSite extends SitePayload {
  decision: DecisionRecord | null;
}

export interface UnresolvedPayload {
  callsites: UnresolvedSite[];
  progress: { total: number; decided: number };
}

export interface CandidatePayload extends SitePayload {
  score: number;
}

export interface CandidatesResponse {
  callsite: SitePayload;
  candidates: CandidatePayload[];
  total_candidates: number;
}

export type Verdict = 'accepted' | 'rejected' | 'skipped';

export interface DecisionRequest {
  callsite: number;
  callee: number | null;
  verdict: Verdict;
  analyst: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;
