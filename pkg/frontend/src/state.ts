/**
 * View state: current position in the unresolved queue, fetched candidates,
 * and filters. Everything here is derivable from service responses plus the
 * local cursor, so a reload reconstructs the same view from the server.
 */

import type { UnresolvedPayload, UnresolvedSite } from './types.js';

export interface Filters {
  file: string; // substring match on the call site's file, '' = all
  hideDecided: boolean;
}

export class ViewState {
  sites: UnresolvedSite[] = [];
  progress = { total: 0, decided: 0 };
  cursor = 0; // index into visibleSites()
  selectedCandidate = 0;
  filters: Filters = { file: '', hideDecided: false };

  applyUnresolved(payload: UnresolvedPayload): void {
    this.sites = payload.callsites;
    this.progress = payload.progress;
    this.clampCursor();
  }

  visibleSites(): UnresolvedSite[] {
    return this.sites.filter((site) => {
      if (this.filters.file && !(site.file ?? '').includes(this.filters.file)) {
        return false;
      }
      if (this.filters.hideDecided && site.decision !== null) {
        return false;
      }
      return true;
    });
  }

  current(): UnresolvedSite | null {
    const visible = this.visibleSites();
    return visible.length ? visible[this.cursor] : null;
  }

  private clampCursor(): void {
    const count = this.visibleSites().length;
    this.cursor = count === 0 ? 0 : Math.min(this.cursor, count - 1);
    this.selectedCandidate = 0;
  }

  next(): void {
    const count = this.visibleSites().length;
    if (count > 0) this.cursor = (this.cursor + 1) % count;
    this.selectedCandidate = 0;
  }

  previous(): void {
    const count = this.visibleSites().length;
    if (count > 0) this.cursor = (this.cursor - 1 + count) % count;
    this.selectedCandidate = 0;
  }

  /** Jump to the first visible site without a decision, if any. */
  firstUndecided(): void {
    const visible = this.visibleSites();
    const index = visible.findIndex((site) => site.decision === null);
    this.cursor = index >= 0 ? index : 0;
    this.selectedCandidate = 0;
  }

  setFilters(filters: Partial<Filters>): void {
    this.filters = { ...this.filters, ...filters };
    this.clampCursor();
  }

  moveSelection(delta: number, candidateCount: number): void {
    if (candidateCount === 0) return;
    this.selectedCandidate =
      (this.selectedCandidate + delta + candidateCount) % candidateCount;
  }

  /** Record a local echo of a decision so the list updates immediately. */
  markDecided(callsite: number, verdict: 'accepted' | 'rejected' | 'skipped', callee: number | null): void {
    const site = this.sites.find((s) => s.id === callsite);
    if (!site) return;
    const firstDecision = site.decision === null;
    site.decision = {
      callsite,
      callee,
      verdict,
      analyst: '',
      timestamp: '',
      id: null,
    };
    if (firstDecision) this.progress.decided += 1;
  }
}
