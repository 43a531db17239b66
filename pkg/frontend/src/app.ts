/**
 * Triage application: wires the API client, offline queue, view state and
 * renderers together, exposing the keyboard review workflow.
 *
 * Keys: j/k move through candidates, n/p move through call sites,
 * a accept the selected candidate, r reject all, s skip, 1-9 pick by rank.
 */

import { TriageApi } from './api.js';
import { DecisionQueue, type StorageLike } from './queue.js';
import { renderCandidates, renderExcerpt, renderProgress, renderSiteList } from './render.js';
import { ViewState } from './state.js';
import type { CandidatePayload, FetchLike, Verdict } from './types.js';

export interface AppOptions {
  baseUrl: string;
  analyst: string;
  topK?: number;
  fetchImpl?: FetchLike;
  storage?: StorageLike;
  retryMs?: number;
}

export class TriageApp {
  readonly api: TriageApi;
  readonly queue: DecisionQueue;
  readonly state = new ViewState();
  private candidates: CandidatePayload[] = [];
  private online = true;
  private topK: number;
  private analyst: string;
  private retryMs: number;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private root: HTMLElement,
    options: AppOptions
  ) {
    this.api = new TriageApi(options.baseUrl, options.fetchImpl);
    const storage = options.storage ?? window.localStorage;
    this.queue = new DecisionQueue(this.api, storage);
    this.topK = options.topK ?? 20;
    this.analyst = options.analyst;
    this.retryMs = options.retryMs ?? 3000;
    this.queue.onChange = () => this.renderHeader();
  }

  /** Fetch server state and render; safe to call again after reload. */
  async start(): Promise<void> {
    this.mount();
    await this.queue.flush();
    await this.refresh();
    this.state.firstUndecided();
    await this.loadCandidates();
    this.renderAll();
  }

  private mount(): void {
    this.root.replaceChildren();
    const header = document.createElement('header');
    header.id = 'header';
    const main = document.createElement('main');
    const sites = document.createElement('ul');
    sites.id = 'sites';
    const detail = document.createElement('section');
    detail.id = 'detail';
    const caller = document.createElement('div');
    caller.id = 'caller';
    const candidates = document.createElement('div');
    candidates.id = 'candidates';
    detail.append(caller, candidates);
    main.append(sites, detail);
    this.root.append(header, main);
    this.root.ownerDocument.addEventListener('keydown', this.onKey);
  }

  async refresh(): Promise<void> {
    try {
      this.state.applyUnresolved(await this.api.unresolved());
      this.setOnline(true);
    } catch {
      this.setOnline(false);
    }
  }

  private setOnline(online: boolean): void {
    this.online = online;
    if (!online && this.retryTimer === null) {
      this.retryTimer = setTimeout(() => {
        this.retryTimer = null;
        void this.reconnect();
      }, this.retryMs);
    }
    this.renderHeader();
  }

  async reconnect(): Promise<void> {
    const delivered = await this.queue.flush();
    await this.refresh();
    if (!this.online) return;
    if (delivered > 0 || this.candidates.length === 0) {
      await this.loadCandidates();
    }
    this.renderAll();
  }

  async loadCandidates(): Promise<void> {
    const site = this.state.current();
    if (site === null) {
      this.candidates = [];
      return;
    }
    try {
      const payload = await this.api.candidates(site.id, this.topK);
      this.candidates = payload.candidates;
      this.setOnline(true);
    } catch {
      this.candidates = [];
      this.setOnline(false);
    }
  }

  /** Accept/reject/skip the current call site; POSTs immediately. */
  async decide(verdict: Verdict, callee: number | null): Promise<void> {
    const site = this.state.current();
    if (site === null) return;
    const delivered = await this.queue
      .submit({ callsite: site.id, callee, verdict, analyst: this.analyst })
      .catch(() => false);
    this.state.markDecided(site.id, verdict, callee);
    if (!delivered) this.setOnline(false);
    this.state.next();
    await this.loadCandidates();
    this.renderAll();
  }

  private onKey = (event: KeyboardEvent): void => {
    if (event.target instanceof HTMLInputElement) return;
    const key = event.key;
    if (key === 'j') this.state.moveSelection(1, this.candidates.length);
    else if (key === 'k') this.state.moveSelection(-1, this.candidates.length);
    else if (key === 'n') void this.advance(1);
    else if (key === 'p') void this.advance(-1);
    else if (key === 'a') {
      const candidate = this.candidates[this.state.selectedCandidate];
      if (candidate) void this.decide('accepted', candidate.id);
    } else if (key === 'r') void this.decide('rejected', null);
    else if (key === 's') void this.decide('skipped', null);
    else if (/^[1-9]$/.test(key)) {
      const index = Number(key) - 1;
      if (index < this.candidates.length) this.state.selectedCandidate = index;
    } else {
      return;
    }
    this.renderAll();
  };

  private async advance(delta: number): Promise<void> {
    if (delta > 0) this.state.next();
    else this.state.previous();
    await this.loadCandidates();
    this.renderAll();
  }

  renderAll(): void {
    this.renderHeader();
    const sitesEl = this.root.querySelector('#sites') as HTMLElement;
    const callerEl = this.root.querySelector('#caller') as HTMLElement;
    const candidatesEl = this.root.querySelector('#candidates') as HTMLElement;
    if (!sitesEl || !callerEl || !candidatesEl) return;
    renderSiteList(sitesEl, this.state.visibleSites(), this.state.cursor, (index) => {
      this.state.cursor = index;
      this.state.selectedCandidate = 0;
      void this.loadCandidates().then(() => this.renderAll());
    });
    callerEl.replaceChildren();
    const site = this.state.current();
    if (site !== null) {
      const title = document.createElement('h2');
      title.textContent = `${site.file}:${site.start}`;
      callerEl.append(title, renderExcerpt(site));
    }
    renderCandidates(candidatesEl, this.candidates, this.state.selectedCandidate, (candidate) =>
      void this.decide('accepted', candidate.id)
    );
  }

  private renderHeader(): void {
    const header = this.root.querySelector('#header') as HTMLElement | null;
    if (header) {
      renderProgress(header, this.state.progress, this.queue.pendingCount, this.online);
    }
  }
}
