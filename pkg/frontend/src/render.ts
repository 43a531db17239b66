/**
 * Plain-DOM rendering. Excerpts are text with the call/definition span
 * highlighted; candidate cards carry a score bar so confidence separation is
 * visible at a glance. No framework, no virtual DOM: the view is small.
 */

import type { CandidatePayload, SitePayload, UnresolvedSite } from './types.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderExcerpt(site: SitePayload): HTMLElement {
  const pre = el('pre', 'excerpt');
  if (site.excerpt === null) {
    pre.append(el('span', 'muted', '(no source available)'));
    return pre;
  }
  const [hlStart, hlEnd] = site.excerpt_highlight ?? [0, 0];
  pre.append(document.createTextNode(site.excerpt.slice(0, hlStart)));
  pre.append(el('mark', 'span-highlight', site.excerpt.slice(hlStart, hlEnd)));
  pre.append(document.createTextNode(site.excerpt.slice(hlEnd)));
  return pre;
}

export function renderSiteList(
  container: HTMLElement,
  sites: UnresolvedSite[],
  cursor: number,
  onPick: (index: number) => void
): void {
  container.replaceChildren();
  sites.forEach((site, index) => {
    const item = el('li', index === cursor ? 'site current' : 'site');
    item.dataset.siteId = String(site.id);
    const status =
      site.decision === null ? '·' : { accepted: '✓', rejected: '✗', skipped: '→' }[site.decision.verdict];
    item.append(el('span', `status ${site.decision?.verdict ?? 'open'}`, status));
    item.append(el('span', 'loc', `${site.file ?? '?'}:${site.start}`));
    item.addEventListener('click', () => onPick(index));
    container.append(item);
  });
  if (sites.length === 0) {
    container.append(el('li', 'empty-state', 'All call sites resolved.'));
  }
}

export function renderCandidates(
  container: HTMLElement,
  candidates: CandidatePayload[],
  selected: number,
  onAccept: (candidate: CandidatePayload) => void
): void {
  container.replaceChildren();
  candidates.forEach((candidate, index) => {
    const card = el('div', index === selected ? 'candidate selected' : 'candidate');
    card.dataset.calleeId = String(candidate.id);
    const header = el('div', 'candidate-header');
    header.append(el('span', 'rank', `#${index}`));
    header.append(el('span', 'loc', `${candidate.file ?? '?'}:${candidate.start}`));
    header.append(el('span', 'score', candidate.score.toFixed(4)));
    const bar = el('div', 'score-bar');
    const fill = el('div', 'score-fill');
    fill.style.width = `${Math.round(candidate.score * 100)}%`;
    bar.append(fill);
    const accept = el('button', 'accept-btn', 'accept');
    accept.addEventListener('click', () => onAccept(candidate));
    card.append(header, bar, renderExcerpt(candidate), accept);
    container.append(card);
  });
  if (candidates.length === 0) {
    container.append(el('div', 'empty-state', 'No candidates.'));
  }
}

export function renderProgress(
  container: HTMLElement,
  progress: { total: number; decided: number },
  pendingCount: number,
  online: boolean
): void {
  container.replaceChildren();
  container.append(
    el('span', 'progress', `${progress.decided} / ${progress.total} decided`)
  );
  if (pendingCount > 0) {
    container.append(el('span', 'pending', `${pendingCount} queued`));
  }
  if (!online) {
    container.append(el('span', 'offline-banner', 'service unreachable — retrying'));
  }
}
