import { shortcutLegend } from "./keyboard.js";
import type { CandidatePayload, MetricsReply, Progress, Selection } from "./types.js";

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** Document text with the candidate span wrapped in a <mark>. */
export function renderHighlightedText(candidate: CandidatePayload): string {
  const before = escapeHtml(candidate.text.slice(0, candidate.char_start));
  const span = escapeHtml(candidate.text.slice(candidate.char_start, candidate.char_end));
  const after = escapeHtml(candidate.text.slice(candidate.char_end));
  return `${before}<mark class="candidate">${span}</mark>${after}`;
}

export function renderCandidateCard(
  candidate: CandidatePayload,
  selection: Selection | null,
): string {
  const confidence =
    candidate.classifier_confidence === null
      ? "n/a"
      : candidate.classifier_confidence.toFixed(3);
  const picked =
    selection === null
      ? "none"
      : selection.decision === "entity"
        ? selection.entityType
        : "non-entity";
  const legend = shortcutLegend()
    .map((item) => `<kbd>${item.key}</kbd> ${escapeHtml(item.label)}`)
    .join(" ");
  const submitAttr = selection === null ? " disabled" : "";
  return [
    `<article class="candidate-card" data-candidate="${escapeHtml(candidate.candidate_id)}" data-version="${candidate.version}">`,
    `<p class="doc-text">${renderHighlightedText(candidate)}</p>`,
    `<dl class="scores">`,
    `<dt>surface</dt><dd>${escapeHtml(candidate.surface)}</dd>`,
    `<dt>classifier</dt><dd>${confidence}</dd>`,
    `<dt>provider</dt><dd>${candidate.provider_score.toFixed(3)}</dd>`,
    `</dl>`,
    `<p class="selection">selected: <strong>${escapeHtml(picked)}</strong></p>`,
    `<p class="legend">${legend}</p>`,
    `<button class="submit"${submitAttr}>submit</button>`,
    `</article>`,
  ].join("\n");
}

export function renderProgressBar(progress: Progress): string {
  const done = progress.labeled;
  const total = progress.labeled + progress.queued;
  const percent = total === 0 ? 100 : Math.round((100 * done) / total);
  return [
    `<div class="progress" role="progressbar" aria-valuenow="${percent}">`,
    `<span class="bar" style="width:${percent}%"></span>`,
    `<span class="text">round ${progress.round}: ${done}/${total} labeled</span>`,
    `</div>`,
  ].join("");
}

export function renderDrainedPrompt(): string {
  return [
    `<div class="drained">`,
    `<p>queue drained, advance round?</p>`,
    `<button class="advance">advance</button>`,
    `</div>`,
  ].join("");
}

/** Dashboard panel: loop counters, per-type dictionary sizes, metrics. */
export function renderDashboard(
  progress: Progress | null,
  metrics: MetricsReply | null,
  stale: boolean,
): string {
  const parts: string[] = [`<section class="dashboard">`];
  if (stale) {
    parts.push(`<p class="banner stale">service unreachable; showing stale data</p>`);
  }
  if (progress === null) {
    parts.push(`<p class="empty">no data yet</p></section>`);
    return parts.join("\n");
  }
  parts.push(
    `<ul class="counters">`,
    `<li>round <strong>${progress.round}</strong></li>`,
    `<li>pool <strong>${progress.pool}</strong></li>`,
    `<li>queued <strong>${progress.queued}</strong></li>`,
    `<li>labeled <strong>${progress.labeled}</strong></li>`,
    `<li>dictionary <strong>${progress.dict_size}</strong></li>`,
    `</ul>`,
  );
  const rows = Object.entries(progress.dict_counts)
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([code, count]) => `<tr><td>${escapeHtml(code)}</td><td>${count}</td></tr>`)
    .join("");
  parts.push(`<table class="dict-counts"><tbody>${rows}</tbody></table>`);
  if (progress.stopped) {
    parts.push(`<p class="banner stopped">loop stopped: ${escapeHtml(progress.stop_reason ?? "")}</p>`);
  }
  if (metrics?.available && metrics.report) {
    parts.push(
      `<p class="metrics">recall ${metrics.report.overall_recall.toFixed(3)}, ` +
        `macro-F1 ${metrics.report.macro_f1.toFixed(3)}</p>`,
    );
  } else {
    parts.push(`<p class="metrics empty">no evaluation configured</p>`);
  }
  parts.push(`</section>`);
  return parts.join("\n");
}
