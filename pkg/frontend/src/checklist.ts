// Renders an objective report as a pass/fail checklist. The report is
// produced by the grader and displayed verbatim; nothing is re-evaluated
// in the browser.

import type { ObjectiveReport } from "./types";

function esc(text: string): string {
  const div = document.createElement("div");
  div.textContent = text;
  return div.innerHTML;
}

export function renderChecklist(root: HTMLElement, report: ObjectiveReport | null): void {
  if (report === null) {
    root.innerHTML = `<p class="checklist-empty">No objective report loaded.
      Grade an episode with the eval-objective command and load the JSON here.</p>`;
    return;
  }
  const items = report.requirements
    .map((r) => {
      const step = r.step === null ? "" : `<span class="step">t=${r.step}</span>`;
      return `<li class="${r.passed ? "pass" : "fail"}" data-req="${esc(r.id)}">
        <span class="mark">${r.passed ? "✓" : "✗"}</span>
        <span class="req-id">${esc(r.id)}</span>
        <span class="req-kind">${esc(r.kind)}</span>
        ${step}
        <span class="detail">${esc(r.detail)}</span>
      </li>`;
    })
    .join("\n");
  root.innerHTML = `
    <div class="checklist-head ${report.passed ? "pass" : "fail"}">
      <strong>${esc(report.name)}</strong>
      <span class="score">${report.passedCount}/${report.total}</span>
    </div>
    <ul class="checklist">${items}</ul>`;
}
