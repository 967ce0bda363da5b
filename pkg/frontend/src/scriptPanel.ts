// Script panel: edit a .wps program, run it against the selected model
// and track, and read back diagnostics as clickable line:column markers.
// The objective checklist renders grader reports verbatim; reports come
// from the eval-objective command and are loaded here as JSON.

import { api, ApiError } from "./api";
import { renderChecklist } from "./checklist";
import { formatMarker, markersFor } from "./diagnostics";
import type { Diagnostic, ObjectiveReport } from "./types";
import type { Session } from "./session";

const STARTER = `on start {
  setColor("yellow");
}

at "stop1" {
  honk();
}
`;

export function mountScriptPanel(root: HTMLElement, session: Session): void {
  root.innerHTML = `
    <div class="script-split">
      <div>
        <div class="editor-bar">
          <label>seed <input id="sp-seed" type="number" value="0" style="width:5em" /></label>
          <button id="sp-run">run with program</button>
          <span id="sp-result" class="badge"></span>
        </div>
        <textarea id="sp-source" spellcheck="false" rows="18" cols="60"></textarea>
        <ul id="sp-markers" class="markers"></ul>
      </div>
      <div>
        <div class="editor-bar">
          <button id="sp-load-report">load report…</button>
          <input id="sp-report-file" type="file" accept=".json" hidden />
        </div>
        <div id="sp-checklist"></div>
      </div>
    </div>
    <div id="sp-status" class="status"></div>
  `;

  const source = root.querySelector("#sp-source") as HTMLTextAreaElement;
  const markerList = root.querySelector("#sp-markers") as HTMLUListElement;
  const result = root.querySelector("#sp-result") as HTMLSpanElement;
  const checklistRoot = root.querySelector("#sp-checklist") as HTMLDivElement;
  const status = root.querySelector("#sp-status") as HTMLDivElement;

  source.value = session.editorSource || STARTER;
  source.oninput = () => {
    session.editorSource = source.value;
  };
  renderChecklist(checklistRoot, null);

  function showDiagnostics(diags: Diagnostic[]): void {
    const markers = markersFor(source.value, diags);
    markerList.innerHTML = markers
      .map((m, i) => `<li class="${m.severity}" data-i="${i}">${formatMarker(m)}</li>`)
      .join("");
    markerList.querySelectorAll("li").forEach((li) => {
      li.addEventListener("click", () => {
        const m = markers[Number(li.dataset.i)];
        source.focus();
        source.setSelectionRange(m.from, m.to);
      });
    });
  }

  (root.querySelector("#sp-run") as HTMLButtonElement).onclick = async () => {
    if (!session.model || !session.track) {
      status.textContent = "pick a model and a track first";
      return;
    }
    const seed = Number((root.querySelector("#sp-seed") as HTMLInputElement).value);
    status.textContent = "";
    result.textContent = "running…";
    result.className = "badge";
    try {
      const res = await api.runTest(session.model.modelId, session.track.id, seed, source.value);
      showDiagnostics(res.diagnostics ?? []);
      result.textContent = `${res.outcome} · reward ${res.totalReward.toFixed(1)} · ${res.steps} steps`;
      result.className = "badge done";
    } catch (e) {
      if (e instanceof ApiError) {
        showDiagnostics(e.diagnostics);
        result.textContent = e.code;
        result.className = "badge failed";
        if (e.diagnostics.length === 0) status.textContent = e.message;
      } else {
        result.textContent = "error";
        status.textContent = String(e);
      }
    }
  };

  const fileInput = root.querySelector("#sp-report-file") as HTMLInputElement;
  (root.querySelector("#sp-load-report") as HTMLButtonElement).onclick = () => fileInput.click();
  fileInput.onchange = async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    try {
      const report = JSON.parse(await file.text()) as ObjectiveReport;
      renderChecklist(checklistRoot, report);
      status.textContent = "";
    } catch (e) {
      status.textContent = `bad report file: ${e}`;
    }
  };
}
