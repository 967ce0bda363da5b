// Training dashboard: start or cancel a job on the selected model/track,
// stream its episodes into a table, and plot the reward curve. Rewards in
// the table come straight off the event stream; the chart refreshes from
// get_reward_curve so it always shows the server's full history.

import { api, ApiError } from "./api";
import { drawCurve } from "./chart";
import { EpisodeLog } from "./episodes";
import { subscribeJob } from "./events";
import type { Session } from "./session";

export function mountDashboard(root: HTMLElement, session: Session): void {
  root.innerHTML = `
    <div class="editor-bar">
      <label>episodes <input id="db-episodes" type="number" value="10" min="1" style="width:5em" /></label>
      <label>seed <input id="db-seed" type="number" value="0" style="width:5em" /></label>
      <button id="db-start">start training</button>
      <button id="db-cancel" disabled>cancel</button>
      <span id="db-state" class="badge"></span>
    </div>
    <div class="dash-split">
      <table class="episodes">
        <thead><tr><th>#</th><th>episode</th><th>reward</th><th>outcome</th><th>steps</th></tr></thead>
        <tbody id="db-rows"></tbody>
      </table>
      <canvas id="db-chart" width="360" height="220"></canvas>
    </div>
    <div id="db-status" class="status"></div>
  `;

  const startBtn = root.querySelector("#db-start") as HTMLButtonElement;
  const cancelBtn = root.querySelector("#db-cancel") as HTMLButtonElement;
  const stateBadge = root.querySelector("#db-state") as HTMLSpanElement;
  const rowsBody = root.querySelector("#db-rows") as HTMLTableSectionElement;
  const chart = root.querySelector("#db-chart") as HTMLCanvasElement;
  const status = root.querySelector("#db-status") as HTMLDivElement;

  let log = new EpisodeLog();
  let job: string | null = null;
  let unsubscribe: (() => void) | null = null;

  function renderRows(): void {
    rowsBody.innerHTML = log
      .rows()
      .map(
        (r) => `<tr>
          <td>${r.ordinal}</td>
          <td class="mono">${r.episodeId}</td>
          <td class="num">${r.totalReward.toFixed(1)}</td>
          <td>${r.outcome}</td>
          <td class="num">${r.steps}</td>
        </tr>`,
      )
      .join("");
    stateBadge.textContent = job ? `${log.state} ${log.rows().length}/${log.episodesRequested}` : "";
    stateBadge.className = `badge ${log.state}`;
  }

  async function refreshChart(): Promise<void> {
    if (!session.model || !session.track) return;
    try {
      const curve = await api.getRewardCurve(session.model.modelId, session.track.id);
      drawCurve(chart, curve.points);
    } catch {
      // model/track may have no episodes yet; leave the chart blank
    }
  }

  startBtn.onclick = async () => {
    if (!session.model || !session.track) {
      status.textContent = "pick a model and a track first";
      return;
    }
    const episodes = Number((root.querySelector("#db-episodes") as HTMLInputElement).value);
    const seed = Number((root.querySelector("#db-seed") as HTMLInputElement).value);
    status.textContent = "";
    try {
      const res = await api.startTraining(session.model.modelId, session.track.id, episodes, seed);
      job = res.job;
      session.job = job;
      log = new EpisodeLog();
      renderRows();
      cancelBtn.disabled = false;
      startBtn.disabled = true;
      unsubscribe?.();
      unsubscribe = subscribeJob(job, (ev) => {
        if (!log.apply(ev)) return; // replayed duplicate, nothing new
        renderRows();
        if (log.terminal()) {
          cancelBtn.disabled = true;
          startBtn.disabled = false;
          if (log.failureMessage) status.textContent = `job failed: ${log.failureMessage}`;
          void refreshChart();
          void session.refreshModel();
        }
      });
    } catch (e) {
      status.textContent = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e);
    }
  };

  cancelBtn.onclick = async () => {
    if (!job) return;
    try {
      await api.cancelTraining(job);
    } catch (e) {
      status.textContent = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e);
    }
  };

  renderRows();
  void refreshChart();
}
