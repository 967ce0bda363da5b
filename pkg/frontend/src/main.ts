import "./style.css";
import { api, ApiError } from "./api";
import { Session } from "./session";
import { mountDashboard } from "./dashboard";
import { mountReplay } from "./replay";
import { mountScriptPanel } from "./scriptPanel";
import { mountTrackEditor } from "./trackEditor";

const app = document.getElementById("app") as HTMLDivElement;
app.innerHTML = `
  <header>
    <h1>ottodrive</h1>
    <label>model <select id="model-select"></select></label>
    <button id="model-new">new model</button>
    <label>track <select id="track-select"></select></label>
    <span id="model-info"></span>
  </header>
  <nav id="tabs">
    <button data-panel="tracks" class="active">tracks</button>
    <button data-panel="training">training</button>
    <button data-panel="replay">replay</button>
    <button data-panel="script">script</button>
  </nav>
  <main>
    <section id="panel-tracks"></section>
    <section id="panel-training" hidden></section>
    <section id="panel-replay" hidden></section>
    <section id="panel-script" hidden></section>
  </main>
  <div id="app-status" class="status"></div>
`;

const session = new Session();
const modelSelect = document.getElementById("model-select") as HTMLSelectElement;
const trackSelect = document.getElementById("track-select") as HTMLSelectElement;
const modelInfo = document.getElementById("model-info") as HTMLSpanElement;
const appStatus = document.getElementById("app-status") as HTMLDivElement;

async function refreshPickers(): Promise<void> {
  try {
    const [{ models }, { tracks }] = await Promise.all([api.listModels(), api.listTracks()]);
    modelSelect.innerHTML = models
      .map((m) => `<option value="${m.modelId}">${m.name} (${m.modelId})</option>`)
      .join("");
    trackSelect.innerHTML = tracks
      .map((t) => `<option value="${t.id}">${t.name} (${t.id})</option>`)
      .join("");
    if (models.length > 0) {
      const keep = models.find((m) => m.modelId === session.model?.modelId);
      session.model = keep ?? models[0];
      modelSelect.value = session.model.modelId;
    }
    if (tracks.length > 0) {
      const keep = tracks.find((t) => t.id === session.track?.id);
      session.track = keep ?? tracks[0];
      trackSelect.value = session.track.id;
    }
    updateInfo();
    session.notify();
  } catch (e) {
    appStatus.textContent =
      e instanceof ApiError ? `${e.code}: ${e.message}` : `server unreachable: ${e}`;
  }
}

function updateInfo(): void {
  modelInfo.textContent = session.model
    ? `trained episodes: ${session.model.trainedEpisodes}`
    : "";
}

session.onChange(updateInfo);

modelSelect.onchange = async () => {
  session.model = (await api.getModel(modelSelect.value)) ?? null;
  session.notify();
};

trackSelect.onchange = async () => {
  session.track = (await api.getTrack(trackSelect.value)).track;
  session.notify();
};

(document.getElementById("model-new") as HTMLButtonElement).onclick = async () => {
  const name = prompt("model name?", "pilot");
  if (!name) return;
  try {
    session.model = await api.createModel(name);
    await refreshPickers();
  } catch (e) {
    appStatus.textContent = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e);
  }
};

document.querySelectorAll<HTMLButtonElement>("#tabs button").forEach((btn) => {
  btn.onclick = () => {
    document.querySelectorAll("#tabs button").forEach((b) => b.classList.remove("active"));
    btn.classList.add("active");
    document.querySelectorAll<HTMLElement>("main section").forEach((s) => {
      s.hidden = s.id !== `panel-${btn.dataset.panel}`;
    });
  };
});

mountTrackEditor(document.getElementById("panel-tracks") as HTMLElement, () => {
  void refreshPickers();
});
mountDashboard(document.getElementById("panel-training") as HTMLElement, session);
mountReplay(document.getElementById("panel-replay") as HTMLElement, session);
mountScriptPanel(document.getElementById("panel-script") as HTMLElement, session);

void refreshPickers();
