import { ApiClient } from "./api.js";
import { Dashboard } from "./dashboard.js";
import { ReviewSession } from "./reviewFlow.js";
import {
  renderCandidateCard,
  renderDashboard,
  renderDrainedPrompt,
  renderProgressBar,
} from "./render.js";

const RETRY_DELAY_MS = 2000;
const DASHBOARD_POLL_MS = 5000;

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get("annotator") ?? "anonymous";
  const api = new ApiClient("", annotator);
  const dashboard = new Dashboard(api);

  const session = new ReviewSession(api, { onChange: render });

  function render(): void {
    if (!root) return;
    const parts: string[] = [];
    if (session.progress) {
      parts.push(renderProgressBar(session.progress));
    }
    switch (session.state.kind) {
      case "reviewing":
        parts.push(renderCandidateCard(session.state.candidate, session.state.selection));
        break;
      case "drained":
        parts.push(renderDrainedPrompt());
        break;
      case "retrying":
        parts.push(`<p class="banner retry">connection lost; retrying your decision</p>`);
        break;
      case "stopped":
        parts.push(`<p class="banner stopped">loop finished (${session.state.reason ?? ""})</p>`);
        break;
      default:
        parts.push(`<p class="loading">loading</p>`);
    }
    parts.push(renderDashboard(dashboard.progress, dashboard.metrics, dashboard.stale));
    root.innerHTML = parts.join("\n");
    const advance = root.querySelector("button.advance");
    advance?.addEventListener("click", () => void session.advanceRound());
    const submit = root.querySelector("button.submit");
    submit?.addEventListener("click", () => void session.submit());
  }

  document.addEventListener("keydown", (event) => {
    void session.handleKey(event.key);
  });
  setInterval(() => {
    void session.retryPending();
  }, RETRY_DELAY_MS);
  setInterval(() => {
    void dashboard.refresh().then(render);
  }, DASHBOARD_POLL_MS);

  void dashboard.refresh().then(render);
  void session.next();
}

if (typeof document !== "undefined") {
  bootstrap();
}
