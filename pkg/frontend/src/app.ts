// Imperative shell: routes clicks to API calls and re-renders sections.

import { getLineage, getMetrics, getRun, getTuples, listRuns } from "./api.js";
import { LabelingFlow } from "./labeling.js";
import {
  renderLabeling,
  renderLineagePanel,
  renderRunDetail,
  renderRunsPage,
  renderTuples,
} from "./views.js";

interface AppState {
  runId: string | null;
  flow: LabelingFlow | null;
}

export function mountApp(root: HTMLElement): void {
  const state: AppState = { runId: null, flow: null };

  const rerenderRuns = async () => {
    state.runId = null;
    state.flow = null;
    root.innerHTML = renderRunsPage(await listRuns());
  };

  const openRun = async (runId: string) => {
    state.runId = runId;
    const [record, metrics] = await Promise.all([getRun(runId), getMetrics(runId)]);
    root.innerHTML = renderRunDetail(record, metrics);
  };

  const drilldown = () => root.querySelector("#drilldown") as HTMLElement | null;

  root.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("[data-action]");
    if (!target) {
      return;
    }
    event.preventDefault();
    const action = target.getAttribute("data-action")!;
    void handle(action, target as HTMLElement).catch((err) => {
      const panel = drilldown() ?? root;
      panel.innerHTML = `<p class="error">${String(err)}</p>`;
    });
  });

  async function handle(action: string, el: HTMLElement): Promise<void> {
    switch (action) {
      case "home":
        return rerenderRuns();
      case "open-run":
        return openRun(el.dataset.run!);
      case "show-tuples":
      case "show-flagged": {
        const flaggedOnly = action === "show-flagged";
        const rows = await getTuples(state.runId!, flaggedOnly ? true : undefined);
        drilldown()!.innerHTML = renderTuples(rows, flaggedOnly);
        return;
      }
      case "lineage": {
        const tree = await getLineage(el.dataset.tuple!, state.runId!);
        const panel = root.querySelector("#lineage") ?? drilldown()!;
        panel.innerHTML = renderLineagePanel(tree);
        return;
      }
      case "start-labeling": {
        state.flow = new LabelingFlow(state.runId!);
        drilldown()!.innerHTML = renderLabeling(await state.flow.start());
        return;
      }
      case "reveal-predicted":
        drilldown()!.innerHTML = renderLabeling(state.flow!.reveal());
        return;
      case "label-satisfied":
      case "label-violated":
        drilldown()!.innerHTML = renderLabeling(
          await state.flow!.submit(action === "label-satisfied"),
        );
        return;
      case "labeling-finished":
        return openRun(state.runId!);
      default:
        throw new Error(`unknown action ${action}`);
    }
  }

  void rerenderRuns().catch((err) => {
    root.innerHTML = `<p class="error">cannot reach the engine API: ${String(err)}</p>`;
  });
}
