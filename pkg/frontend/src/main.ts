// Browser entry point.
//
// Configuration comes from the page URL: ?service=<url>&vars=<id,id,...>
// with optional globals SUBSETPRIV_SERVICE_URL and SUBSETPRIV_PUBLISHED
// (a {label: probability} map enabling the privacy badge).

import { createClient } from "./api.js";
import { runSurveyFlow } from "./flow.js";
import type { PublishedEstimate } from "./privacy.js";
import { SurveyUI } from "./ui.js";

declare global {
  interface Window {
    SUBSETPRIV_SERVICE_URL?: string;
    SUBSETPRIV_PUBLISHED?: PublishedEstimate;
  }
}

export async function start(root: HTMLElement): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const serviceUrl =
    params.get("service") ?? window.SUBSETPRIV_SERVICE_URL ?? "http://127.0.0.1:8000";
  const variableIds = (params.get("vars") ?? "").split(",").filter(Boolean);
  if (variableIds.length === 0) {
    root.textContent = "No variables requested: add ?vars=<id> to the URL.";
    return;
  }
  const ui = new SurveyUI(root);
  const client = createClient(serviceUrl);
  try {
    await runSurveyFlow(client, variableIds, ui, {
      publishedEstimate: window.SUBSETPRIV_PUBLISHED ?? null,
    });
    const done = document.createElement("p");
    done.textContent = "All questions answered. Thank you!";
    root.append(done);
  } catch (error) {
    const failed = document.createElement("p");
    failed.textContent = `Survey not completed: ${(error as Error).message}`;
    root.append(failed);
  }
}

const mount = document.getElementById("survey");
if (mount) {
  void start(mount);
}
