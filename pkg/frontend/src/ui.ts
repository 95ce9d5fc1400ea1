// DOM renderer for the survey flow.
//
// The respondent only ever sees two native buttons (keyboard operable
// with Tab / Enter / Space); there is deliberately no input control
// anywhere that could accept the raw value.

import type { CompletedResponse, QuestionView, RespondentIO } from "./flow.js";

export interface SurveyUIOptions {
  variableNames?: Record<string, string>;
}

export class SurveyUI implements RespondentIO {
  private readonly root: HTMLElement;
  private readonly names: Record<string, string>;

  constructor(root: HTMLElement, options: SurveyUIOptions = {}) {
    this.root = root;
    this.names = options.variableNames ?? {};
  }

  private clear(): void {
    this.root.replaceChildren();
  }

  private heading(text: string): void {
    const h = document.createElement("h2");
    h.textContent = text;
    this.root.append(h);
  }

  private twoButtons(
    yesText: string,
    noText: string,
    resolve: (choice: boolean) => void,
  ): void {
    const row = document.createElement("div");
    row.className = "choices";
    const yes = document.createElement("button");
    yes.type = "button";
    yes.textContent = yesText;
    yes.addEventListener("click", () => resolve(true));
    const no = document.createElement("button");
    no.type = "button";
    no.textContent = noText;
    no.addEventListener("click", () => resolve(false));
    row.append(yes, no);
    this.root.append(row);
    yes.focus();
  }

  askMembership(view: QuestionView): Promise<boolean> {
    return new Promise((resolve) => {
      this.clear();
      const name = this.names[view.variableId] ?? view.variableId;
      this.heading(`About ${name}`);
      const prompt = document.createElement("p");
      prompt.textContent = "Is your value one of the following?";
      this.root.append(prompt);
      const list = document.createElement("ul");
      for (const label of view.labels) {
        const item = document.createElement("li");
        item.textContent = label;
        list.append(item);
      }
      this.root.append(list);
      this.twoButtons("Yes", "No", resolve);
    });
  }

  showResult(result: CompletedResponse): void {
    this.clear();
    this.heading("Recorded");
    const text = document.createElement("p");
    text.textContent =
      "Only this group of options was stored — never your exact value:";
    this.root.append(text);
    const list = document.createElement("ul");
    for (const label of result.storedSubset) {
      const item = document.createElement("li");
      item.textContent = label;
      list.append(item);
    }
    this.root.append(list);
    if (result.sizeLeakage !== null) {
      const badge = document.createElement("p");
      badge.className = "privacy-badge";
      const covered = (100 * (1 - result.sizeLeakage)).toFixed(1);
      badge.textContent =
        `This record is shared with about ${covered}% of the population ` +
        `(leakage ${result.sizeLeakage.toFixed(3)}).`;
      this.root.append(badge);
    }
  }

  confirmRetry(error: Error): Promise<boolean> {
    return new Promise((resolve) => {
      this.clear();
      this.heading("Connection problem");
      const text = document.createElement("p");
      text.textContent = `${error.message} — nothing was recorded. Try again?`;
      this.root.append(text);
      this.twoButtons("Retry", "Cancel", resolve);
    });
  }
}
