// @vitest-environment happy-dom
import { describe, expect, it } from "vitest";

import { SurveyUI } from "../src/ui.js";

function mount(): HTMLElement {
  const root = document.createElement("main");
  document.body.replaceChildren(root);
  return root;
}

describe("SurveyUI question screen", () => {
  it("renders the served labels and exactly two buttons", () => {
    const root = mount();
    const ui = new SurveyUI(root);
    void ui.askMembership({ variableId: "color", labels: ["red", "blue"] });
    const items = [...root.querySelectorAll("li")].map((li) => li.textContent);
    expect(items).toEqual(["red", "blue"]);
    const buttons = root.querySelectorAll("button");
    expect(buttons).toHaveLength(2);
    expect([...buttons].map((b) => b.textContent)).toEqual(["Yes", "No"]);
  });

  it("never renders an input control for the raw value", () => {
    const root = mount();
    const ui = new SurveyUI(root);
    void ui.askMembership({ variableId: "color", labels: ["red", "blue"] });
    expect(root.querySelectorAll("input, select, textarea")).toHaveLength(0);
  });

  it("is keyboard operable: native buttons, first focused", () => {
    const root = mount();
    const ui = new SurveyUI(root);
    void ui.askMembership({ variableId: "color", labels: ["red", "blue"] });
    const [yes, no] = [...root.querySelectorAll("button")];
    expect(yes.tagName).toBe("BUTTON");
    expect(no.tagName).toBe("BUTTON");
    expect(document.activeElement).toBe(yes);
    // native buttons activate on Enter/Space via click semantics
    expect(yes.type).toBe("button");
  });

  it("resolves true on yes and false on no", async () => {
    const root = mount();
    const ui = new SurveyUI(root);
    const first = ui.askMembership({ variableId: "color", labels: ["red"] });
    (root.querySelectorAll("button")[0] as HTMLButtonElement).click();
    expect(await first).toBe(true);

    const second = ui.askMembership({ variableId: "color", labels: ["red"] });
    (root.querySelectorAll("button")[1] as HTMLButtonElement).click();
    expect(await second).toBe(false);
  });
});

describe("SurveyUI result screen", () => {
  it("shows the stored subset", () => {
    const root = mount();
    const ui = new SurveyUI(root);
    ui.showResult({ variableId: "color", storedSubset: ["green", "black"], sizeLeakage: null });
    const items = [...root.querySelectorAll("li")].map((li) => li.textContent);
    expect(items).toEqual(["green", "black"]);
    expect(root.querySelector(".privacy-badge")).toBeNull();
  });

  it("shows the privacy badge when leakage is known", () => {
    const root = mount();
    const ui = new SurveyUI(root);
    ui.showResult({ variableId: "color", storedSubset: ["red", "blue"], sizeLeakage: 0.4 });
    const badge = root.querySelector(".privacy-badge");
    expect(badge?.textContent).toContain("60.0%");
  });
});

describe("SurveyUI retry screen", () => {
  it("offers retry and cancel", async () => {
    const root = mount();
    const ui = new SurveyUI(root);
    const choice = ui.confirmRetry(new Error("boom"));
    const buttons = [...root.querySelectorAll("button")];
    expect(buttons.map((b) => b.textContent)).toEqual(["Retry", "Cancel"]);
    (buttons[1] as HTMLButtonElement).click();
    expect(await choice).toBe(false);
  });
});
