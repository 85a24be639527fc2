import { describe, expect, it } from "vitest";

import { actionForKey, shortcutLegend } from "../src/keyboard.js";
import { ENTITY_TYPES } from "../src/types.js";

describe("keyboard shortcuts", () => {
  it("maps digits 1-9 to the nine types in display order", () => {
    ENTITY_TYPES.forEach((code, i) => {
      const action = actionForKey(String(i + 1));
      expect(action).toEqual({
        kind: "select",
        selection: { decision: "entity", entityType: code },
      });
    });
  });

  it("maps 0 to non-entity", () => {
    expect(actionForKey("0")).toEqual({
      kind: "select",
      selection: { decision: "non-entity" },
    });
  });

  it("maps Enter to submit and n to next", () => {
    expect(actionForKey("Enter")).toEqual({ kind: "submit" });
    expect(actionForKey("n")).toEqual({ kind: "next" });
  });

  it("ignores anything else", () => {
    for (const key of ["a", "Escape", " ", "F1", "-"]) {
      expect(actionForKey(key)).toEqual({ kind: "none" });
    }
  });

  it("legend covers all nine types plus non-entity and submit", () => {
    const legend = shortcutLegend();
    expect(legend).toHaveLength(11);
    expect(legend.map((l) => l.label)).toContain("non-entity");
  });
});
