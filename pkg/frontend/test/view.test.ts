import { describe, expect, it } from "vitest";

import { imageToScreen, initialView, panBy, screenToImage, zoomAt } from "../src/view.js";

describe("view math", () => {
  it("screen/image round trip is exact at any zoom and pan", () => {
    let view = initialView();
    view = zoomAt(view, 3.7, 211, 140, 10, 20);
    view = panBy(view, -55, 33);
    view = zoomAt(view, 0.4, 80, 95, 10, 20);
    const [u, v] = screenToImage(view, 321, 222, 10, 20);
    const [x, y] = imageToScreen(view, u, v, 10, 20);
    expect(x).toBeCloseTo(321, 9);
    expect(y).toBeCloseTo(222, 9);
  });

  it("pick coordinates are full-resolution pixels regardless of zoom", () => {
    // the same screen position maps to the same image pixel before and after
    // zooming around that position
    const paneLeft = 5;
    const paneTop = 7;
    const cursor: [number, number] = [150, 90];
    let view = initialView();
    const before = screenToImage(view, cursor[0], cursor[1], paneLeft, paneTop);
    view = zoomAt(view, 8, cursor[0], cursor[1], paneLeft, paneTop);
    const after = screenToImage(view, cursor[0], cursor[1], paneLeft, paneTop);
    expect(after[0]).toBeCloseTo(before[0], 9);
    expect(after[1]).toBeCloseTo(before[1], 9);
  });

  it("zoomAt keeps the cursor-anchored image point fixed", () => {
    let view = initialView();
    view = panBy(view, 12, -4);
    const anchor = screenToImage(view, 60, 40, 0, 0);
    view = zoomAt(view, 2.5, 60, 40, 0, 0);
    const [sx, sy] = imageToScreen(view, anchor[0], anchor[1], 0, 0);
    expect(sx).toBeCloseTo(60, 9);
    expect(sy).toBeCloseTo(40, 9);
  });

  it("panBy shifts the view without rescaling", () => {
    let view = initialView();
    view = zoomAt(view, 2, 0, 0, 0, 0);
    const panned = panBy(view, 10, 20);
    expect(panned.zoom).toBe(view.zoom);
    const [u0] = screenToImage(view, 100, 100, 0, 0);
    const [u1] = screenToImage(panned, 110, 120, 0, 0);
    expect(u1).toBeCloseTo(u0, 9);
  });
});
