// Zoom/pan bookkeeping for an image pane. The pane renders the image inside
// a container with `transform: translate(offsetX, offsetY) scale(zoom)`;
// these helpers convert between screen (client) coordinates and
// full-resolution image pixels, so picks are zoom-independent.

export interface ViewState {
  zoom: number;
  offsetX: number;
  offsetY: number;
}

export function initialView(): ViewState {
  return { zoom: 1, offsetX: 0, offsetY: 0 };
}

export function screenToImage(
  view: ViewState,
  clientX: number,
  clientY: number,
  paneLeft: number,
  paneTop: number,
): [number, number] {
  return [
    (clientX - paneLeft - view.offsetX) / view.zoom,
    (clientY - paneTop - view.offsetY) / view.zoom,
  ];
}

export function imageToScreen(
  view: ViewState,
  u: number,
  v: number,
  paneLeft: number,
  paneTop: number,
): [number, number] {
  return [paneLeft + view.offsetX + u * view.zoom, paneTop + view.offsetY + v * view.zoom];
}

/** Zoom by `factor` keeping the image point under the cursor fixed. */
export function zoomAt(
  view: ViewState,
  factor: number,
  clientX: number,
  clientY: number,
  paneLeft: number,
  paneTop: number,
  minZoom = 0.1,
  maxZoom = 64,
): ViewState {
  const zoom = Math.min(Math.max(view.zoom * factor, minZoom), maxZoom);
  const applied = zoom / view.zoom;
  const px = clientX - paneLeft;
  const py = clientY - paneTop;
  return {
    zoom,
    offsetX: px - (px - view.offsetX) * applied,
    offsetY: py - (py - view.offsetY) * applied,
  };
}

export function panBy(view: ViewState, dx: number, dy: number): ViewState {
  return { ...view, offsetX: view.offsetX + dx, offsetY: view.offsetY + dy };
}

export function inBounds(u: number, v: number, width: number, height: number): boolean {
  return u >= 0 && u < width && v >= 0 && v < height;
}
