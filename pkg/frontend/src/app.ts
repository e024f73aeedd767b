// DOM wiring: two zoomable picking panes, the pick list, calibration
// buttons, and the overlay preview. All logic lives in session.ts/view.ts.

import { Api } from "./api.js";
import { AnnotationSession } from "./session.js";
import { ViewState, initialView, inBounds, panBy, screenToImage, zoomAt } from "./view.js";

const PAN_THRESHOLD_PX = 4;

class Pane {
  view: ViewState = initialView();
  private content: HTMLDivElement;
  private markers: HTMLDivElement;
  private dragging = false;
  private moved = false;
  private lastX = 0;
  private lastY = 0;

  constructor(
    private root: HTMLElement,
    imageUrl: string,
    private onPick: (px: [number, number]) => void,
  ) {
    this.content = document.createElement("div");
    this.content.className = "pane-content";
    const img = document.createElement("img");
    img.src = imageUrl;
    img.draggable = false;
    this.content.appendChild(img);
    this.markers = document.createElement("div");
    this.markers.className = "markers";
    this.content.appendChild(this.markers);
    root.appendChild(this.content);

    root.addEventListener("wheel", (e) => {
      e.preventDefault();
      const rect = root.getBoundingClientRect();
      const factor = e.deltaY < 0 ? 1.25 : 0.8;
      this.view = zoomAt(this.view, factor, e.clientX, e.clientY, rect.left, rect.top);
      this.applyTransform();
    });
    root.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      this.moved = false;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      root.setPointerCapture(e.pointerId);
    });
    root.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      const dx = e.clientX - this.lastX;
      const dy = e.clientY - this.lastY;
      if (Math.abs(dx) + Math.abs(dy) > PAN_THRESHOLD_PX) this.moved = true;
      if (this.moved) {
        this.view = panBy(this.view, dx, dy);
        this.lastX = e.clientX;
        this.lastY = e.clientY;
        this.applyTransform();
      }
    });
    root.addEventListener("pointerup", (e) => {
      const wasPan = this.moved;
      this.dragging = false;
      this.moved = false;
      if (wasPan) return;
      const rect = root.getBoundingClientRect();
      const [u, v] = screenToImage(this.view, e.clientX, e.clientY, rect.left, rect.top);
      this.onPick([u, v]);
    });
  }

  private applyTransform(): void {
    this.content.style.transform =
      `translate(${this.view.offsetX}px, ${this.view.offsetY}px) scale(${this.view.zoom})`;
  }

  setMarkers(entries: { u: number; v: number; label: string; cls: string }[]): void {
    this.markers.replaceChildren();
    for (const entry of entries) {
      const dot = document.createElement("div");
      dot.className = `marker ${entry.cls}`;
      dot.style.left = `${entry.u}px`;
      dot.style.top = `${entry.v}px`;
      dot.textContent = entry.label;
      this.markers.appendChild(dot);
    }
  }

  flashMiss(u: number, v: number): void {
    const dot = document.createElement("div");
    dot.className = "marker miss";
    dot.style.left = `${u}px`;
    dot.style.top = `${v}px`;
    dot.textContent = "no LiDAR point here";
    this.markers.appendChild(dot);
    setTimeout(() => dot.remove(), 1500);
  }
}

function formatTransform(t: { translation: number[]; quaternion_xyzw: number[] } | null): string {
  if (!t) return "no estimate yet";
  const fmt = (values: number[]) => values.map((x) => String(x)).join(", ");
  return `t = [${fmt(t.translation)}]\nq(xyzw) = [${fmt(t.quaternion_xyzw)}]`;
}

export async function startApp(root: Document = document): Promise<void> {
  const api = new Api();
  const session = new AnnotationSession(api);
  const summary = await api.session();

  const cameraSize = summary.camera_image_size;
  const lidarSize = summary.lidar_image_size;

  const cameraPane = new Pane(
    root.getElementById("camera-pane")!,
    "/api/image/camera",
    (px) => {
      if (!inBounds(px[0], px[1], cameraSize[0], cameraSize[1])) return;
      session.clickCamera(px);
    },
  );
  const lidarPane = new Pane(
    root.getElementById("lidar-pane")!,
    "/api/image/lidar",
    (px) => {
      if (!inBounds(px[0], px[1], lidarSize[0], lidarSize[1])) return;
      void session.clickLidar(px);
    },
  );

  const pickList = root.getElementById("pick-list")!;
  const status = root.getElementById("status")!;
  const errorBanner = root.getElementById("error-banner")!;
  const transformBox = root.getElementById("transform")!;
  const nidBox = root.getElementById("nid")!;
  const overlayImg = root.getElementById("overlay-img") as HTMLImageElement;
  const slider = root.getElementById("overlay-opacity") as HTMLInputElement;

  function redrawMarkers(): void {
    cameraPane.setMarkers([
      ...session.picks.map((p) => ({
        u: p.cameraPx[0],
        v: p.cameraPx[1],
        label: String(session.numberOf(p.id)),
        cls: "pair",
      })),
      ...(session.pendingCamera
        ? [{ u: session.pendingCamera[0], v: session.pendingCamera[1], label: "?", cls: "pending" }]
        : []),
    ]);
    lidarPane.setMarkers(
      session.picks.map((p) => ({
        u: p.lidarPx[0],
        v: p.lidarPx[1],
        label: String(session.numberOf(p.id)),
        cls: "pair",
      })),
    );
  }

  function redrawList(): void {
    pickList.replaceChildren();
    for (const pick of session.picks) {
      const row = root.createElement("li");
      row.textContent =
        `#${session.numberOf(pick.id)} cam(${pick.cameraPx[0].toFixed(1)}, ` +
        `${pick.cameraPx[1].toFixed(1)}) -> [${pick.point.map((x) => x.toFixed(3)).join(", ")}] `;
      const del = root.createElement("button");
      del.textContent = "delete";
      del.addEventListener("click", () => void session.deletePick(pick.id));
      row.appendChild(del);
      pickList.appendChild(row);
    }
  }

  function refreshOverlay(): void {
    overlayImg.src = `/api/overlay?t=${Date.now()}`;
    overlayImg.style.display = "";
  }

  session.onEvent((event) => {
    switch (event.kind) {
      case "picks-changed":
      case "pending-changed":
        redrawMarkers();
        redrawList();
        status.textContent = session.pendingCamera
          ? "now click the matching LiDAR pixel"
          : "click a feature on the camera image";
        break;
      case "miss":
        lidarPane.flashMiss(event.lidarPx[0], event.lidarPx[1]);
        break;
      case "error":
        errorBanner.textContent = event.retryable
          ? `${event.message} — network trouble, your picks are kept; retry`
          : event.message;
        errorBanner.style.display = "";
        break;
      case "job-started":
        status.textContent = `running ${event.stage}...`;
        errorBanner.style.display = "none";
        break;
      case "job-finished":
        status.textContent = event.status.status === "done" ? "done" : "failed";
        if (event.status.status === "done") refreshOverlay();
        break;
      case "estimate-changed":
        transformBox.textContent = formatTransform(session.transform);
        nidBox.textContent = session.nid === null ? "-" : String(session.nid);
        break;
    }
  });

  root.getElementById("estimate-btn")!.addEventListener("click", () => {
    void session.runCalibration("init");
  });
  root.getElementById("refine-btn")!.addEventListener("click", () => {
    void session.runCalibration("fine");
  });
  slider.addEventListener("input", () => {
    overlayImg.style.opacity = slider.value;
  });

  await session.refreshFromServer();
  if (session.transform) refreshOverlay();
  redrawMarkers();
  redrawList();
}
