// Annotation session state machine. Alternating click flow: a camera-pane
// click opens a pending pair, the following LiDAR-pane click resolves it
// through the server's index map and submits it. The session holds no
// calibration math; every displayed value is a verbatim server response.

import { Api, ApiError, CorrespondenceDto, JobStatus, TransformDto, pollJob } from "./api.js";

export interface PickPair {
  id: number; // server id
  cameraPx: [number, number];
  lidarPx: [number, number];
  point: [number, number, number];
}

export type SessionEvent =
  | { kind: "picks-changed" }
  | { kind: "pending-changed" }
  | { kind: "miss"; lidarPx: [number, number] }
  | { kind: "error"; message: string; retryable: boolean }
  | { kind: "job-started"; stage: string }
  | { kind: "job-finished"; status: JobStatus }
  | { kind: "estimate-changed" };

export class AnnotationSession {
  picks: PickPair[] = [];
  pendingCamera: [number, number] | null = null;
  transform: TransformDto | null = null;
  nid: number | null = null;
  jobRunning = false;
  lastError: string | null = null;

  private listeners: ((event: SessionEvent) => void)[] = [];

  constructor(
    private api: Api,
    private pollIntervalMs = 500,
    private sleep?: (ms: number) => Promise<void>,
  ) {}

  onEvent(listener: (event: SessionEvent) => void): void {
    this.listeners.push(listener);
  }

  private emit(event: SessionEvent): void {
    for (const listener of this.listeners) listener(event);
  }

  private fail(error: unknown, retryable: boolean): void {
    this.lastError = error instanceof Error ? error.message : String(error);
    this.emit({ kind: "error", message: this.lastError, retryable });
  }

  async refreshFromServer(): Promise<void> {
    const summary = await this.api.session();
    this.transform = summary.transform;
    this.nid = summary.nid;
    const listing = await this.api.listCorrespondences();
    this.picks = listing.map(fromDto);
    this.emit({ kind: "picks-changed" });
    this.emit({ kind: "estimate-changed" });
  }

  /** Camera-pane click: start (or restart) a pending pair. */
  clickCamera(px: [number, number]): void {
    this.pendingCamera = px;
    this.emit({ kind: "pending-changed" });
  }

  /** LiDAR-pane click: resolve and submit the pending pair. */
  async clickLidar(px: [number, number]): Promise<void> {
    if (this.pendingCamera === null) {
      this.fail(new Error("click the camera image first"), false);
      return;
    }
    let point: [number, number, number] | null;
    try {
      point = await this.api.lookup(px[0], px[1]);
    } catch (error) {
      this.fail(error, true); // network failure: keep the pending pick
      return;
    }
    if (point === null) {
      this.emit({ kind: "miss", lidarPx: px });
      return;
    }
    try {
      const stored = await this.api.addCorrespondence(this.pendingCamera, px);
      this.picks.push(fromDto(stored));
      this.pendingCamera = null;
      this.emit({ kind: "pending-changed" });
      this.emit({ kind: "picks-changed" });
    } catch (error) {
      // server rejections are final; network errors keep local state for retry
      this.fail(error, !(error instanceof ApiError));
    }
  }

  async deletePick(id: number): Promise<void> {
    try {
      await this.api.deleteCorrespondence(id);
    } catch (error) {
      this.fail(error, !(error instanceof ApiError));
      return;
    }
    this.picks = this.picks.filter((p) => p.id !== id);
    this.emit({ kind: "picks-changed" });
  }

  /** Pair numbers shown on both panes: position in the list, 1-based. */
  numberOf(id: number): number {
    return this.picks.findIndex((p) => p.id === id) + 1;
  }

  async runCalibration(stage: "init" | "fine" | "both"): Promise<JobStatus | null> {
    let jobId: number;
    try {
      jobId = await this.api.calibrate(stage);
    } catch (error) {
      this.fail(error, false); // e.g. ">=3 pairs required", shown verbatim
      return null;
    }
    this.jobRunning = true;
    this.lastError = null;
    this.emit({ kind: "job-started", stage });
    let status: JobStatus;
    try {
      status = await pollJob(this.api, jobId, this.pollIntervalMs, this.sleep);
    } catch (error) {
      this.jobRunning = false;
      this.fail(error, true);
      return null;
    }
    this.jobRunning = false;
    if (status.status === "failed") {
      this.fail(new Error(status.error ?? "calibration failed"), false);
    } else if (status.result) {
      const fine = status.result.fine;
      const init = status.result.init;
      if (fine) {
        this.transform = fine.T_camera_lidar;
        this.nid = fine.final_nid;
      } else if (init) {
        this.transform = init.T_camera_lidar;
      }
      this.emit({ kind: "estimate-changed" });
    }
    this.emit({ kind: "job-finished", status });
    return status;
  }
}

function fromDto(dto: CorrespondenceDto): PickPair {
  return {
    id: dto.id,
    cameraPx: dto.camera_px,
    lidarPx: dto.lidar_px,
    point: dto.lidar_point,
  };
}
