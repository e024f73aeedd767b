// Thin typed client over the calibration service. All numbers shown in the
// UI come verbatim from these responses; the client computes nothing.

export interface TransformDto {
  translation: number[];
  quaternion_xyzw: number[];
  matrix_row_major_4x4: number[];
}

export interface SessionSummary {
  pairs: number;
  camera_model: string;
  camera_image_size: [number, number];
  lidar_image_size: [number, number];
  correspondence_count: number;
  stages: { init_done: boolean; fine_done: boolean };
  transform: TransformDto | null;
  nid: number | null;
}

export interface CorrespondenceDto {
  id: number;
  camera_px: [number, number];
  lidar_px: [number, number];
  lidar_point: [number, number, number];
}

export interface JobStatus {
  status: "running" | "done" | "failed";
  result: {
    init?: { T_camera_lidar: TransformDto; inlier_count: number; low_confidence: boolean };
    fine?: {
      T_camera_lidar: TransformDto;
      final_nid: number;
      pairs_used: number;
      outer_iterations: number;
    };
  } | null;
  error: string | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function reason(response: Response): Promise<string> {
  try {
    const body = await response.json();
    return body.reason ?? body.detail ?? response.statusText;
  } catch {
    return response.statusText;
  }
}

export class Api {
  constructor(private fetchImpl: FetchLike = (i, init) => fetch(i, init)) {}

  private async getJson<T>(url: string): Promise<T> {
    const response = await this.fetchImpl(url);
    if (!response.ok) throw new ApiError(response.status, await reason(response));
    return (await response.json()) as T;
  }

  session(): Promise<SessionSummary> {
    return this.getJson("/api/session");
  }

  async lookup(u: number, v: number): Promise<[number, number, number] | null> {
    const response = await this.fetchImpl(
      `/api/indexmap/lookup?u=${encodeURIComponent(u)}&v=${encodeURIComponent(v)}`,
    );
    if (response.status === 404) return null;
    if (!response.ok) throw new ApiError(response.status, await reason(response));
    const body = await response.json();
    return body.point as [number, number, number];
  }

  listCorrespondences(): Promise<CorrespondenceDto[]> {
    return this.getJson("/api/correspondences");
  }

  async addCorrespondence(
    cameraPx: [number, number],
    lidarPx: [number, number],
  ): Promise<CorrespondenceDto> {
    const response = await this.fetchImpl("/api/correspondences", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ camera_px: cameraPx, lidar_px: lidarPx }),
    });
    if (!response.ok) throw new ApiError(response.status, await reason(response));
    return (await response.json()) as CorrespondenceDto;
  }

  async deleteCorrespondence(id: number): Promise<void> {
    const response = await this.fetchImpl(`/api/correspondences/${id}`, { method: "DELETE" });
    if (!response.ok) throw new ApiError(response.status, await reason(response));
  }

  async calibrate(stage: "init" | "fine" | "both"): Promise<number> {
    const response = await this.fetchImpl("/api/calibrate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ stage }),
    });
    if (!response.ok) throw new ApiError(response.status, await reason(response));
    return (await response.json()).job_id as number;
  }

  job(id: number): Promise<JobStatus> {
    return this.getJson(`/api/job/${id}`);
  }
}

export async function pollJob(
  api: Api,
  jobId: number,
  intervalMs = 500,
  sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
): Promise<JobStatus> {
  for (;;) {
    const status = await api.job(jobId);
    if (status.status !== "running") return status;
    await sleep(intervalMs);
  }
}
