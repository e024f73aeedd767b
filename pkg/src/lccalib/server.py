"""HTTP service behind the manual annotation UI.

One calibration workspace per process. The service loads (or computes) the
preprocessed and rendered artifacts for the configured pairs, then exposes:

* ``GET  /api/session``                 session summary
* ``GET  /api/image/camera``            equalized camera image (pair 0), PNG
* ``GET  /api/image/lidar``             rendered LiDAR intensity image, PNG
* ``GET  /api/indexmap/lookup?u=&v=``   3x3-window index-map lookup -> 3D point
* ``GET/POST /api/correspondences``     list / add manual pairs
* ``DELETE /api/correspondences/{id}``  remove one pair
* ``POST /api/calibrate``               {"stage": "init"|"fine"|"both"} -> job id
* ``GET  /api/job/{id}``                poll job status / result
* ``GET  /api/overlay``                 overlay PNG at the current estimate

Manual pairs are persisted to ``<out>/manual_correspondences.json`` in the
standard correspondence schema after every mutation, so UI output feeds the
CLI pipeline unchanged. Mutations and calibration jobs are serialized through
a single session lock; at most one job runs at a time.
"""

from __future__ import annotations

import io
import logging
import threading
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pathlib import Path
from PIL import Image

from .cameras import Camera, load_camera
from .config import PipelineConfig
from .correspondences import CorrespondenceSet, save_correspondences
from .errors import CalibrationError
from .fine_registration import calibrate_fine
from .geometry import RigidTransform
from .images import GrayImage, load_gray
from .initial_guess import ransac_rotation, refine_reprojection
from .overlay import render_overlay
from .pipeline import (
    _load_preprocessed,
    _load_render,
    stage_fov,
    stage_preprocess,
    stage_render,
    transform_to_dict,
)
from .pointcloud import PointCloud

log = logging.getLogger(__name__)


def _png_bytes(image: GrayImage) -> bytes:
    buf = io.BytesIO()
    arr = (np.clip(image.pixels, 0, 1) * 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _rgb_png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


@dataclass
class _Job:
    status: str = "running"  # running | done | failed
    result: dict | None = None
    error: str | None = None


@dataclass
class _Pick:
    id: int
    camera_px: list[float]
    lidar_px: list[float]
    point: list[float]


class Session:
    """All mutable state of one annotation/calibration workspace."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.lock = threading.Lock()
        self.camera: Camera = load_camera(config.camera_path)
        self._prepare_artifacts()
        self.pairs: list[tuple[PointCloud, GrayImage]] = [
            _load_preprocessed(config, i) for i in range(len(config.pairs))
        ]
        _, _, self.index_map = _load_render(config, 0)
        self.lidar_image_path = config.output_dir / "render" / "pair_00" / "lidar_image.png"
        self.picks: list[_Pick] = []
        self._next_pick_id = 1
        self.transform: RigidTransform | None = config.init_transform
        self.nid_value: float | None = None
        self.init_done = False
        self.fine_done = False
        self.jobs: dict[int, _Job] = {}
        self._next_job_id = 1
        self._job_running = False

    def _prepare_artifacts(self) -> None:
        render_meta = self.config.output_dir / "render" / "pair_00" / "virtual_camera.json"
        if not render_meta.is_file():
            log.info("preparing session artifacts (preprocess + render)")
            stage_preprocess(self.config)
            stage_fov(self.config)
            stage_render(self.config)

    # --- correspondences ---------------------------------------------------

    def lookup(self, u: float, v: float) -> np.ndarray | None:
        idx = self.index_map.lookup_window(u, v)
        if idx < 0:
            return None
        return self.pairs[0][0].points[idx]

    def add_pick(self, camera_px, lidar_px) -> _Pick:
        point = self.lookup(lidar_px[0], lidar_px[1])
        if point is None:
            raise CalibrationError("no LiDAR point near that pixel")
        if not (0 <= camera_px[0] < self.camera.width and 0 <= camera_px[1] < self.camera.height):
            raise CalibrationError("camera pixel outside the image")
        pick = _Pick(
            id=self._next_pick_id,
            camera_px=[float(camera_px[0]), float(camera_px[1])],
            lidar_px=[float(lidar_px[0]), float(lidar_px[1])],
            point=[float(x) for x in point],
        )
        self._next_pick_id += 1
        self.picks.append(pick)
        self._persist()
        return pick

    def delete_pick(self, pick_id: int) -> bool:
        before = len(self.picks)
        self.picks = [p for p in self.picks if p.id != pick_id]
        if len(self.picks) != before:
            self._persist()
            return True
        return False

    def _persist(self) -> None:
        self.config.output_dir.mkdir(parents=True, exist_ok=True)
        save_correspondences(
            self.config.output_dir / "manual_correspondences.json",
            np.asarray([p.camera_px for p in self.picks]).reshape(-1, 2),
            np.asarray([p.point for p in self.picks]).reshape(-1, 3),
            lidar_pixels=np.asarray([p.lidar_px for p in self.picks]).reshape(-1, 2),
            source="manual",
        )

    def correspondence_set(self) -> CorrespondenceSet:
        return CorrespondenceSet(
            np.asarray([p.camera_px for p in self.picks]).reshape(-1, 2),
            np.asarray([p.point for p in self.picks]).reshape(-1, 3),
            np.ones(len(self.picks)),
            source="manual",
        )

    # --- calibration jobs ---------------------------------------------------

    def start_job(self, stage: str) -> int:
        with self.lock:
            if self._job_running:
                raise CalibrationError("a calibration job is already running")
            if stage in ("init", "both") and len(self.picks) < 2:
                raise CalibrationError(">=2 pairs required for the initial guess")
            if stage in ("fine", "both") and len(self.picks) < 3:
                raise CalibrationError(">=3 pairs required")
            if stage == "fine" and self.transform is None:
                raise CalibrationError("no initial transform; run the init stage first")
            job_id = self._next_job_id
            self._next_job_id += 1
            self.jobs[job_id] = _Job()
            self._job_running = True
        thread = threading.Thread(target=self._run_job, args=(job_id, stage), daemon=True)
        thread.start()
        return job_id

    def _run_job(self, job_id: int, stage: str) -> None:
        job = self.jobs[job_id]
        try:
            result: dict = {}
            if stage in ("init", "both"):
                corr = self.correspondence_set()
                ransac = ransac_rotation(corr, self.camera, self.config.ransac)
                if len(corr) >= 3:
                    refined = refine_reprojection(
                        corr,
                        self.camera,
                        ransac.transform,
                        kernel_scale=self.config.ransac.threshold_for(self.camera),
                    )
                else:
                    # two pairs pin the rotation only; translation stays zero
                    refined = ransac.transform
                with self.lock:
                    self.transform = refined
                    self.init_done = True
                result["init"] = {
                    "T_camera_lidar": transform_to_dict(refined),
                    "inlier_count": ransac.inlier_count,
                    "low_confidence": ransac.low_confidence,
                }
            if stage in ("fine", "both"):
                fine = calibrate_fine(self.pairs, self.camera, self.transform, self.config.fine)
                with self.lock:
                    self.transform = fine.transform
                    self.nid_value = fine.final_nid
                    self.fine_done = True
                result["fine"] = {
                    "T_camera_lidar": transform_to_dict(fine.transform),
                    "final_nid": fine.final_nid,
                    "pairs_used": fine.pairs_used,
                    "outer_iterations": fine.outer_iterations,
                }
            job.result = result
            job.status = "done"
        except Exception as exc:  # report the stage error to the poller
            log.exception("calibration job failed")
            job.error = str(exc)
            job.status = "failed"
        finally:
            with self.lock:
                self._job_running = False

    def summary(self) -> dict:
        return {
            "pairs": len(self.pairs),
            "camera_model": self.camera.model_name,
            "camera_image_size": [self.camera.width, self.camera.height],
            "lidar_image_size": [self.index_map.width, self.index_map.height],
            "correspondence_count": len(self.picks),
            "stages": {"init_done": self.init_done, "fine_done": self.fine_done},
            "transform": None if self.transform is None else transform_to_dict(self.transform),
            "nid": self.nid_value,
        }


def create_app(session: Session, frontend_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="lccalib annotation service")

    @app.exception_handler(CalibrationError)
    async def _calibration_error(_, exc: CalibrationError):
        return JSONResponse(status_code=400, content={"reason": str(exc)})

    @app.get("/api/session")
    def get_session():
        return session.summary()

    @app.get("/api/image/camera")
    def get_camera_image():
        return Response(content=_png_bytes(session.pairs[0][1]), media_type="image/png")

    @app.get("/api/image/lidar")
    def get_lidar_image():
        return Response(
            content=_png_bytes(load_gray(session.lidar_image_path)), media_type="image/png"
        )

    @app.get("/api/indexmap/lookup")
    def lookup(u: float, v: float):
        point = session.lookup(u, v)
        if point is None:
            raise HTTPException(status_code=404, detail="no LiDAR point at this pixel")
        return {"point": [float(x) for x in point]}

    @app.get("/api/correspondences")
    def list_correspondences():
        return [
            {
                "id": p.id,
                "camera_px": p.camera_px,
                "lidar_px": p.lidar_px,
                "lidar_point": p.point,
            }
            for p in session.picks
        ]

    @app.post("/api/correspondences")
    def add_correspondence(payload: dict):
        camera_px = payload.get("camera_px")
        lidar_px = payload.get("lidar_px")
        if (
            not isinstance(camera_px, list)
            or not isinstance(lidar_px, list)
            or len(camera_px) != 2
            or len(lidar_px) != 2
        ):
            raise CalibrationError("payload must contain camera_px [u,v] and lidar_px [u,v]")
        with session.lock:
            pick = session.add_pick(camera_px, lidar_px)
        return {
            "id": pick.id,
            "camera_px": pick.camera_px,
            "lidar_px": pick.lidar_px,
            "lidar_point": pick.point,
        }

    @app.delete("/api/correspondences/{pick_id}")
    def delete_correspondence(pick_id: int):
        with session.lock:
            if not session.delete_pick(pick_id):
                raise HTTPException(status_code=404, detail=f"no correspondence {pick_id}")
        return {"deleted": pick_id}

    @app.post("/api/calibrate")
    def calibrate(payload: dict):
        stage = payload.get("stage")
        if stage not in ("init", "fine", "both"):
            raise CalibrationError("stage must be one of 'init', 'fine', 'both'")
        job_id = session.start_job(stage)
        return {"job_id": job_id}

    @app.get("/api/job/{job_id}")
    def job_status(job_id: int):
        job = session.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no job {job_id}")
        return {"status": job.status, "result": job.result, "error": job.error}

    @app.get("/api/overlay")
    def overlay():
        with session.lock:
            transform = session.transform
        if transform is None:
            raise HTTPException(status_code=404, detail="no transform estimate yet")
        cloud, image = session.pairs[0]
        pixels = render_overlay(cloud, image, session.camera, transform)
        return Response(content=_rgb_png_bytes(pixels), media_type="image/png")

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index():
            return {"service": "lccalib", "ui": "frontend not built; API only"}

    return app


def default_frontend_dir() -> Path | None:
    """Locate the built annotation UI next to an editable checkout, if any."""
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def serve(config: PipelineConfig, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    app = create_app(Session(config), frontend_dir=default_frontend_dir())
    uvicorn.run(app, host=host, port=port)
