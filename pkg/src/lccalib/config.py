"""Pipeline configuration: one JSON file drives every stage.

Example::

    {
      "seed": 42,
      "mode": "static",
      "camera": "intrinsics.json",
      "output_dir": "out",
      "pairs": [
        {"clouds": ["scan0.ply"], "image": "cam0.png", "correspondences": "matches0.json"}
      ],
      "ransac": {"iterations": 10000, "threshold_px": 20.0, "threshold_rad": 0.02},
      "nid": {"bins": 16, "max_outer_iterations": 10,
              "translation_tol": 1e-4, "rotation_tol_deg": 0.005},
      "nelder_mead": {"translation_step": 0.01, "rotation_step": 0.01,
                      "fvalue_tol": 1e-8, "diameter_tol": 1e-7, "max_evals": 500},
      "ivox": {"voxel_size": 0.5, "max_points_per_voxel": 20, "decimation_radius": 0.05},
      "dynamic": {"deskew": true, "max_residual_points": 2000},
      "virtual_camera": {"pinhole_size": [1024, 1024], "equirect_size": [1920, 960],
                         "fov_margin": 1.05},
      "init_transform": null
    }

Relative paths are resolved against the config file's directory. All
randomness derives from the single seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamic_integration import CtIcpParams
from .errors import SchemaError
from .fine_registration import FineRegistrationParams
from .geometry import RigidTransform
from .initial_guess import RansacParams
from .ivox import LinearIVox
from .simplex import NelderMeadParams


@dataclass(frozen=True)
class PairConfig:
    clouds: list[Path]
    image: Path
    correspondences: Path | None = None


@dataclass(frozen=True)
class VirtualCameraConfig:
    pinhole_size: tuple[int, int] = (1024, 1024)
    equirect_size: tuple[int, int] = (1920, 960)
    fov_margin: float = 1.05


@dataclass(frozen=True)
class PipelineConfig:
    camera_path: Path
    pairs: list[PairConfig]
    output_dir: Path
    mode: str = "static"
    seed: int = 0
    ransac: RansacParams = field(default_factory=RansacParams)
    fine: FineRegistrationParams = field(default_factory=FineRegistrationParams)
    ivox: dict = field(default_factory=dict)
    ct_icp: CtIcpParams = field(default_factory=CtIcpParams)
    virtual_camera: VirtualCameraConfig = field(default_factory=VirtualCameraConfig)
    init_transform: RigidTransform | None = None

    def make_ivox(self) -> LinearIVox:
        return LinearIVox(**self.ivox)

    def validate(self) -> None:
        """Check that every referenced input file exists."""
        missing = []
        if not self.camera_path.is_file():
            missing.append(self.camera_path)
        for pair in self.pairs:
            missing.extend(p for p in pair.clouds if not p.is_file())
            if not pair.image.is_file():
                missing.append(pair.image)
            if pair.correspondences is not None and not pair.correspondences.is_file():
                missing.append(pair.correspondences)
        if missing:
            raise SchemaError(
                "missing input files: " + ", ".join(str(m) for m in missing)
            )
        if self.mode not in ("static", "dynamic"):
            raise SchemaError(f"mode must be 'static' or 'dynamic', got {self.mode!r}")
        if not self.pairs:
            raise SchemaError("config needs at least one data pair")


def _transform_from_dict(data: dict) -> RigidTransform:
    try:
        return RigidTransform(
            np.asarray(data["quaternion_xyzw"], dtype=np.float64),
            np.asarray(data["translation"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid transform object: {exc}") from exc


def load_config(path, *, seed: int | None = None, output_dir=None) -> PipelineConfig:
    """Read and validate a pipeline config; ``seed``/``output_dir`` override the file."""
    path = Path(path)
    base = path.parent
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: cannot read config: {exc}") from exc

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        pairs = [
            PairConfig(
                clouds=[resolve(c) for c in pair["clouds"]],
                image=resolve(pair["image"]),
                correspondences=(
                    resolve(pair["correspondences"])
                    if pair.get("correspondences")
                    else None
                ),
            )
            for pair in data["pairs"]
        ]
        camera_path = resolve(data["camera"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: invalid config structure: {exc}") from exc

    ransac_cfg = data.get("ransac", {})
    ransac = RansacParams(
        iterations=int(ransac_cfg.get("iterations", 10_000)),
        threshold_px=float(ransac_cfg.get("threshold_px", 20.0)),
        threshold_rad=float(ransac_cfg.get("threshold_rad", 0.02)),
        seed=seed if seed is not None else int(data.get("seed", 0)),
    )
    nm_cfg = data.get("nelder_mead", {})
    steps = np.concatenate(
        [
            np.full(3, float(nm_cfg.get("translation_step", 0.01))),
            np.full(3, float(nm_cfg.get("rotation_step", 0.01))),
        ]
    )
    nelder_mead = NelderMeadParams(
        steps=steps,
        fvalue_tol=float(nm_cfg.get("fvalue_tol", 1e-8)),
        diameter_tol=float(nm_cfg.get("diameter_tol", 1e-7)),
        max_evals=int(nm_cfg.get("max_evals", 500)),
    )
    nid_cfg = data.get("nid", {})
    fine = FineRegistrationParams(
        bins=int(nid_cfg.get("bins", 16)),
        max_outer_iterations=int(nid_cfg.get("max_outer_iterations", 10)),
        translation_tol=float(nid_cfg.get("translation_tol", 1e-4)),
        rotation_tol_deg=float(nid_cfg.get("rotation_tol_deg", 0.005)),
        nelder_mead=nelder_mead,
    )
    dyn_cfg = data.get("dynamic", {})
    ct_icp = CtIcpParams(
        deskew=bool(dyn_cfg.get("deskew", True)),
        max_residual_points=int(dyn_cfg.get("max_residual_points", 2000)),
    )
    vc_cfg = data.get("virtual_camera", {})
    virtual_camera = VirtualCameraConfig(
        pinhole_size=tuple(vc_cfg.get("pinhole_size", (1024, 1024))),
        equirect_size=tuple(vc_cfg.get("equirect_size", (1920, 960))),
        fov_margin=float(vc_cfg.get("fov_margin", 1.05)),
    )
    init_transform = (
        _transform_from_dict(data["init_transform"]) if data.get("init_transform") else None
    )

    out = Path(output_dir) if output_dir is not None else resolve(data.get("output_dir", "out"))
    config = PipelineConfig(
        camera_path=camera_path,
        pairs=pairs,
        output_dir=out,
        mode=data.get("mode", "static"),
        seed=seed if seed is not None else int(data.get("seed", 0)),
        ransac=ransac,
        fine=fine,
        ivox={k: v for k, v in data.get("ivox", {}).items()},
        ct_icp=ct_icp,
        virtual_camera=virtual_camera,
        init_transform=init_transform,
    )
    config.validate()
    return config
