"""Target-less, single-shot LiDAR-camera extrinsic calibration toolkit.

Estimates the rigid transform from the LiDAR frame to the camera frame from
pairings of a point cloud and an image: correspondence-based initial guess
(rotation-only RANSAC + robust reprojection refinement) followed by direct
fine registration that minimizes the normalized information distance between
projected point intensities and image intensities.
"""

from .cameras import Camera, EquirectCamera, PinholeCamera, load_camera, save_camera
from .correspondences import CorrespondenceSet, import_correspondences, save_correspondences
from .dynamic_integration import (
    CtIcpParams,
    ScanPosePair,
    ct_icp_align,
    integrate_dynamic,
    interpolate_pose,
)
from .errors import (
    CalibrationError,
    CalibrationFailedError,
    DegenerateSampleError,
    InsufficientCorrespondencesError,
    InsufficientOverlapError,
    NoOverlapError,
    NonConvergenceError,
    SchemaError,
)
from .fine_registration import FineRegistrationParams, FineResult, calibrate_fine
from .geometry import RigidTransform, rotation_distance_deg, translation_distance
from .images import GrayImage, load_gray, save_gray
from .initial_guess import (
    RansacParams,
    RansacResult,
    ransac_rotation,
    refine_reprojection,
    rotation_from_two,
)
from .ivox import LinearIVox
from .nid import IntensityHistograms, build_histograms, entropy, hidden_point_removal, nid
from .pointcloud import PointCloud, load_cloud, save_cloud
from .preprocess import accumulate_static, histogram_equalize
from .simplex import NelderMeadParams, nelder_mead
from .virtual_camera import (
    IndexMap,
    VirtualCameraSetup,
    estimate_fov,
    render_intensity,
    select_virtual_camera,
)

__version__ = "0.1.0"
