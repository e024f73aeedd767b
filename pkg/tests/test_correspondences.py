import json
import logging

import numpy as np
import pytest

from lccalib.cameras import PinholeCamera
from lccalib.correspondences import (
    CorrespondenceSet,
    import_correspondences,
    save_correspondences,
)
from lccalib.errors import SchemaError
from lccalib.pointcloud import PointCloud
from lccalib.virtual_camera import IndexMap


@pytest.fixture
def cam():
    return PinholeCamera(fx=100, fy=100, cx=50, cy=50, width=100, height=100)


@pytest.fixture
def cloud():
    rng = np.random.default_rng(0)
    return PointCloud(rng.uniform(1, 5, size=(64, 3)), rng.uniform(0, 1, 64))


@pytest.fixture
def index_map():
    # 50 unique filled cells in rows 0-14; rows 17-19 stay empty
    indices = -np.ones((20, 20), dtype=np.int32)
    rng = np.random.default_rng(9)
    cells = rng.permutation(15 * 20)[:50]
    for i, cell in enumerate(cells):
        indices[cell // 20, cell % 20] = i
    return IndexMap(indices)


def write_matches(path, matches, source="superglue", threshold=0.05):
    path.write_text(
        json.dumps({"source": source, "matcher_threshold": threshold, "matches": matches})
    )


def test_lookup_and_drop_counting(tmp_path, cam, cloud, index_map, caplog):
    matches = []
    filled = np.argwhere(index_map.indices >= 0)
    for v, u in filled[:45]:
        matches.append({"camera_px": [10.0, 10.0], "lidar_px": [float(u), float(v)], "confidence": 0.9})
    # five matches on pixels with an empty 3x3 window: the map is sparse, so
    # probe a corner region left empty by construction
    empty = [[18, 18], [19, 19], [18, 19], [19, 18], [17, 18]]
    for u, v in empty:
        if index_map.lookup_window(u, v) >= 0:
            pytest.skip("fixture assumption broken")
        matches.append({"camera_px": [5.0, 5.0], "lidar_px": [float(u), float(v)], "confidence": 0.5})
    write_matches(tmp_path / "m.json", matches)
    with caplog.at_level(logging.WARNING):
        corr = import_correspondences(tmp_path / "m.json", cam, index_map, cloud)
    assert len(corr) == 45
    assert corr.dropped == 5
    assert corr.source == "superglue"
    assert corr.matcher_threshold == 0.05


def test_window_resolves_neighbor(tmp_path, cam, cloud):
    indices = -np.ones((20, 20), dtype=np.int32)
    indices[10, 11] = 33
    write_matches(tmp_path / "m.json", [{"camera_px": [1.0, 2.0], "lidar_px": [10.0, 10.0]}])
    corr = import_correspondences(tmp_path / "m.json", cam, IndexMap(indices), cloud)
    assert len(corr) == 1
    assert np.allclose(corr.points[0], cloud.points[33])
    assert corr.confidence[0] == 1.0  # default


def test_direct_lidar_point_passthrough(tmp_path, cam, cloud, index_map):
    write_matches(
        tmp_path / "m.json",
        [{"camera_px": [3.0, 4.0], "lidar_point": [1.5, 2.5, 3.5], "confidence": 0.7}],
    )
    corr = import_correspondences(tmp_path / "m.json", cam, index_map, cloud)
    assert np.allclose(corr.points[0], [1.5, 2.5, 3.5])


def test_empty_match_list(tmp_path, cam, cloud, index_map):
    write_matches(tmp_path / "m.json", [])
    corr = import_correspondences(tmp_path / "m.json", cam, index_map, cloud)
    assert len(corr) == 0


@pytest.mark.parametrize(
    "payload",
    [
        {"source": "nonsense", "matcher_threshold": None, "matches": []},
        {"source": "manual", "matcher_threshold": "high", "matches": []},
        {"source": "manual", "matcher_threshold": None, "matches": [{"camera_px": [1, 2]}]},
        {"source": "manual", "matcher_threshold": None,
         "matches": [{"camera_px": [1], "lidar_point": [1, 2, 3]}]},
        {"source": "manual", "matcher_threshold": None,
         "matches": [{"camera_px": [500.0, 2.0], "lidar_point": [1, 2, 3]}]},
    ],
)
def test_schema_violations(tmp_path, cam, cloud, index_map, payload):
    (tmp_path / "m.json").write_text(json.dumps(payload))
    with pytest.raises(SchemaError):
        import_correspondences(tmp_path / "m.json", cam, index_map, cloud)


def test_invalid_json_reports_path(tmp_path, cam, cloud, index_map):
    (tmp_path / "m.json").write_text("{not json")
    with pytest.raises(SchemaError, match="m.json"):
        import_correspondences(tmp_path / "m.json", cam, index_map, cloud)


def test_save_then_import_round_trip(tmp_path, cam, cloud, index_map):
    pixels = np.array([[10.0, 20.0], [30.0, 40.0]])
    points = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    save_correspondences(tmp_path / "m.json", pixels, points, source="manual")
    corr = import_correspondences(tmp_path / "m.json", cam, index_map, cloud)
    assert np.allclose(corr.pixels, pixels)
    assert np.allclose(corr.points, points)
    assert corr.source == "manual"


def test_merged_with(cam):
    a = CorrespondenceSet(np.zeros((2, 2)), np.ones((2, 3)), np.ones(2), source="manual")
    b = CorrespondenceSet(np.ones((3, 2)), np.zeros((3, 3)), np.ones(3), source="manual")
    merged = a.merged_with(b)
    assert len(merged) == 5
    assert merged.source == "manual"
