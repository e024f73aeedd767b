import logging

import numpy as np
import pytest

from lccalib.errors import SchemaError
from lccalib.pointcloud import PointCloud, load_cloud, minmax_normalize, save_cloud

ASCII_3PT = """ply
format ascii 1.0
comment synthetic
element vertex 3
property float x
property float y
property float z
property float intensity
end_header
0 0 0 10
1 0 0 20
0 1 0 30
"""


def test_ascii_intensity_normalization(tmp_path):
    p = tmp_path / "a.ply"
    p.write_text(ASCII_3PT)
    cloud = load_cloud(p)
    assert len(cloud) == 3
    assert np.allclose(cloud.intensities, [0.0, 0.5, 1.0])
    assert cloud.times is None


def test_nan_points_dropped_with_count(tmp_path, caplog):
    body = "0 0 0 1\n1 0 0 2\nnan 0 0 3\n0 1 0 4\n"
    header = ASCII_3PT.replace("element vertex 3", "element vertex 4").split("end_header")[0]
    (tmp_path / "b.ply").write_text(header + "end_header\n" + body)
    with caplog.at_level(logging.WARNING):
        cloud = load_cloud(tmp_path / "b.ply")
    assert len(cloud) == 3
    assert "dropped 1 non-finite" in caplog.text


def test_binary_round_trip_bit_for_bit(tmp_path):
    rng = np.random.default_rng(0)
    cloud = PointCloud(rng.normal(size=(500, 3)), rng.uniform(0, 1, 500), rng.uniform(0, 1, 500))
    save_cloud(cloud, tmp_path / "c.ply")
    back = load_cloud(tmp_path / "c.ply")
    # positions must survive exactly; intensities/times are re-normalized,
    # which is the identity once they already span [0, 1]
    assert back.points.tobytes() == cloud.points.tobytes()
    assert np.allclose(back.intensities, minmax_normalize(cloud.intensities))


def test_write_load_idempotent(tmp_path):
    rng = np.random.default_rng(1)
    cloud = PointCloud(rng.normal(size=(100, 3)), rng.uniform(0, 1, 100))
    save_cloud(cloud, tmp_path / "a.ply")
    first = load_cloud(tmp_path / "a.ply")
    save_cloud(first, tmp_path / "b.ply")
    second = load_cloud(tmp_path / "b.ply")
    assert second.points.tobytes() == first.points.tobytes()
    assert second.intensities.tobytes() == first.intensities.tobytes()


def test_ascii_writer_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    cloud = PointCloud(rng.normal(size=(20, 3)), rng.uniform(0, 1, 20))
    save_cloud(cloud, tmp_path / "a.ply", binary=False)
    back = load_cloud(tmp_path / "a.ply")
    assert np.array_equal(back.points, cloud.points)


def test_reflectivity_and_time_aliases(tmp_path):
    text = (
        "ply\nformat ascii 1.0\nelement vertex 2\n"
        "property double x\nproperty double y\nproperty double z\n"
        "property double reflectivity\nproperty double t\nend_header\n"
        "0 0 0 5 0.25\n1 1 1 15 0.75\n"
    )
    (tmp_path / "r.ply").write_text(text)
    cloud = load_cloud(tmp_path / "r.ply")
    assert np.allclose(cloud.intensities, [0.0, 1.0])
    assert np.allclose(cloud.times, [0.0, 1.0])  # min-max normalized


def test_missing_xyz_is_schema_error(tmp_path):
    text = (
        "ply\nformat ascii 1.0\nelement vertex 1\n"
        "property float x\nproperty float y\nproperty float intensity\nend_header\n0 0 1\n"
    )
    (tmp_path / "bad.ply").write_text(text)
    with pytest.raises(SchemaError, match="z"):
        load_cloud(tmp_path / "bad.ply")


def test_list_property_rejected(tmp_path):
    text = (
        "ply\nformat ascii 1.0\nelement vertex 1\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property list uchar int vertex_indices\nend_header\n"
    )
    (tmp_path / "bad.ply").write_text(text)
    with pytest.raises(SchemaError, match="list"):
        load_cloud(tmp_path / "bad.ply")


def test_not_a_ply(tmp_path):
    (tmp_path / "x.ply").write_text("hello\n")
    with pytest.raises(SchemaError):
        load_cloud(tmp_path / "x.ply")


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(OSError):
        load_cloud(tmp_path / "nope.ply")


def test_missing_intensity_defaults_to_zero(tmp_path, caplog):
    text = (
        "ply\nformat ascii 1.0\nelement vertex 1\n"
        "property float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n"
    )
    (tmp_path / "n.ply").write_text(text)
    with caplog.at_level(logging.WARNING):
        cloud = load_cloud(tmp_path / "n.ply")
    assert np.allclose(cloud.intensities, [0.0])
    assert "no intensity" in caplog.text


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 3)), np.zeros(3), np.zeros(4))


def test_binary_little_endian_truncation(tmp_path):
    save_cloud(PointCloud(np.zeros((5, 3)), np.zeros(5)), tmp_path / "t.ply")
    raw = (tmp_path / "t.ply").read_bytes()
    (tmp_path / "t.ply").write_bytes(raw[:-8])
    with pytest.raises(SchemaError, match="truncated"):
        load_cloud(tmp_path / "t.ply")
