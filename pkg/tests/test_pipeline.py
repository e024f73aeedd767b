import json
import shutil
from pathlib import Path

import pytest

from lccalib.config import load_config
from lccalib.errors import InsufficientCorrespondencesError, SchemaError
from lccalib.geometry import rotation_distance_deg, translation_distance
from lccalib.pipeline import (
    run_pipeline,
    stage_calibrate,
    stage_fov,
    stage_init_guess,
    stage_preprocess,
    stage_render,
    transform_from_dict,
    transform_to_dict,
)

def read_transform(path: Path):
    return transform_from_dict(json.loads(Path(path).read_text())["T_camera_lidar"])


def test_transform_dict_round_trip(bench):
    data = transform_to_dict(bench.transform)
    assert set(data) == {"translation", "quaternion_xyzw", "matrix_row_major_4x4"}
    assert len(data["matrix_row_major_4x4"]) == 16
    back = transform_from_dict(data)
    assert translation_distance(back, bench.transform) < 1e-12


def test_full_pipeline_recovers_transform(pipeline_fixture, bench):
    config = load_config(pipeline_fixture)
    result_path = run_pipeline(config)
    assert result_path.is_file()

    init = read_transform(config.output_dir / "init_guess" / "transform.json")
    assert translation_distance(init, bench.transform) < 0.1
    assert rotation_distance_deg(init, bench.transform) < 1.5

    result = json.loads(result_path.read_text())
    final = transform_from_dict(result["T_camera_lidar"])
    assert translation_distance(final, bench.transform) < 0.02
    assert rotation_distance_deg(final, bench.transform) < 0.3
    assert result["pairs_used"] == 1
    assert 0.0 <= result["final_nid"] <= 1.0
    assert (config.output_dir / "calibration" / "overlay_pair_00.png").is_file()
    assert (config.output_dir / "init_guess" / "matches.png").is_file()


def test_pipeline_deterministic_at_fixed_seed(pipeline_fixture, tmp_path):
    out_a = tmp_path / "run_a"
    out_b = tmp_path / "run_b"
    for out in (out_a, out_b):
        config = load_config(pipeline_fixture, output_dir=out)
        run_pipeline(config)
    result_a = (out_a / "calibration" / "result.json").read_bytes()
    result_b = (out_b / "calibration" / "result.json").read_bytes()
    assert result_a == result_b
    overlay_a = (out_a / "calibration" / "overlay_pair_00.png").read_bytes()
    overlay_b = (out_b / "calibration" / "overlay_pair_00.png").read_bytes()
    assert overlay_a == overlay_b


def test_stagewise_equals_run_pipeline(pipeline_fixture, tmp_path):
    out_whole = tmp_path / "whole"
    config = load_config(pipeline_fixture, output_dir=out_whole)
    run_pipeline(config)

    out_stages = tmp_path / "stages"
    config = load_config(pipeline_fixture, output_dir=out_stages)
    stage_preprocess(config)
    stage_fov(config)
    stage_render(config)
    stage_init_guess(config)
    stage_calibrate(config)

    for rel in (
        "render/fov.json",
        "init_guess/transform.json",
        "calibration/result.json",
        "calibration/overlay_pair_00.png",
    ):
        assert (out_whole / rel).read_bytes() == (out_stages / rel).read_bytes(), rel


def test_missing_input_is_validation_error(pipeline_fixture, tmp_path):
    broken = tmp_path / "broken"
    shutil.copytree(pipeline_fixture.parent, broken, ignore=shutil.ignore_patterns("out"))
    (broken / "scan0.ply").unlink()
    with pytest.raises(SchemaError, match="scan0.ply"):
        load_config(broken / "config.json")


def test_no_correspondences_mentions_serve(pipeline_fixture, tmp_path):
    root = tmp_path / "nocorr"
    shutil.copytree(pipeline_fixture.parent, root, ignore=shutil.ignore_patterns("out"))
    data = json.loads((root / "config.json").read_text())
    data["pairs"][0]["correspondences"] = None
    (root / "config.json").write_text(json.dumps(data))
    config = load_config(root / "config.json")
    with pytest.raises(InsufficientCorrespondencesError, match="serve"):
        run_pipeline(config)


def test_calibrate_without_init_guess_instructs(pipeline_fixture, tmp_path):
    config = load_config(pipeline_fixture, output_dir=tmp_path / "fresh")
    stage_preprocess(config)
    from lccalib.errors import CalibrationError

    with pytest.raises(CalibrationError, match="init-guess|init_transform"):
        stage_calibrate(config)


def test_init_transform_override_skips_init_stage(pipeline_fixture, bench, tmp_path):
    root = tmp_path / "override"
    shutil.copytree(pipeline_fixture.parent, root, ignore=shutil.ignore_patterns("out"))
    data = json.loads((root / "config.json").read_text())
    data["pairs"][0]["correspondences"] = None
    data["init_transform"] = {
        "translation": bench.transform.translation.tolist(),
        "quaternion_xyzw": bench.transform.quaternion.tolist(),
    }
    (root / "config.json").write_text(json.dumps(data))
    config = load_config(root / "config.json")
    result_path = run_pipeline(config)
    final = read_transform(result_path)
    assert translation_distance(final, bench.transform) < 0.02
    assert not (config.output_dir / "init_guess").exists()
