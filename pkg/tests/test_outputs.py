import os
import stat

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavetraj import outputs
from wavetraj.errors import IoFailure, MalformedCsv
from wavetraj.scenarios import build_scenario, run_scenario


@pytest.fixture(scope="module")
def short_run():
    return run_scenario(build_scenario("free_gaussian", {"z_end_over_zr": 0.05, "n_rays": 41}))


@given(st.floats(allow_nan=False, allow_infinity=False).filter(lambda v: v == 0 or abs(v) > 1e-300))
def test_fmt_is_nine_digit_scientific(v):
    text = outputs.fmt(v)
    mant, exp = text.split("e")
    assert len(mant.replace("-", "").replace(".", "")) <= 9
    assert float(text) == float(f"{v:.8e}")
    assert not mant.endswith("0") or mant.lstrip("-") == "0"


def test_fmt_examples():
    assert outputs.fmt(0.1) == "1e-01"
    assert outputs.fmt(1 / 3) == "3.33333333e-01"
    assert outputs.fmt(-250.0) == "-2.5e+02"
    assert outputs.fmt(0.30000000000000004) == "3e-01"


def test_trajectories_csv_schema(short_run):
    text = outputs.trajectories_csv(short_run.log)
    lines = text.splitlines()
    assert lines[0] == "t,ray_id,x,z,px,pz,R,W,H_drift,flags"
    assert len(lines) == 1 + short_run.log.n_samples * short_run.log.n_rays
    assert "e" in lines[1].split(",")[2]


def test_csv_round_trip(tmp_path, short_run):
    path = tmp_path / "trajectories.csv"
    outputs.atomic_write(path, outputs.trajectories_csv(short_run.log))
    data = outputs.read_trajectories_csv(path)
    np.testing.assert_allclose(data["x"].reshape(short_run.log.n_samples, -1),
                               short_run.log.pos[..., 0], rtol=1e-8, atol=1e-300)


def test_metrics_csv_header(short_run):
    assert outputs.metrics_csv(short_run.metrics).splitlines()[0] == \
        "t,z_axis,envelope_plus,envelope_minus,rms_width,peak_intensity,axial_pz"


def test_atomic_write_leaves_no_temp_and_honours_umask(tmp_path):
    digest = outputs.atomic_write(tmp_path / "a" / "f.txt", "hello\n")
    assert len(digest) == 64
    assert os.listdir(tmp_path / "a") == ["f.txt"]
    mask = os.umask(0)
    os.umask(mask)
    assert stat.S_IMODE(os.stat(tmp_path / "a" / "f.txt").st_mode) == 0o666 & ~mask


def test_atomic_write_failure(tmp_path):
    (tmp_path / "file").write_text("x")
    with pytest.raises(IoFailure):
        outputs.atomic_write(tmp_path / "file" / "child.txt", "y")


@pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "t,ray_id,x,z,px,pz,R,W,H_drift,flags\n",
                                  "t,ray_id,x,z,px,pz,R,W,H_drift,flags\n1,2,3\n",
                                  "t,ray_id,x,z,px,pz,R,W,H_drift,flags\n1,2,3,4,5,6,7,8,9,x\n"])
def test_malformed_csv(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(MalformedCsv):
        outputs.read_trajectories_csv(path)


def test_missing_csv(tmp_path):
    with pytest.raises(IoFailure):
        outputs.read_trajectories_csv(tmp_path / "none.csv")


def test_svg_marks_two_envelope_rays(tmp_path, short_run):
    path = tmp_path / "t.csv"
    outputs.atomic_write(path, outputs.trajectories_csv(short_run.log))
    svg = outputs.trajectories_svg(outputs.read_trajectories_csv(path))
    assert svg.startswith("<svg") and svg.count('class="envelope"') == 2
    assert 'class="initial"' in svg and 'class="final"' in svg


def test_svg_of_zero_step_run(tmp_path):
    res = run_scenario(build_scenario("free_gaussian", {"n_rays": 21, "t_end": 0, "z_end": None}))
    path = tmp_path / "t.csv"
    outputs.atomic_write(path, outputs.trajectories_csv(res.log))
    svg = outputs.trajectories_svg(outputs.read_trajectories_csv(path))
    assert svg.count("<polyline") >= 2 and 'class="final"' not in svg


def test_json_is_sorted_and_finite():
    text = outputs.to_json({"b": np.float64("nan"), "a": np.arange(2)})
    assert text.index('"a"') < text.index('"b"') and '"nan"' in text
