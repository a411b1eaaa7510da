import json
import math

import numpy as np

from multibump import artifacts


def test_json_is_sorted_and_finite(tmp_path) -> None:
    path = artifacts.write_json(
        tmp_path / "report.json", {"b": np.float64(math.inf), "a": np.arange(3), "c": np.bool_(True)}
    )
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [0, 1, 2], "b": "inf", "c": True}


def test_rows_fill_missing_entries(tmp_path) -> None:
    path = artifacts.write_rows(tmp_path / "sweep.csv", [{"eps": 1e-3, "alpha": 0.5}, {"eps": 1e-4}])
    lines = path.read_text().splitlines()
    assert lines[0] == "alpha,eps"
    assert lines[2].startswith("nan,")
    assert np.allclose(np.genfromtxt(path, delimiter=",", skip_header=1)[:, 1], [1e-3, 1e-4])


def test_writers_are_deterministic(tmp_path) -> None:
    rows = np.array([[1.0, 2.0], [3.0, 4.5]])
    a = artifacts.write_csv(tmp_path / "a.csv", ["x", "y"], rows).read_bytes()
    b = artifacts.write_csv(tmp_path / "b.csv", ["x", "y"], rows).read_bytes()
    assert a == b


def test_raw_dump_with_sidecar(tmp_path) -> None:
    values = np.arange(6, dtype=float).reshape(2, 3)
    path = artifacts.write_raw(tmp_path / "u.raw", values, {"lower": [0, 0], "upper": [1, 1], "counts": [2, 3]})
    assert np.array_equal(np.fromfile(path, dtype="<f8").reshape(2, 3), values)
    sidecar = json.loads((tmp_path / "u.json").read_text())
    assert sidecar["shape"] == [2, 3]
    assert sidecar["dtype"] == "<f8"


def test_pgm_header(tmp_path) -> None:
    mask = np.zeros((4, 3), dtype=bool)
    mask[1:3, 1] = True
    data = artifacts.write_pgm(tmp_path / "mask.pgm", mask).read_bytes()
    assert data.startswith(b"P5\n4 3\n255\n")
    assert len(data) == len(b"P5\n4 3\n255\n") + 12
    assert data.count(255) >= 2


def test_obj_faces_are_one_based(tmp_path) -> None:
    vertices = np.eye(3)
    path = artifacts.write_obj(tmp_path / "s.obj", vertices, np.array([[0, 1, 2]]))
    assert path.read_text().splitlines()[-1] == "f 1 2 3"


def test_svg_is_reproducible(tmp_path) -> None:
    axes = [np.linspace(-1, 1, 11), np.linspace(-1, 1, 7)]
    values = np.add.outer(-axes[0] ** 2, -axes[1] ** 2)
    first = artifacts.write_contour_svg(tmp_path / "a.svg", axes, values, markers=[(0.0, 0.0, "max")])
    second = artifacts.write_contour_svg(tmp_path / "b.svg", axes, values, markers=[(0.0, 0.0, "max")])
    assert first.read_bytes() == second.read_bytes()
