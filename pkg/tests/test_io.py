import numpy as np
import pytest

from tfcw.datasets import (
    Dataset,
    convert_off_tree,
    load_off,
    load_points_bin,
    sample_mesh_surface,
    save_points_bin,
)
from tfcw.errors import InvalidInput, ParseError
from tfcw.geometry import PointCloud

MINIMAL_OFF = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"


# --- OFF parsing -------------------------------------------------------------

def test_off_minimal(tmp_path):
    path = tmp_path / "tri.off"
    path.write_text(MINIMAL_OFF)
    cloud = load_off(path)
    assert cloud.n == 3
    assert np.array_equal(cloud.points, [[0, 0, 0], [1, 0, 0], [0, 1, 0]])


def test_off_bad_header(tmp_path):
    path = tmp_path / "bad.off"
    path.write_text("OFX\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    with pytest.raises(ParseError) as err:
        load_off(path)
    assert err.value.line == 1


def test_off_fused_header(tmp_path):
    path = tmp_path / "fused.off"
    path.write_text("OFF3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    assert load_off(path).n == 3


def test_off_count_mismatch(tmp_path):
    path = tmp_path / "short.off"
    path.write_text("OFF\n4 0 0\n0 0 0\n1 0 0\n")
    with pytest.raises(ParseError):
        load_off(path)


def test_off_non_numeric_vertex(tmp_path):
    path = tmp_path / "nan.off"
    path.write_text("OFF\n1 0 0\n0 zero 0\n")
    with pytest.raises(ParseError) as err:
        load_off(path)
    assert err.value.line == 3


def test_off_bad_face_index(tmp_path):
    path = tmp_path / "face.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n")
    with pytest.raises(ParseError):
        load_off(path)


def test_off_surface_sampling_centroid(tmp_path):
    path = tmp_path / "tri.off"
    path.write_text(MINIMAL_OFF)
    cloud = load_off(path, sample_points=10_000, seed=0)
    assert cloud.n == 10_000
    # uniform samples of this right triangle average to its centroid
    assert np.abs(cloud.points.mean(axis=0) - [1 / 3, 1 / 3, 0.0]).max() < 0.02


def test_off_comments_and_blank_lines(tmp_path):
    path = tmp_path / "c.off"
    path.write_text("# comment\nOFF\n\n3 1 0\n0 0 0 # inline\n1 0 0\n0 1 0\n3 0 1 2\n")
    assert load_off(path).n == 3


def test_sample_mesh_area_weighting():
    # two triangles, one with 9x the area: samples split roughly 90/10
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0],
                      [10, 0, 0], [13, 0, 0], [10, 3, 0]], float)
    faces = np.array([[0, 1, 2], [3, 4, 5]])
    pts = sample_mesh_surface(verts, faces, 20_000, seed=1)
    frac_large = (pts[:, 0] >= 5.0).mean()
    assert abs(frac_large - 0.9) < 0.02


def test_sample_mesh_degenerate():
    verts = np.zeros((3, 3))
    with pytest.raises(InvalidInput):
        sample_mesh_surface(verts, np.array([[0, 1, 2]]), 10)


# --- points container --------------------------------------------------------

def _toy_dataset():
    rng = np.random.default_rng(0)
    clouds = [
        PointCloud(rng.normal(size=(5, 3)).astype(np.float32).astype(np.float64),
                   class_label=1),
        PointCloud(rng.normal(size=(3, 3)).astype(np.float32).astype(np.float64),
                   point_labels=np.array([0, 2, -1]), class_label=0),
    ]
    return Dataset("toy", clouds, "train", num_classes=3)


def test_points_roundtrip(tmp_path):
    ds = _toy_dataset()
    path = tmp_path / "toy.tfcwpts"
    save_points_bin(ds, path)
    back = load_points_bin(path)
    assert len(back) == 2
    for a, b in zip(ds.clouds, back.clouds):
        assert np.array_equal(a.points, b.points)
        assert a.class_label == b.class_label
        if a.point_labels is None:
            assert b.point_labels is None
        else:
            assert np.array_equal(a.point_labels, b.point_labels)


def test_points_truncated(tmp_path):
    ds = _toy_dataset()
    path = tmp_path / "toy.tfcwpts"
    save_points_bin(ds, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(ParseError):
        load_points_bin(path)


def test_points_bad_magic(tmp_path):
    path = tmp_path / "toy.tfcwpts"
    path.write_bytes(b"WRONGMAG" + b"\x00" * 16)
    with pytest.raises(ParseError):
        load_points_bin(path)


def test_points_empty_container(tmp_path):
    path = tmp_path / "empty.tfcwpts"
    save_points_bin(Dataset("empty", [], "train", 0), path)
    back = load_points_bin(path)
    assert len(back) == 0


def test_points_rejects_other_negative_labels(tmp_path):
    cloud = PointCloud(np.zeros((2, 3)) + np.arange(2)[:, None],
                       point_labels=np.array([-3, 0]))
    with pytest.raises(InvalidInput):
        save_points_bin([cloud], tmp_path / "bad.tfcwpts")


def test_dataset_label_range_enforced():
    with pytest.raises(InvalidInput):
        Dataset("bad", [PointCloud(np.zeros((1, 3)), class_label=5)], "train", 2)


def test_convert_off_tree(tmp_path):
    for ci, cname in enumerate(["ball", "box"]):
        d = tmp_path / cname / "train"
        d.mkdir(parents=True)
        for i in range(2):
            (d / f"{cname}_{i}.off").write_text(MINIMAL_OFF)
    out = tmp_path / "mini.tfcwpts"
    ds = convert_off_tree(tmp_path, out, split="train", sample_points=64, seed=0)
    assert len(ds) == 4
    assert ds.num_classes == 2
    back = load_points_bin(out)
    assert sorted({c.class_label for c in back.clouds}) == [0, 1]
    assert all(c.n == 64 for c in back.clouds)
