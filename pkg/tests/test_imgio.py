import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from afagraph.imgio import (
    ImageFormatError,
    LabelMap,
    RasterImage,
    boundary_mask,
    image_from_rgb8,
    lab_to_rgb8,
    lab_to_srgb,
    load_image,
    read_label_map,
    render_overlay,
    srgb_to_lab,
    write_label_map,
    write_overlay,
)
from oracles import same_partition, srgb8_to_lab


@pytest.mark.parametrize(
    "rgb, lab",
    [
        ((255, 255, 255), (100.0, 0.0, 0.0)),
        ((0, 0, 0), (0.0, 0.0, 0.0)),
        ((255, 0, 0), (53.24, 80.09, 67.20)),
    ],
)
def test_reference_colours(rgb, lab):
    got = srgb_to_lab(np.array([[rgb]], dtype=np.uint8) / 255.0)[0, 0]
    np.testing.assert_allclose(got, lab, atol=0.01)


def test_lab_matches_formula_oracle(rng):
    pix = rng.integers(0, 256, size=(200, 3))
    got = srgb_to_lab(pix[None] / 255.0)[0]
    want = np.array([srgb8_to_lab(*p) for p in pix.tolist()])
    np.testing.assert_allclose(got, want, atol=1e-3)


def test_lab_round_trip_all_8bit_grey_and_random(rng):
    # the full 16.7M cube is slow; greys plus a large random sample cover the gamut edges
    grey = np.repeat(np.arange(256)[:, None], 3, axis=1)
    pix = np.vstack([grey, rng.integers(0, 256, size=(20000, 3))])
    lab = srgb_to_lab(pix[None] / 255.0)
    back = srgb_to_lab(lab_to_srgb(lab))
    assert np.max(np.abs(back - lab)) < 0.5
    np.testing.assert_array_equal(lab_to_rgb8(lab)[0], pix)


def test_raster_image_validation():
    with pytest.raises(ValueError):
        RasterImage(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        RasterImage(np.zeros((0, 2, 3)))
    with pytest.raises(ValueError):
        RasterImage(np.full((1, 1, 3), np.nan))


def test_load_png_and_ppm(tmp_path):
    rgb = np.array([[[255, 0, 0], [0, 0, 0]]], dtype=np.uint8)
    Image.fromarray(rgb).save(tmp_path / "a.png")
    Image.fromarray(rgb).save(tmp_path / "a.ppm")
    a = load_image(tmp_path / "a.png")
    b = load_image(tmp_path / "a.ppm")
    assert a.shape == (1, 2)
    np.testing.assert_array_equal(a.data, b.data)
    np.testing.assert_allclose(a.data[0, 0], (53.2406, 80.0923, 67.2028), atol=1e-3)


def test_load_rejects_jpeg_and_garbage(tmp_path):
    Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(tmp_path / "a.jpg")
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "a.jpg")
    (tmp_path / "b.png").write_bytes(b"not an image")
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "b.png")
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "missing.png")


def test_csv_label_maps(tmp_path):
    (tmp_path / "a.csv").write_text("0,0\n2,2\n")
    lm = read_label_map(tmp_path / "a.csv")
    assert lm.num_labels == 2
    assert set(np.unique(lm.labels)) == {0, 1}
    (tmp_path / "b.csv").write_text("5\n")
    assert read_label_map(tmp_path / "b.csv").num_labels == 1


@pytest.mark.parametrize("text", ["0,1\n2\n", "0,-1\n1,1\n", ""])
def test_csv_errors(tmp_path, text):
    (tmp_path / "bad.csv").write_text(text)
    with pytest.raises(ImageFormatError):
        read_label_map(tmp_path / "bad.csv")


def test_sixteen_bit_pgm_by_hand(tmp_path):
    values = [0, 1, 1, 300]
    body = b"".join(v.to_bytes(2, "big") for v in values)
    (tmp_path / "a.pgm").write_bytes(b"P5\n2 2\n65535\n" + body)
    lm = read_label_map(tmp_path / "a.pgm")
    assert lm.num_labels == 3
    assert lm.labels.tolist() == [[0, 1], [1, 2]]


def test_label_map_dimension_check(tmp_path):
    (tmp_path / "a.csv").write_text("0,1\n1,1\n")
    with pytest.raises(ImageFormatError):
        read_label_map(tmp_path / "a.csv", shape=(3, 2))


def test_bsd_seg_format(tmp_path):
    text = "format ascii cr\nwidth 3\nheight 2\nsegments 2\ndata\n0 0 0 1\n1 0 2 2\n2 1 0 2\n"
    (tmp_path / "a.seg").write_text(text)
    lm = read_label_map(tmp_path / "a.seg")
    assert lm.labels.tolist() == [[0, 0, 1], [2, 2, 2]]
    (tmp_path / "b.seg").write_text(text + "2 5 0 0\n")
    with pytest.raises(ImageFormatError):
        read_label_map(tmp_path / "b.seg")


@given(arrays(np.int64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.integers(0, 9)))
def test_label_map_write_read_preserves_partition(labels):
    import tempfile
    from pathlib import Path

    lm = LabelMap(labels)
    assert set(np.unique(lm.labels)) == set(range(lm.num_labels))
    with tempfile.TemporaryDirectory() as d:
        for name in ("x.pgm", "x.csv"):
            write_label_map(lm, Path(d) / name)
            back = read_label_map(Path(d) / name)
            assert same_partition(back.labels, labels)


def test_boundary_mask_and_overlay():
    img = image_from_rgb8(np.full((2, 2, 3), 90, np.uint8))
    one = LabelMap(np.zeros((2, 2), int))
    out = render_overlay(img, one)
    assert np.all(out == out[0, 0])
    split = LabelMap(np.array([[0, 1], [0, 1]]))
    mask = boundary_mask(split.labels)
    assert mask.tolist() == [[True, False], [True, False]]
    out = render_overlay(img, split)
    assert out[0, 0].tolist() == [255, 0, 0]
    assert out[0, 1].tolist() != [255, 0, 0]


def test_overlay_is_deterministic(tmp_path, rng):
    img = image_from_rgb8(rng.integers(0, 256, (5, 7, 3)).astype(np.uint8))
    seg = LabelMap(rng.integers(0, 3, (5, 7)))
    write_overlay(img, seg, tmp_path / "a.png")
    write_overlay(img, seg, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
