import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from afagraph.features import (
    FeatureMatrix,
    bilateral_features,
    bilateral_image,
    exponential_smooth,
    gaussian_features,
    gaussian_image,
    ikde_image,
    ikde_smooth,
    mlab,
)
from afagraph.imgio import LabelMap, RasterImage
from afagraph.superpixel import scale_from_label_map

finite = st.floats(-200, 200, allow_nan=False)


def test_constant_image_features():
    img = RasterImage(np.full((4, 5, 3), [30.0, -4.0, 9.0]))
    sc = scale_from_label_map(LabelMap(np.arange(20).reshape(4, 5) % 3))
    F = mlab(sc, img)
    np.testing.assert_allclose(F.F, np.tile([[30.0], [-4.0], [9.0]], (1, 3)))
    assert not F.smoothed


def test_single_pixel_and_mean():
    data = np.zeros((1, 3, 3))
    data[0, :, 0] = [10.0, 30.0, 77.0]
    sc = scale_from_label_map(LabelMap(np.array([[0, 0, 1]])))
    F = mlab(sc, RasterImage(data))
    assert F.F[0, 0] == 20.0
    assert F.F[0, 1] == 77.0


def test_size_mismatch():
    sc = scale_from_label_map(LabelMap(np.zeros((2, 2), int)))
    with pytest.raises(ValueError):
        mlab(sc, RasterImage(np.zeros((3, 2, 3))))


def test_feature_matrix_validation():
    with pytest.raises(ValueError):
        FeatureMatrix(np.array([[np.inf]]))
    with pytest.raises(ValueError):
        FeatureMatrix(np.zeros((0, 3)))


def test_smoothing_examples():
    assert exponential_smooth(np.array([0.0, 2.0]), 0.5)[1] == 1.0
    np.testing.assert_array_equal(exponential_smooth(np.array([4.0, 0.0, 0.0]), 0.5), [4.0, 2.0, 1.0])


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 12)), elements=finite))
def test_alpha_one_is_identity(F):
    out = ikde_smooth(FeatureMatrix(F), 1.0)
    assert out.smoothed
    assert np.array_equal(out.F, F)


@given(
    arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(1, 12)), elements=finite),
    st.floats(0.01, 1.0),
)
def test_smoothed_values_stay_in_prefix_hull(F, alpha):
    out = ikde_smooth(FeatureMatrix(F), alpha).F
    for t in range(F.shape[1]):
        lo = F[:, : t + 1].min(axis=1)
        hi = F[:, : t + 1].max(axis=1)
        assert np.all(out[:, t] >= lo - 1e-9) and np.all(out[:, t] <= hi + 1e-9)


def test_ordering_and_errors():
    F = FeatureMatrix(np.array([[0.0, 4.0, 8.0]]))
    out = ikde_smooth(F, 0.5, ordering=np.array([2, 1, 0]))
    np.testing.assert_allclose(out.F, [[3.0, 6.0, 8.0]])
    with pytest.raises(ValueError):
        ikde_smooth(out, 0.5)
    for a in (0.0, 1.5):
        with pytest.raises(ValueError):
            ikde_smooth(F, a)


def test_baseline_filters_keep_constants(rng):
    img = RasterImage(np.full((6, 7, 3), 12.0))
    for fn in (gaussian_image, bilateral_image):
        np.testing.assert_allclose(fn(img).data, img.data)
    np.testing.assert_allclose(ikde_image(img, 0.3).data, img.data)
    F = FeatureMatrix(np.full((3, 9), 5.0))
    for fn in (gaussian_features, bilateral_features):
        out = fn(F)
        assert out.smoothed
        np.testing.assert_allclose(out.F, F.F)
    noisy = FeatureMatrix(rng.normal(0, 10, (3, 50)))
    assert gaussian_features(noisy).F.std() < noisy.F.std()
