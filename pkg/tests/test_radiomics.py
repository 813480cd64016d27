"""Feature-extraction oracles: hand-computed fixtures and scipy cross-checks."""

import numpy as np
import pytest
import scipy.stats

from crbm_radiomics import radiomics
from crbm_radiomics.data_model import Image2D, RoiMask
from crbm_radiomics.errors import EmptyCooccurrenceError, ShapeMismatchError
from crbm_radiomics.radiomics import (
    FEATURE_COUNT,
    FIRST_ORDER_NAMES,
    FeatureVector,
    QuantizedImage,
    RadiomicsConfig,
    extract_all,
    first_order_features,
    glcm_compute,
    glcm_features,
    glrlm_compute,
    glrlm_features,
    quantize,
    shape_features,
    wavelet_decompose,
    wavelet_reconstruct,
)
from crbm_radiomics.seeding import derive_rng


def full_mask(shape):
    return RoiMask(bits=np.ones(shape, dtype=np.uint8))


# ---------------------------------------------------------------------------
# Feature vector container
# ---------------------------------------------------------------------------

def test_feature_vector_rejects_duplicates_and_non_finite():
    with pytest.raises(ValueError):
        FeatureVector(names=("a", "a"), values=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        FeatureVector(names=("a", "b"), values=np.array([1.0, np.inf]))
    fv = FeatureVector(names=("a", "b"), values=np.array([1.0, 2.0]))
    assert len(fv) == 2


# ---------------------------------------------------------------------------
# Quantization
# ---------------------------------------------------------------------------

def test_quantize_equal_width_hand_case():
    img = Image2D(pixels=np.array([[0.0, 0.25, 0.5, 0.75, 1.0]]))
    q = quantize(img, full_mask((1, 5)), levels=4)
    assert q.codes.tolist() == [[1, 2, 3, 4, 4]]


def test_quantize_constant_region_maps_to_one():
    img = Image2D(pixels=np.full((3, 3), 0.4))
    q = quantize(img, full_mask((3, 3)), levels=32)
    assert set(q.codes.ravel()) == {1}


def test_quantize_marks_outside_pixels_zero():
    bits = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    img = Image2D(pixels=np.array([[0.1, 0.9], [0.5, 0.8]]))
    q = quantize(img, RoiMask(bits=bits), levels=8)
    assert q.codes[0, 1] == 0
    assert (q.codes[bits > 0] >= 1).all()


def test_quantize_uses_roi_range_only():
    # the bright outside pixel must not stretch the bins
    bits = np.array([[1, 1, 0]], dtype=np.uint8)
    img = Image2D(pixels=np.array([[0.2, 0.4, 1.0]]))
    q = quantize(img, RoiMask(bits=bits), levels=2)
    assert q.codes.tolist() == [[1, 2, 0]]


def test_quantize_validation_errors():
    img = Image2D(pixels=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        quantize(img, full_mask((2, 2)), levels=1)
    with pytest.raises(ShapeMismatchError):
        quantize(img, full_mask((3, 3)))
    with pytest.raises(ValueError):
        quantize(img, RoiMask(bits=np.zeros((2, 2), dtype=np.uint8)))


# ---------------------------------------------------------------------------
# First order
# ---------------------------------------------------------------------------

def test_first_order_matches_scipy_on_random_data():
    rng = derive_rng(1, "fo")
    x = rng.random((6, 7))
    fv = first_order_features(Image2D(pixels=x), full_mask((6, 7)))
    got = dict(zip(fv.names, fv.values))
    flat = x.ravel()
    assert got["mean"] == pytest.approx(flat.mean(), abs=1e-12)
    assert got["variance"] == pytest.approx(flat.var(), abs=1e-12)
    assert got["skewness"] == pytest.approx(scipy.stats.skew(flat), abs=1e-10)
    assert got["kurtosis"] == pytest.approx(
        scipy.stats.kurtosis(flat, fisher=True, bias=True), abs=1e-10)
    assert got["energy"] == pytest.approx(np.sum(flat ** 2), abs=1e-12)
    assert got["minimum"] == flat.min()
    assert got["maximum"] == flat.max()
    assert got["range"] == pytest.approx(np.ptp(flat), abs=1e-12)
    assert got["median"] == pytest.approx(np.median(flat), abs=1e-12)
    assert got["mean_abs_dev"] == pytest.approx(
        np.mean(np.abs(flat - flat.mean())), abs=1e-12)


def test_first_order_percentiles_use_nearest_rank():
    x = np.arange(1.0, 11.0)  # 1..10
    fv = first_order_features(Image2D(pixels=x.reshape(2, 5) / 10.0),
                              full_mask((2, 5)))
    got = dict(zip(fv.names, fv.values))
    assert got["p10"] == pytest.approx(0.1)  # ceil(0.1 * 10) = rank 1
    assert got["p90"] == pytest.approx(0.9)  # ceil(0.9 * 10) = rank 9
    assert got["median"] == pytest.approx(0.55)


def test_first_order_entropy_hand_cases():
    # half zeros, half ones: one bit; constant region: zero
    img = Image2D(pixels=np.array([[0.0, 1.0], [1.0, 0.0]]))
    fv = first_order_features(img, full_mask((2, 2)))
    got = dict(zip(fv.names, fv.values))
    assert got["entropy"] == pytest.approx(1.0, abs=1e-12)

    const = first_order_features(Image2D(pixels=np.full((2, 2), 0.3)),
                                 full_mask((2, 2)))
    cg = dict(zip(const.names, const.values))
    assert cg["entropy"] == 0.0
    assert cg["skewness"] == 0.0
    assert cg["kurtosis"] == 0.0
    assert cg["variance"] == 0.0


def test_first_order_ignores_pixels_outside_roi():
    bits = np.array([[1, 1, 0]], dtype=np.uint8)
    img = Image2D(pixels=np.array([[0.2, 0.4, 0.9]]))
    fv = first_order_features(img, RoiMask(bits=bits))
    got = dict(zip(fv.names, fv.values))
    assert got["mean"] == pytest.approx(0.3, abs=1e-12)
    assert got["maximum"] == pytest.approx(0.4)
    assert len(fv) == len(FIRST_ORDER_NAMES)


# ---------------------------------------------------------------------------
# Shape
# ---------------------------------------------------------------------------

def test_shape_rectangle_hand_values():
    bits = np.zeros((9, 15), dtype=np.uint8)
    bits[2:7, 3:14] = 1  # 5 rows x 11 cols solid rectangle
    fv = shape_features(RoiMask(bits=bits))
    got = dict(zip(fv.names, fv.values))
    assert got["area"] == 55.0
    assert got["perimeter"] == 2 * (5 + 11)
    assert got["bbox_width"] == 11.0
    assert got["bbox_height"] == 5.0
    assert got["extent"] == 1.0
    # discrete uniform over width w has variance (w^2 - 1) / 12
    assert got["major_axis"] == pytest.approx(4 * np.sqrt(120 / 12), abs=1e-10)
    assert got["minor_axis"] == pytest.approx(4 * np.sqrt(24 / 12), abs=1e-10)
    assert got["eccentricity"] == pytest.approx(np.sqrt(1 - 2 / 10), abs=1e-10)


def test_shape_square_compactness_is_pi_over_four():
    bits = np.zeros((6, 6), dtype=np.uint8)
    bits[1:5, 1:5] = 1
    fv = shape_features(RoiMask(bits=bits))
    got = dict(zip(fv.names, fv.values))
    assert got["compactness"] == pytest.approx(np.pi / 4.0, abs=1e-12)


def test_shape_perimeter_counts_concave_boundary():
    # plus sign of five pixels: 12 boundary edges
    bits = np.zeros((5, 5), dtype=np.uint8)
    bits[2, 1:4] = 1
    bits[1:4, 2] = 1
    fv = shape_features(RoiMask(bits=bits))
    got = dict(zip(fv.names, fv.values))
    assert got["area"] == 5.0
    assert got["perimeter"] == 12.0


def test_shape_single_pixel_is_degenerate_but_finite():
    bits = np.zeros((3, 3), dtype=np.uint8)
    bits[1, 1] = 1
    fv = shape_features(RoiMask(bits=bits))
    got = dict(zip(fv.names, fv.values))
    assert got["area"] == 1.0
    assert got["perimeter"] == 4.0
    assert got["major_axis"] == 0.0
    assert got["eccentricity"] == 0.0


def test_shape_translation_invariance():
    rng = derive_rng(2, "sh")
    blob = (rng.random((4, 6)) < 0.6).astype(np.uint8)
    blob[2, 3] = 1
    a = np.zeros((12, 12), dtype=np.uint8)
    b = np.zeros((12, 12), dtype=np.uint8)
    a[1:5, 2:8] = blob
    b[6:10, 4:10] = blob
    va = shape_features(RoiMask(bits=a)).values
    vb = shape_features(RoiMask(bits=b)).values
    np.testing.assert_allclose(va, vb, atol=1e-12)


# ---------------------------------------------------------------------------
# GLCM
# ---------------------------------------------------------------------------

def hand_quantized(codes, bits=None):
    codes = np.asarray(codes, dtype=np.int32)
    if bits is None:
        bits = (codes > 0).astype(np.uint8)
    return QuantizedImage(codes=codes, levels=int(codes.max()),
                          roi=RoiMask(bits=np.asarray(bits, dtype=np.uint8)))


def test_glcm_hand_computed_matrix():
    q = hand_quantized([[1, 1, 2], [2, 2, 3]])
    g = glcm_compute(q, (0, 1))
    want = np.array([[2, 1, 0], [1, 2, 1], [0, 1, 0]]) / 8.0
    np.testing.assert_allclose(g.matrix, want, atol=1e-15)


def test_glcm_feature_hand_values():
    q = hand_quantized([[1, 1, 2], [2, 2, 3]])
    fv = glcm_features(glcm_compute(q, (0, 1)))
    got = dict(zip(fv.names, fv.values))
    # from the known 8-pair matrix above
    assert got["contrast"] == pytest.approx(0.5, abs=1e-12)
    assert got["dissimilarity"] == pytest.approx(0.5, abs=1e-12)
    assert got["asm"] == pytest.approx((4 + 1 + 1 + 4 + 1 + 1) / 64, abs=1e-12)
    assert got["homogeneity"] == pytest.approx(
        (2 + 2) / 8 + (1 / 2) * 4 / 8, abs=1e-12)
    assert got["entropy"] == pytest.approx(
        -(2 * (2 / 8) * np.log2(2 / 8) + 4 * (1 / 8) * np.log2(1 / 8)), abs=1e-12)


def test_glcm_matrix_is_symmetric_and_normalized():
    rng = derive_rng(3, "glcm")
    codes = rng.integers(1, 6, size=(9, 9)).astype(np.int32)
    q = QuantizedImage(codes=codes, levels=5, roi=full_mask((9, 9)))
    for offset in radiomics.GLCM_OFFSETS:
        g = glcm_compute(q, offset)
        np.testing.assert_allclose(g.matrix, g.matrix.T, atol=1e-15)
        assert g.matrix.sum() == pytest.approx(1.0, abs=1e-12)
        assert g.matrix.shape == (5, 5)


def test_glcm_requires_in_roi_pairs():
    bits = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    codes = np.array([[1, 2], [2, 1]], dtype=np.int32)
    q = QuantizedImage(codes=codes, levels=2, roi=RoiMask(bits=bits))
    with pytest.raises(EmptyCooccurrenceError):
        glcm_compute(q, (0, 1))  # diagonal neighbours only
    g = glcm_compute(q, (1, 1))
    assert g.matrix[0, 0] == 1.0  # the single 1-1 diagonal pair


def test_glcm_rejects_zero_offset():
    q = hand_quantized([[1, 2]])
    with pytest.raises(ValueError):
        glcm_compute(q, (0, 0))


def test_glcm_correlation_of_column_stripes():
    codes = np.tile(np.arange(1, 9, dtype=np.int32), (8, 1))
    q = QuantizedImage(codes=codes, levels=8, roi=full_mask((8, 8)))
    fv_across = glcm_features(glcm_compute(q, (0, 1)))
    fv_along = glcm_features(glcm_compute(q, (1, 0)))
    across = dict(zip(fv_across.names, fv_across.values))
    along = dict(zip(fv_along.names, fv_along.values))
    # along a column every pair repeats the same code: perfect correlation
    assert along["correlation"] == pytest.approx(1.0, abs=1e-12)
    assert along["contrast"] == 0.0
    # across columns neighbours differ by exactly one level
    assert across["contrast"] == pytest.approx(1.0, abs=1e-12)
    assert across["correlation"] > 0.8


# ---------------------------------------------------------------------------
# GLRLM
# ---------------------------------------------------------------------------

def test_glrlm_hand_computed_runs():
    q = hand_quantized([[1, 1, 2, 2, 2, 1]])
    r = glrlm_compute(q, (0, 1))
    want = np.zeros((2, 6))
    want[0, 1] = 1  # run of 1s, length 2
    want[1, 2] = 1  # run of 2s, length 3
    want[0, 0] = 1  # run of 1s, length 1
    np.testing.assert_array_equal(r.matrix, want)


def test_glrlm_feature_hand_values():
    fv = glrlm_features(glrlm_compute(hand_quantized([[1, 1, 2, 2, 2, 1]]),
                                      (0, 1)))
    got = dict(zip(fv.names, fv.values))
    assert got["sre"] == pytest.approx((1 + 1 / 4 + 1 / 9) / 3, abs=1e-12)
    assert got["lre"] == pytest.approx((1 + 4 + 9) / 3, abs=1e-12)
    assert got["gln"] == pytest.approx((4 + 1) / 3, abs=1e-12)
    assert got["rln"] == pytest.approx(1.0, abs=1e-12)
    assert got["rp"] == pytest.approx(0.5, abs=1e-12)
    assert got["lgre"] == pytest.approx((2 + 1 / 4) / 3, abs=1e-12)
    assert got["hgre"] == pytest.approx((2 + 4) / 3, abs=1e-12)


def test_glrlm_out_of_roi_pixel_breaks_run():
    codes = np.array([[1, 1, 1, 1]], dtype=np.int32)
    bits = np.array([[1, 1, 0, 1]], dtype=np.uint8)
    q = QuantizedImage(codes=codes * (bits > 0), levels=1, roi=RoiMask(bits=bits))
    r = glrlm_compute(q, (0, 1))
    assert r.matrix[0, 1] == 1  # leading pair
    assert r.matrix[0, 0] == 1  # isolated trailing pixel
    assert r.matrix.sum() == 2


def test_glrlm_diagonal_direction_hand_case():
    q = hand_quantized([[1, 2], [2, 1]])
    r = glrlm_compute(q, (1, 1))
    # main diagonal: run "1,1"? no: codes are 1 then 1 -> a length-2 run
    assert r.matrix[0, 1] == 1
    # off-diagonals are single pixels: two length-1 runs of gray 2
    assert r.matrix[1, 0] == 2


def test_glrlm_rejects_unknown_direction():
    with pytest.raises(ValueError):
        glrlm_compute(hand_quantized([[1, 2]]), (0, -1))


def test_glrlm_total_pixels_equals_roi_size():
    rng = derive_rng(4, "rl")
    codes = rng.integers(1, 5, size=(7, 7)).astype(np.int32)
    bits = (rng.random((7, 7)) < 0.8).astype(np.uint8)
    bits[0, 0] = 1
    q = QuantizedImage(codes=codes * (bits > 0), levels=4, roi=RoiMask(bits=bits))
    lengths = np.arange(1, 8)
    for direction in radiomics.GLRLM_DIRECTIONS:
        mat = glrlm_compute(q, direction).matrix
        assert (mat * lengths[None, :]).sum() == bits.sum()


# ---------------------------------------------------------------------------
# Haar wavelet
# ---------------------------------------------------------------------------

def test_wavelet_two_by_two_hand_case():
    img = Image2D(pixels=np.array([[0.1, 0.2], [0.3, 0.4]]))
    bands = wavelet_decompose(img)
    assert bands["LL"][0, 0] == pytest.approx(0.5, abs=1e-15)
    assert bands["LH"][0, 0] == pytest.approx(-0.1, abs=1e-15)
    assert bands["HL"][0, 0] == pytest.approx(-0.2, abs=1e-15)
    assert bands["HH"][0, 0] == pytest.approx(0.0, abs=1e-15)


def test_wavelet_round_trip_even_dims():
    rng = derive_rng(5, "wv")
    x = rng.random((16, 12))
    back = wavelet_reconstruct(wavelet_decompose(Image2D(pixels=x)))
    np.testing.assert_allclose(back, x, atol=1e-10)


def test_wavelet_round_trip_odd_dims_reproduces_padded_image():
    rng = derive_rng(6, "wvo")
    x = rng.random((7, 9))
    back = wavelet_reconstruct(wavelet_decompose(Image2D(pixels=x)))
    assert back.shape == (8, 10)
    np.testing.assert_allclose(back[:7, :9], x, atol=1e-10)
    np.testing.assert_allclose(back[7, :9], x[6, :], atol=1e-10)  # edge pad


def test_wavelet_conserves_energy():
    rng = derive_rng(7, "wve")
    x = rng.random((10, 10))
    bands = wavelet_decompose(Image2D(pixels=x))
    total = sum(float(np.sum(b ** 2)) for b in bands.values())
    assert total == pytest.approx(float(np.sum(x ** 2)), abs=1e-9)


def test_wavelet_constant_image_has_detail_zero():
    bands = wavelet_decompose(Image2D(pixels=np.full((6, 6), 0.25)))
    assert np.abs(bands["LH"]).max() == 0.0
    assert np.abs(bands["HL"]).max() == 0.0
    assert np.abs(bands["HH"]).max() == 0.0
    np.testing.assert_allclose(bands["LL"], 0.5, atol=1e-15)


def test_downsample_mask_any_set_rule():
    bits = np.array([[1, 0, 0, 0],
                     [0, 0, 0, 0],
                     [0, 0, 1, 1],
                     [0, 0, 1, 1]], dtype=np.uint8)
    small = radiomics.downsample_mask(RoiMask(bits=bits))
    np.testing.assert_array_equal(small.bits, [[1, 0], [0, 1]])


# ---------------------------------------------------------------------------
# Full catalog
# ---------------------------------------------------------------------------

def random_image_and_mask(rng, size=18):
    img = Image2D(pixels=rng.random((size, size)))
    bits = np.zeros((size, size), dtype=np.uint8)
    bits[3:size - 3, 4:size - 2] = 1
    return img, RoiMask(bits=bits)


def test_extract_all_has_374_unique_finite_features():
    rng = derive_rng(8, "cat")
    img, mask = random_image_and_mask(rng)
    fv = extract_all(img, mask)
    assert len(fv) == FEATURE_COUNT == 374
    assert len(set(fv.names)) == 374
    assert np.isfinite(fv.values).all()


def test_extract_all_name_inventory():
    rng = derive_rng(9, "names")
    img, mask = random_image_and_mask(rng)
    names = extract_all(img, mask).names
    count = lambda s: sum(1 for n in names if n.startswith(s))
    assert count("original_firstorder_") == 13
    assert count("shape_") == 9
    assert count("original_glcm_") == 32
    assert count("original_glrlm_") == 28
    for band in ("LL", "LH", "HL", "HH"):
        assert count(f"wavelet_{band}_firstorder_") == 13
        assert count(f"wavelet_{band}_glcm_") == 32
        assert count(f"wavelet_{band}_glrlm_") == 28


def test_extract_all_invariant_under_even_translation():
    rng = derive_rng(10, "shift")
    content = rng.random((6, 6))
    blob = (rng.random((6, 6)) < 0.7).astype(np.uint8)
    blob[3, 3] = 1

    base = np.full((20, 20), 0.5)
    img_a = base.copy()
    img_a[2:8, 2:8] = content
    bits_a = np.zeros((20, 20), dtype=np.uint8)
    bits_a[2:8, 2:8] = blob

    img_b = base.copy()
    img_b[8:14, 6:12] = content  # shifted by (6, 4): preserves Haar parity
    bits_b = np.zeros((20, 20), dtype=np.uint8)
    bits_b[8:14, 6:12] = blob

    fa = extract_all(Image2D(pixels=img_a), RoiMask(bits=bits_a))
    fb = extract_all(Image2D(pixels=img_b), RoiMask(bits=bits_b))
    np.testing.assert_allclose(fa.values, fb.values, atol=1e-10)


def test_extract_all_respects_levels_config():
    rng = derive_rng(11, "lv")
    img, mask = random_image_and_mask(rng, size=14)
    a = extract_all(img, mask, RadiomicsConfig(levels=8))
    b = extract_all(img, mask, RadiomicsConfig(levels=32))
    # contrast grows with the number of levels on continuous noise
    ga = dict(zip(a.names, a.values))
    gb = dict(zip(b.names, b.values))
    assert gb["original_glcm_0_1_contrast"] > ga["original_glcm_0_1_contrast"]


def test_extract_all_single_pixel_roi_zero_fills_glcm():
    img = Image2D(pixels=np.random.default_rng(0).random((8, 8)))
    bits = np.zeros((8, 8), dtype=np.uint8)
    bits[4, 4] = 1
    fv = extract_all(img, RoiMask(bits=bits))
    got = dict(zip(fv.names, fv.values))
    assert len(fv) == 374
    assert got["original_glcm_0_1_contrast"] == 0.0
    assert got["original_glrlm_0_1_rp"] == 1.0  # one run of one pixel
