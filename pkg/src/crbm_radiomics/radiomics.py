"""Hand-crafted texture features over an ROI.

Five families: first-order intensity statistics, binary shape descriptors,
gray-level co-occurrence (GLCM), gray-level run-length (GLRLM), and the
same intensity/texture statistics repeated on the four subbands of a
single-level orthonormal Haar decomposition.  The full catalog is 374
features with stable, prefixed names; see FEATURE_COUNT and the name
constants below.

Intensities are quantized to ``levels`` equal-width bins between the
in-ROI minimum and maximum before any texture matrix is built.  GLCM uses
the four offsets (0,1), (1,0), (1,1), (1,-1) with symmetrization; GLRLM
uses the same four directions.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data_model import Image2D, RoiMask
from .errors import EmptyCooccurrenceError, ShapeMismatchError

GLCM_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))
GLRLM_DIRECTIONS = ((0, 1), (1, 0), (1, 1), (1, -1))

FIRST_ORDER_NAMES = ("mean", "variance", "skewness", "kurtosis", "energy",
                     "entropy", "minimum", "maximum", "range", "median",
                     "p10", "p90", "mean_abs_dev")
SHAPE_NAMES = ("area", "perimeter", "compactness", "bbox_width", "bbox_height",
               "extent", "major_axis", "minor_axis", "eccentricity")
GLCM_FEATURE_NAMES = ("contrast", "dissimilarity", "homogeneity", "asm",
                      "entropy", "correlation", "cluster_shade",
                      "cluster_prominence")
GLRLM_FEATURE_NAMES = ("sre", "lre", "gln", "rln", "rp", "lgre", "hgre")
WAVELET_BANDS = ("LL", "LH", "HL", "HH")

FEATURE_COUNT = (len(FIRST_ORDER_NAMES) + len(SHAPE_NAMES)
                 + len(GLCM_OFFSETS) * len(GLCM_FEATURE_NAMES)
                 + len(GLRLM_DIRECTIONS) * len(GLRLM_FEATURE_NAMES)
                 + len(WAVELET_BANDS) * (len(FIRST_ORDER_NAMES)
                                         + len(GLCM_OFFSETS) * len(GLCM_FEATURE_NAMES)
                                         + len(GLRLM_DIRECTIONS) * len(GLRLM_FEATURE_NAMES)))


def _offset_tag(offset) -> str:
    return "_".join(str(x).replace("-", "m") for x in offset)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadiomicsConfig:
    levels: int = 32

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")


@dataclass(frozen=True)
class QuantizedImage:
    """Integer codes in [1, levels] inside the ROI, 0 outside."""

    codes: np.ndarray
    levels: int
    roi: RoiMask

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int32)
        if codes.shape != self.roi.bits.shape:
            raise ShapeMismatchError("codes and ROI dimensions differ")
        inside = codes[self.roi.bits > 0]
        if inside.size and (inside.min() < 1 or inside.max() > self.levels):
            raise ValueError("in-ROI codes must lie in [1, levels]")
        object.__setattr__(self, "codes", codes)


@dataclass(frozen=True)
class FeatureVector:
    names: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if len(self.names) != values.size:
            raise ValueError("names and values length mismatch")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if not np.isfinite(values).all():
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class Glcm:
    """Normalized co-occurrence probabilities at one offset."""

    matrix: np.ndarray
    offset: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeMismatchError("GLCM must be square")
        if m.min() < 0:
            raise ValueError("GLCM entries must be non-negative")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class Glrlm:
    """Run counts, rows = gray level, columns = run length (1-based)."""

    matrix: np.ndarray
    direction: tuple

    def __post_init__(self):
        object.__setattr__(self, "matrix",
                           np.asarray(self.matrix, dtype=np.float64))


# ---------------------------------------------------------------------------
# Quantization
# ---------------------------------------------------------------------------

def _quantize_array(values: np.ndarray, roi_bits: np.ndarray, levels: int) -> np.ndarray:
    inside = roi_bits > 0
    if not inside.any():
        raise ValueError("empty mask")
    lo = values[inside].min()
    hi = values[inside].max()
    codes = np.zeros(values.shape, dtype=np.int32)
    if hi == lo:
        codes[inside] = 1
    else:
        scaled = np.floor((values[inside] - lo) / (hi - lo) * levels).astype(np.int32) + 1
        codes[inside] = np.minimum(scaled, levels)
    return codes


def quantize(img: Image2D, mask: RoiMask, levels: int = 32) -> QuantizedImage:
    """Equal-width binning of in-ROI intensities into [1, levels]."""
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    if img.pixels.shape != mask.bits.shape:
        raise ShapeMismatchError("image and mask dimensions differ")
    codes = _quantize_array(img.pixels, mask.bits, levels)
    return QuantizedImage(codes=codes, levels=levels, roi=mask)


# ---------------------------------------------------------------------------
# First-order statistics
# ---------------------------------------------------------------------------

def _nearest_rank(sorted_vals: np.ndarray, pct: float) -> float:
    rank = int(np.ceil(pct / 100.0 * sorted_vals.size))
    return float(sorted_vals[max(rank, 1) - 1])


def _first_order_values(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    mean = x.mean()
    var = x.var()
    sd = np.sqrt(var)
    if sd > 0:
        skew = float(np.mean((x - mean) ** 3) / sd ** 3)
        kurt = float(np.mean((x - mean) ** 4) / sd ** 4 - 3.0)
    else:
        skew = 0.0
        kurt = 0.0
    energy = float(np.sum(x * x))
    lo, hi = x.min(), x.max()
    if hi > lo:
        counts, _ = np.histogram(x, bins=256, range=(lo, hi))
        p = counts[counts > 0] / x.size
        entropy = float(-np.sum(p * np.log2(p)))
    else:
        entropy = 0.0
    xs = np.sort(x)
    return np.array([
        mean, var, skew, kurt, energy, entropy,
        float(lo), float(hi), float(hi - lo),
        float(np.median(x)),
        _nearest_rank(xs, 10.0), _nearest_rank(xs, 90.0),
        float(np.mean(np.abs(x - mean))),
    ])


def first_order_features(img: Image2D, mask: RoiMask) -> FeatureVector:
    """13 intensity statistics over the in-ROI pixel multiset.

    Variance is population variance; skewness and excess kurtosis are 0 for
    constant regions; entropy uses a 256-bin histogram over the in-ROI
    range (log base 2); percentiles use the nearest-rank rule and the
    median averages the two middle values for even counts.
    """
    if img.pixels.shape != mask.bits.shape:
        raise ShapeMismatchError("image and mask dimensions differ")
    inside = mask.bits > 0
    if not inside.any():
        raise ValueError("empty mask")
    return FeatureVector(names=FIRST_ORDER_NAMES,
                         values=_first_order_values(img.pixels[inside]))


# ---------------------------------------------------------------------------
# Shape
# ---------------------------------------------------------------------------

def shape_features(mask: RoiMask) -> FeatureVector:
    """9 binary-shape descriptors of the mask.

    Perimeter counts boundary edges between a set pixel and an unset (or
    outside) pixel; the axis lengths come from the eigenvalues of the
    second-moment matrix of the set-pixel coordinates (length = 4 sqrt(lambda)).
    """
    bits = mask.bits
    rows, cols = np.nonzero(bits)
    if rows.size == 0:
        raise ValueError("empty mask")
    area = float(rows.size)
    padded = np.zeros((bits.shape[0] + 2, bits.shape[1] + 2), dtype=np.int8)
    padded[1:-1, 1:-1] = bits
    perimeter = float(np.abs(np.diff(padded, axis=0)).sum()
                      + np.abs(np.diff(padded, axis=1)).sum())
    compactness = 4.0 * np.pi * area / perimeter ** 2
    bbox_h = float(rows.max() - rows.min() + 1)
    bbox_w = float(cols.max() - cols.min() + 1)
    extent = area / (bbox_h * bbox_w)
    rc = np.stack([rows, cols]).astype(np.float64)
    cov = np.cov(rc, ddof=0) if rows.size > 1 else np.zeros((2, 2))
    eigvals = np.sort(np.linalg.eigvalsh(cov))[::-1]
    eigvals = np.clip(eigvals, 0.0, None)
    major = 4.0 * np.sqrt(eigvals[0])
    minor = 4.0 * np.sqrt(eigvals[1])
    eccentricity = np.sqrt(1.0 - eigvals[1] / eigvals[0]) if eigvals[0] > 0 else 0.0
    return FeatureVector(names=SHAPE_NAMES, values=np.array([
        area, perimeter, compactness, bbox_w, bbox_h, extent,
        major, minor, eccentricity,
    ]))


# ---------------------------------------------------------------------------
# GLCM
# ---------------------------------------------------------------------------

def glcm_compute(q: QuantizedImage, offset: tuple, symmetric: bool = True) -> Glcm:
    """Co-occurrence probabilities of code pairs at the offset; both pixels
    of a pair must be in-ROI.  Raises EmptyCooccurrenceError if no pair exists."""
    dr, dc = offset
    if (dr, dc) == (0, 0):
        raise ValueError("offset (0, 0) is not a co-occurrence")
    counts = kernels.glcm_counts(q.codes, q.roi.bits, dr, dc, q.levels)
    if symmetric:
        counts = counts + counts.T
    total = counts.sum()
    if total == 0:
        raise EmptyCooccurrenceError(f"no valid pixel pair at offset {offset}")
    return Glcm(matrix=counts / total, offset=(dr, dc))


def _glcm_feature_values(p: np.ndarray) -> np.ndarray:
    levels = p.shape[0]
    idx = np.arange(1, levels + 1, dtype=np.float64)
    i = idx[:, None]
    j = idx[None, :]
    diff = i - j
    contrast = float((p * diff ** 2).sum())
    dissimilarity = float((p * np.abs(diff)).sum())
    homogeneity = float((p / (1.0 + diff ** 2)).sum())
    asm = float((p * p).sum())
    nz = p[p > 0]
    entropy = float(-(nz * np.log2(nz)).sum())
    p_i = p.sum(axis=1)
    p_j = p.sum(axis=0)
    mu_i = float(idx @ p_i)
    mu_j = float(idx @ p_j)
    var_i = float(((idx - mu_i) ** 2) @ p_i)
    var_j = float(((idx - mu_j) ** 2) @ p_j)
    if var_i > 0 and var_j > 0:
        correlation = float(((i - mu_i) * (j - mu_j) * p).sum()
                            / np.sqrt(var_i * var_j))
    else:
        correlation = 0.0
    dev = i + j - mu_i - mu_j
    shade = float((dev ** 3 * p).sum())
    prominence = float((dev ** 4 * p).sum())
    return np.array([contrast, dissimilarity, homogeneity, asm, entropy,
                     correlation, shade, prominence])


def glcm_features(g: Glcm) -> FeatureVector:
    """Haralick-style descriptors of one co-occurrence matrix (8 features)."""
    return FeatureVector(names=GLCM_FEATURE_NAMES,
                         values=_glcm_feature_values(g.matrix))


# ---------------------------------------------------------------------------
# GLRLM
# ---------------------------------------------------------------------------

def glrlm_compute(q: QuantizedImage, direction: tuple) -> Glrlm:
    """Counts of maximal in-ROI runs of equal codes along the direction;
    an out-of-ROI pixel breaks a run."""
    if tuple(direction) not in GLRLM_DIRECTIONS:
        raise ValueError(f"direction must be one of {GLRLM_DIRECTIONS}")
    if not (q.roi.bits > 0).any():
        raise ValueError("empty mask")
    h, w = q.codes.shape
    max_run = max(h, w)
    dr, dc = direction
    counts = kernels.glrlm_counts(q.codes, q.roi.bits, dr, dc, q.levels, max_run)
    return Glrlm(matrix=counts, direction=(dr, dc))


def _glrlm_feature_values(mat: np.ndarray) -> np.ndarray:
    n_runs = mat.sum()
    if n_runs == 0:
        raise ValueError("run-length matrix has zero runs")
    lengths = np.arange(1, mat.shape[1] + 1, dtype=np.float64)
    grays = np.arange(1, mat.shape[0] + 1, dtype=np.float64)
    n_pixels = float((mat * lengths[None, :]).sum())
    by_length = mat.sum(axis=0)
    by_gray = mat.sum(axis=1)
    sre = float((by_length / lengths ** 2).sum() / n_runs)
    lre = float((by_length * lengths ** 2).sum() / n_runs)
    gln = float((by_gray ** 2).sum() / n_runs)
    rln = float((by_length ** 2).sum() / n_runs)
    rp = float(n_runs / n_pixels)
    lgre = float((by_gray / grays ** 2).sum() / n_runs)
    hgre = float((by_gray * grays ** 2).sum() / n_runs)
    return np.array([sre, lre, gln, rln, rp, lgre, hgre])


def glrlm_features(r: Glrlm) -> FeatureVector:
    """Run-emphasis and nonuniformity descriptors (7 features)."""
    return FeatureVector(names=GLRLM_FEATURE_NAMES,
                         values=_glrlm_feature_values(r.matrix))


# ---------------------------------------------------------------------------
# Haar wavelet
# ---------------------------------------------------------------------------

def _pad_even(arr: np.ndarray) -> np.ndarray:
    h, w = arr.shape
    return np.pad(arr, ((0, h % 2), (0, w % 2)), mode="edge")


def wavelet_decompose(img: Image2D):
    """Single-level orthonormal 2-D Haar transform.

    Odd dimensions are edge-replicated to even first.  Returns the four
    half-size subbands (LL, LH, HL, HH); LH carries horizontal detail
    (differences along columns), HL vertical detail.
    """
    x = _pad_even(img.pixels)
    a = x[0::2, 0::2]
    b = x[0::2, 1::2]
    c = x[1::2, 0::2]
    d = x[1::2, 1::2]
    return {
        "LL": (a + b + c + d) / 2.0,
        "LH": (a - b + c - d) / 2.0,
        "HL": (a + b - c - d) / 2.0,
        "HH": (a - b - c + d) / 2.0,
    }


def wavelet_reconstruct(subbands: dict) -> np.ndarray:
    """Inverse of wavelet_decompose; returns the (padded) image array."""
    ll, lh, hl, hh = (subbands[k] for k in WAVELET_BANDS)
    h, w = ll.shape
    out = np.empty((2 * h, 2 * w))
    out[0::2, 0::2] = (ll + lh + hl + hh) / 2.0
    out[0::2, 1::2] = (ll - lh + hl - hh) / 2.0
    out[1::2, 0::2] = (ll + lh - hl - hh) / 2.0
    out[1::2, 1::2] = (ll - lh - hl + hh) / 2.0
    return out


def downsample_mask(mask: RoiMask) -> RoiMask:
    """2x2 any-set downsampling, matching the wavelet subband geometry."""
    bits = _pad_even(mask.bits)
    stacked = (bits[0::2, 0::2] | bits[0::2, 1::2]
               | bits[1::2, 0::2] | bits[1::2, 1::2])
    return RoiMask(bits=stacked)


# ---------------------------------------------------------------------------
# Full catalog
# ---------------------------------------------------------------------------

def _texture_features(values: np.ndarray, roi: RoiMask, levels: int, prefix: str):
    """GLCM (4 offsets) + GLRLM (4 directions) on one value plane."""
    q = QuantizedImage(codes=_quantize_array(values, roi.bits, levels),
                       levels=levels, roi=roi)
    names, vals = [], []
    for offset in GLCM_OFFSETS:
        tag = _offset_tag(offset)
        try:
            feats = _glcm_feature_values(glcm_compute(q, offset).matrix)
        except EmptyCooccurrenceError:
            # degenerate ROI at this offset: keep the catalog total, emit zeros
            feats = np.zeros(len(GLCM_FEATURE_NAMES))
        names += [f"{prefix}glcm_{tag}_{n}" for n in GLCM_FEATURE_NAMES]
        vals.append(feats)
    for direction in GLRLM_DIRECTIONS:
        tag = _offset_tag(direction)
        mat = glrlm_compute(q, direction).matrix
        names += [f"{prefix}glrlm_{tag}_{n}" for n in GLRLM_FEATURE_NAMES]
        vals.append(_glrlm_feature_values(mat))
    return names, np.concatenate(vals)


def extract_all(img: Image2D, mask: RoiMask,
                cfg: RadiomicsConfig = RadiomicsConfig()) -> FeatureVector:
    """The full 374-feature catalog with stable prefixed names.

    original plane: first-order (13) + shape (9) + GLCM (32) + GLRLM (28);
    each Haar subband: first-order (13) + GLCM (32) + GLRLM (28).
    """
    if img.pixels.shape != mask.bits.shape:
        raise ShapeMismatchError("image and mask dimensions differ")
    inside = mask.bits > 0
    if not inside.any():
        raise ValueError("empty mask")
    names = [f"original_firstorder_{n}" for n in FIRST_ORDER_NAMES]
    values = [_first_order_values(img.pixels[inside])]
    names += [f"shape_{n}" for n in SHAPE_NAMES]
    values.append(shape_features(mask).values)
    tex_names, tex_vals = _texture_features(img.pixels, mask, cfg.levels, "original_")
    names += tex_names
    values.append(tex_vals)

    subbands = wavelet_decompose(img)
    sub_mask = downsample_mask(mask)
    sub_inside = sub_mask.bits > 0
    for band in WAVELET_BANDS:
        plane = subbands[band]
        names += [f"wavelet_{band}_firstorder_{n}" for n in FIRST_ORDER_NAMES]
        values.append(_first_order_values(plane[sub_inside]))
        tex_names, tex_vals = _texture_features(plane, sub_mask, cfg.levels,
                                                f"wavelet_{band}_")
        names += tex_names
        values.append(tex_vals)
    return FeatureVector(names=tuple(names), values=np.concatenate(values))
