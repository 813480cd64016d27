"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The package spends nearly all of its time in five inner loops: the three
convolution kernels used by the CRBM (valid cross-correlation for hidden
activations, full convolution for visible reconstruction, and the K x K
weight-gradient correlation) and the two texture-matrix counters (GLCM
pair counts, GLRLM run counts).  Each kernel exists twice:

* ``_nb_*``  -- numba ``@njit`` loops, compiled lazily and cached on disk;
* ``_np_*``  -- vectorized numpy, used when numba is unavailable or when
  the environment variable ``CRBM_RADIOMICS_NUMBA`` is set to ``0``,
  ``false`` or ``off``.

Both paths implement identical arithmetic (same summation structure), so
results agree to float64 rounding; the equivalence is covered by tests and
``benchmarks/bench_kernels.py`` compares their speed.

The active implementation is chosen once at import time.  ``BACKENDS``
keeps both variants addressable so benchmarks and tests can compare them
without re-importing the module.
"""

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "corr_valid",
    "conv_full",
    "corr_grad",
    "glcm_counts",
    "glrlm_counts",
    "active_backend",
    "BACKENDS",
]


def _numba_requested() -> bool:
    flag = os.environ.get("CRBM_RADIOMICS_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _np_corr_valid(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of image v (N,N) with filters w (M,K,K) -> (M,H,H)."""
    m, k, _ = w.shape
    windows = sliding_window_view(v, (k, k))          # (H, H, K, K)
    h = windows.shape[0]
    flat = windows.reshape(h * h, k * k)
    out = flat @ w.reshape(m, k * k).T                # (H*H, M)
    return np.ascontiguousarray(out.T.reshape(m, h, h))


def _np_conv_full(hmaps: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Full convolution of hidden maps (M,H,H) with filters (M,K,K), summed over
    filters -> (N,N) with N = H + K - 1."""
    m, hside, _ = hmaps.shape
    k = w.shape[1]
    n = hside + k - 1
    pad = k - 1
    out = np.zeros((n, n))
    wf = w[:, ::-1, ::-1]                             # flipped: full conv == valid corr on padded maps
    for i in range(m):
        padded = np.zeros((hside + 2 * pad, hside + 2 * pad))
        padded[pad:pad + hside, pad:pad + hside] = hmaps[i]
        windows = sliding_window_view(padded, (k, k)).reshape(n * n, k * k)
        out += (windows @ wf[i].ravel()).reshape(n, n)
    return out


def _np_corr_grad(v: np.ndarray, p: np.ndarray) -> np.ndarray:
    """K x K weight-gradient patches: grad[m,r,s] = sum_ij p[m,i,j] * v[i+r, j+s]."""
    m, hside, _ = p.shape
    n = v.shape[0]
    k = n - hside + 1
    windows = sliding_window_view(v, (hside, hside))  # (K, K, H, H)
    flat = windows.reshape(k * k, hside * hside)
    out = flat @ p.reshape(m, hside * hside).T        # (K*K, M)
    return np.ascontiguousarray(out.T.reshape(m, k, k))


def _np_glcm_counts(codes: np.ndarray, roi: np.ndarray, dr: int, dc: int,
                    levels: int) -> np.ndarray:
    """Raw co-occurrence counts of code pairs at offset (dr, dc); both pixels in-ROI."""
    h, w = codes.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    if r1 <= r0 or c1 <= c0:
        return np.zeros((levels, levels))
    a = codes[r0:r1, c0:c1]
    b = codes[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    valid = (roi[r0:r1, c0:c1] > 0) & (roi[r0 + dr:r1 + dr, c0 + dc:c1 + dc] > 0)
    if not valid.any():
        return np.zeros((levels, levels))
    pairs = (a[valid].astype(np.int64) - 1) * levels + (b[valid].astype(np.int64) - 1)
    counts = np.bincount(pairs, minlength=levels * levels)
    return counts.reshape(levels, levels).astype(np.float64)


def _np_glrlm_counts(codes: np.ndarray, roi: np.ndarray, dr: int, dc: int,
                     levels: int, max_run: int) -> np.ndarray:
    """Counts of maximal in-ROI runs of equal codes along direction (dr, dc)."""
    x = np.where(roi > 0, codes, 0).astype(np.int64)  # 0 breaks runs (codes are >= 1)
    if (dr, dc) == (0, 1):
        lines = list(x)
    elif (dr, dc) == (1, 0):
        lines = list(x.T)
    elif (dr, dc) == (1, 1):
        h, w = x.shape
        lines = [np.diagonal(x, off) for off in range(-(h - 1), w)]
    elif (dr, dc) == (1, -1):
        h, w = x.shape
        flipped = np.fliplr(x)
        lines = [np.diagonal(flipped, off) for off in range(-(h - 1), w)]
    else:
        raise ValueError(f"unsupported run direction {(dr, dc)}")
    out = np.zeros((levels, max_run))
    for line in lines:
        if line.size == 0:
            continue
        breaks = np.flatnonzero(np.diff(line) != 0)
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks, [line.size - 1]))
        for s, e in zip(starts, ends):
            val = line[s]
            if val > 0:
                out[val - 1, min(e - s, max_run - 1)] += 1.0
    return out


_NUMPY_IMPL = {
    "corr_valid": _np_corr_valid,
    "conv_full": _np_conv_full,
    "corr_grad": _np_corr_grad,
    "glcm_counts": _np_glcm_counts,
    "glrlm_counts": _np_glrlm_counts,
}

BACKENDS = {"numpy": _NUMPY_IMPL}

# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _nb_corr_valid(v, w):
        m, k, _ = w.shape
        n = v.shape[0]
        hside = n - k + 1
        out = np.zeros((m, hside, hside))
        for f in range(m):
            for i in range(hside):
                for j in range(hside):
                    acc = 0.0
                    for r in range(k):
                        for s in range(k):
                            acc += w[f, r, s] * v[i + r, j + s]
                    out[f, i, j] = acc
        return out

    @numba.njit(cache=True)
    def _nb_conv_full(hmaps, w):
        m, hside, _ = hmaps.shape
        k = w.shape[1]
        n = hside + k - 1
        out = np.zeros((n, n))
        for f in range(m):
            for i in range(hside):
                for j in range(hside):
                    hv = hmaps[f, i, j]
                    if hv == 0.0:
                        continue
                    for r in range(k):
                        for s in range(k):
                            out[i + r, j + s] += w[f, r, s] * hv
        return out

    @numba.njit(cache=True)
    def _nb_corr_grad(v, p):
        m, hside, _ = p.shape
        n = v.shape[0]
        k = n - hside + 1
        out = np.zeros((m, k, k))
        for f in range(m):
            for r in range(k):
                for s in range(k):
                    acc = 0.0
                    for i in range(hside):
                        for j in range(hside):
                            acc += p[f, i, j] * v[i + r, j + s]
                    out[f, r, s] = acc
        return out

    @numba.njit(cache=True)
    def _nb_glcm_counts(codes, roi, dr, dc, levels):
        h, w = codes.shape
        out = np.zeros((levels, levels))
        for i in range(h):
            i2 = i + dr
            if i2 < 0 or i2 >= h:
                continue
            for j in range(w):
                j2 = j + dc
                if j2 < 0 or j2 >= w:
                    continue
                if roi[i, j] > 0 and roi[i2, j2] > 0:
                    out[codes[i, j] - 1, codes[i2, j2] - 1] += 1.0
        return out

    @numba.njit(cache=True)
    def _nb_glrlm_counts(codes, roi, dr, dc, levels, max_run):
        h, w = codes.shape
        out = np.zeros((levels, max_run))
        for i in range(h):
            for j in range(w):
                if roi[i, j] == 0:
                    continue
                # run start: predecessor along the direction is absent or different
                pi, pj = i - dr, j - dc
                if 0 <= pi < h and 0 <= pj < w and roi[pi, pj] > 0 \
                        and codes[pi, pj] == codes[i, j]:
                    continue
                length = 1
                ni, nj = i + dr, j + dc
                while 0 <= ni < h and 0 <= nj < w and roi[ni, nj] > 0 \
                        and codes[ni, nj] == codes[i, j]:
                    length += 1
                    ni += dr
                    nj += dc
                out[codes[i, j] - 1, min(length, max_run) - 1] += 1.0
        return out

    BACKENDS["numba"] = {
        "corr_valid": _nb_corr_valid,
        "conv_full": _nb_conv_full,
        "corr_grad": _nb_corr_grad,
        "glcm_counts": _nb_glcm_counts,
        "glrlm_counts": _nb_glrlm_counts,
    }

_ACTIVE = "numba" if (_HAVE_NUMBA and _numba_requested()) else "numpy"

corr_valid = BACKENDS[_ACTIVE]["corr_valid"]
conv_full = BACKENDS[_ACTIVE]["conv_full"]
corr_grad = BACKENDS[_ACTIVE]["corr_grad"]
glcm_counts = BACKENDS[_ACTIVE]["glcm_counts"]
glrlm_counts = BACKENDS[_ACTIVE]["glrlm_counts"]


def active_backend() -> str:
    return _ACTIVE
