"""Sliding windows and per-window connectivity: correlation and negative-distance
similarity matrices plus their rank-thresholded binary adjacencies.

Both streams are built per window and thresholded independently. Binarization
is rank-based top-k over the unique off-diagonal values with k = ceil(0.3 E),
E = M(M-1)/2, which gives every graph the exact same edge density regardless
of the value distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericsError, ShapeError

EDGE_FRACTION = 0.3
PEARSON_STD_FLOOR = 1e-12

DISTANCE_KINDS = ("manhattan", "euclidean", "mahalanobis")


@dataclass(frozen=True)
class WindowSpec:
    window_size: int
    stride: int

    def __post_init__(self):
        if self.window_size < 2:
            raise ShapeError(f"window_size must be >= 2, got {self.window_size}")
        if self.stride < 1:
            raise ShapeError(f"stride must be >= 1, got {self.stride}")

    def count(self, t: int) -> int:
        if self.window_size > t:
            raise ShapeError(f"window_size {self.window_size} exceeds series length {t}")
        return (t - self.window_size) // self.stride + 1


@dataclass(frozen=True)
class DistanceKind:
    kind: str = "euclidean"
    ridge_scale: float = 1e-3

    def __post_init__(self):
        if self.kind not in DISTANCE_KINDS:
            raise ShapeError(f"unknown distance kind {self.kind!r}")
        if self.kind == "mahalanobis" and self.ridge_scale <= 0:
            raise ShapeError("mahalanobis requires ridge_scale > 0")


@dataclass
class WindowedFcPair:
    """One window's similarity matrices and binary adjacencies for both streams."""

    window_index: int
    start: int
    r: np.ndarray
    d: np.ndarray
    a_r: np.ndarray
    a_d: np.ndarray


def extract_windows(signals: np.ndarray, spec: WindowSpec) -> list[np.ndarray]:
    """Fully contained windows starting at 0, SS, 2 SS, ...; views, not copies."""
    signals = np.asarray(signals)
    t = signals.shape[0]
    n = spec.count(t)
    return [signals[i * spec.stride: i * spec.stride + spec.window_size] for i in range(n)]


def pearson_matrix(window: np.ndarray) -> np.ndarray:
    """Pairwise Pearson correlation of ROI columns; flat columns get zero rows."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] < 2:
        raise ShapeError(f"pearson_matrix: need a (WS, M) window with WS >= 2, "
                         f"got {window.shape}")
    centered = window - window.mean(axis=0)
    std = window.std(axis=0)
    live = std >= PEARSON_STD_FLOOR
    safe = np.where(live, std, 1.0)
    z = centered / safe
    r = (z.T @ z) / window.shape[0]
    r[~live, :] = 0.0
    r[:, ~live] = 0.0
    r = 0.5 * (r + r.T)
    np.clip(r, -1.0, 1.0, out=r)
    np.fill_diagonal(r, 1.0)
    return r


def distance_matrix(window: np.ndarray, kind: DistanceKind) -> np.ndarray:
    """Negative pairwise distance between ROI column vectors (diag 0)."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] < 2:
        raise ShapeError(f"distance_matrix: need a (WS, M) window with WS >= 2, "
                         f"got {window.shape}")
    cols = window.T  # (M, WS) vectors
    if kind.kind == "manhattan":
        d = np.abs(cols[:, None, :] - cols[None, :, :]).sum(axis=2)
    elif kind.kind == "euclidean":
        diff = cols[:, None, :] - cols[None, :, :]
        d = np.sqrt((diff * diff).sum(axis=2))
    else:
        ws = window.shape[0]
        centered = cols - cols.mean(axis=0)
        sigma = (centered.T @ centered) / cols.shape[0]
        lam = max(kind.ridge_scale * np.trace(sigma) / ws, 1e-12)
        sigma_reg = sigma + lam * np.eye(ws)
        inv = np.linalg.inv(sigma_reg)
        diff = cols[:, None, :] - cols[None, :, :]
        q = np.einsum("ijk,kl,ijl->ij", diff, inv, diff)
        d = np.sqrt(np.maximum(q, 0.0))
    if not np.all(np.isfinite(d)):
        raise NumericsError(f"non-finite {kind.kind} distance")
    out = -d
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 0.0)
    return out


def topk_edge_count(m: int) -> int:
    e = m * (m - 1) // 2
    return math.ceil(EDGE_FRACTION * e)


def binarize_topk(s: np.ndarray) -> np.ndarray:
    """Keep the k largest unique off-diagonal values as symmetric {0,1} edges.

    Ties at the cut go to the lexicographically smallest (i, j) pairs, so the
    result is a pure function of the input values.
    """
    s = np.asarray(s, dtype=np.float64)
    m = s.shape[0]
    if s.ndim != 2 or s.shape[1] != m or m < 2:
        raise ShapeError(f"binarize_topk: square matrix with M >= 2 required, got {s.shape}")
    iu, ju = np.triu_indices(m, k=1)
    vals = s[iu, ju]
    k = topk_edge_count(m)
    # lexsort's last key is primary: sort by descending value, then ascending (i, j)
    order = np.lexsort((ju, iu, -vals))
    keep = order[:k]
    a = np.zeros((m, m))
    a[iu[keep], ju[keep]] = 1.0
    a[ju[keep], iu[keep]] = 1.0
    return a


def build_fc_pairs(signals: np.ndarray, spec: WindowSpec,
                   kind: DistanceKind) -> list[WindowedFcPair]:
    """Windowed correlation and distance streams for one subject, in window order."""
    pairs = []
    for idx, win in enumerate(extract_windows(signals, spec)):
        r = pearson_matrix(win)
        d = distance_matrix(win, kind)
        pairs.append(WindowedFcPair(window_index=idx, start=idx * spec.stride,
                                    r=r, d=d, a_r=binarize_topk(r),
                                    a_d=binarize_topk(d)))
    return pairs
