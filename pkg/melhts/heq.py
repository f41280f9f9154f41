# melhts/heq.py

from typing import List, Optional, Sequence, Tuple

import numpy as np

from melhts.config import logger
from melhts.exceptions import DataError, ParameterError
from melhts.models import HeqLut, HeqMap, Histogram1D, MelSpectrogram


# ---------------------------
# HISTOGRAMS
# ---------------------------

def histogram_1d(values: np.ndarray, bins: int, value_range: Optional[Tuple[float, float]] = None) -> Histogram1D:
    """
    Equal-width histogram over `value_range` (default [min, max] of the
    values). A degenerate range is widened by 0.5 on each side.
    """
    if bins < 2:
        raise ParameterError("bins", f"{bins} must be at least 2")
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DataError("cannot build a histogram from no values")
    low, high = value_range if value_range is not None else (float(values.min()), float(values.max()))
    if high <= low:
        low, high = low - 0.5, high + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(low, high))
    return Histogram1D(bin_edges=edges, counts=counts, total=int(counts.sum()))


def coefficient_ranges(mels: Sequence[MelSpectrogram]) -> np.ndarray:
    """D x 2 array of per-coefficient (min, max) over every frame."""
    if not mels:
        raise DataError("no mel-spectrograms given")
    low = np.min([m.frames.min(axis=0) for m in mels], axis=0)
    high = np.max([m.frames.max(axis=0) for m in mels], axis=0)
    return np.stack([low, high], axis=1)


def estimate_histograms(mels: Sequence[MelSpectrogram], bins: int = 64,
                        ranges: Optional[np.ndarray] = None) -> List[Histogram1D]:
    """
    One histogram per mel coefficient, pooled over every frame of every
    input. Pass shared `ranges` to get histograms that can be merged.

    Raises:
        DataError: If there are no frames.
        ParameterError: If bins < 2 or the inputs disagree on num_filters.
    """
    if not mels:
        raise DataError("no mel-spectrograms given")
    dims = {m.num_filters for m in mels}
    if len(dims) != 1:
        raise ParameterError("num_filters", f"inputs mix coefficient counts {sorted(dims)}")
    stacked = np.concatenate([m.frames for m in mels], axis=0)
    ranges = coefficient_ranges(mels) if ranges is None else np.asarray(ranges, dtype=np.float64)
    return [histogram_1d(stacked[:, d], bins, (float(ranges[d, 0]), float(ranges[d, 1])))
            for d in range(stacked.shape[1])]


def merge_histograms(a: Histogram1D, b: Histogram1D) -> Histogram1D:
    if not np.array_equal(a.bin_edges, b.bin_edges):
        raise ParameterError("bin_edges", "only histograms over identical bins can be merged")
    return Histogram1D(bin_edges=a.bin_edges, counts=a.counts + b.counts, total=a.total + b.total)


# ---------------------------
# CDF MATCHING
# ---------------------------

def _cdf_at_edges(hist: Histogram1D) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(hist.counts))) / hist.total


def empirical_cdf(hist: Histogram1D, x) -> np.ndarray:
    """CDF that is linear inside each bin, 0 below and 1 above the edges."""
    return np.interp(x, hist.bin_edges, _cdf_at_edges(hist))


def quantile(hist: Histogram1D, p) -> np.ndarray:
    """
    Left-continuous inverse of empirical_cdf: the smallest x with
    F(x) >= p, linear inside each non-empty bin.
    """
    p = np.clip(np.asarray(p, dtype=np.float64), 0.0, 1.0)
    cdf = _cdf_at_edges(hist)
    edges = hist.bin_edges
    k = np.clip(np.searchsorted(cdf, p, side="left"), 1, edges.size - 1)
    below, above = cdf[k - 1], cdf[k]
    span = np.where(above > below, above - below, 1.0)
    frac = np.clip((p - below) / span, 0.0, 1.0)
    out = edges[k - 1] + frac * (edges[k] - edges[k - 1])
    return np.where(p <= 0.0, edges[0], out)


def build_lut(src: Histogram1D, tgt: Histogram1D) -> HeqMap:
    """
    Piecewise-linear map x -> Q_tgt(F_src(x)). The knots are the source
    edges plus the source points whose CDF hits a target edge, so the
    composition is linear between consecutive knots.
    """
    if src.total == 0 or tgt.total == 0:
        raise DataError("histograms used for equalization must not be empty")
    inner = quantile(src, _cdf_at_edges(tgt))
    knots = np.unique(np.concatenate([src.bin_edges, inner]))
    values = np.maximum.accumulate(quantile(tgt, empirical_cdf(src, knots)))
    return HeqMap(knots=knots, values=values)


def fit_heq(src_mels: Sequence[MelSpectrogram], tgt_mels: Sequence[MelSpectrogram], bins: int = 64) -> HeqLut:
    """Per-coefficient LUTs mapping generated mels onto the ground-truth distribution."""
    src = estimate_histograms(src_mels, bins)
    tgt = estimate_histograms(tgt_mels, bins)
    if len(src) != len(tgt):
        raise ParameterError("num_filters", f"source has {len(src)} coefficients, target has {len(tgt)}")
    lut = HeqLut(maps=[build_lut(s, t) for s, t in zip(src, tgt)])
    logger.info(f"event=heq_fit coefficients={lut.num_coefficients} bins={bins} "
                f"source_frames={src[0].total} target_frames={tgt[0].total}")
    return lut


def apply_heq(mel: MelSpectrogram, lut: HeqLut) -> MelSpectrogram:
    """
    Maps every coefficient through its LUT. Values outside a map's knot
    range are clamped to the range first; shape and metadata are kept.
    """
    if mel.num_filters != lut.num_coefficients:
        raise ParameterError("num_filters",
                             f"mel has {mel.num_filters} coefficients, lookup table has {lut.num_coefficients}")
    frames = np.empty_like(mel.frames)
    for d, heq_map in enumerate(lut.maps):
        column = np.clip(mel.frames[:, d], heq_map.knots[0], heq_map.knots[-1])
        frames[:, d] = np.interp(column, heq_map.knots, heq_map.values)
    return MelSpectrogram(frames=np.maximum(frames, mel.log_floor), frame_shift_ms=mel.frame_shift_ms,
                          num_filters=mel.num_filters, log_floor=mel.log_floor, sample_rate_hz=mel.sample_rate_hz)
