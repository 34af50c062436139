from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import signal

from .schema import (
    CoincidencePattern, ConfigError, NoExtremaFound, NoFringePair, TooFewPeaks, TooFewSamples,
)

logger = logging.getLogger(__name__)

MIN_SAMPLES = 16
SECONDARY_RATIO = 0.5
SECONDARY_POWER = 0.1
EDGE_SPACING = 0.75

# ---------- Extrema ----------
@dataclass(frozen=True)
class Extremum:
    position: float
    value: float


@dataclass(frozen=True)
class FringeVisibility:
    order: int          # signed count of principal maxima from the central one
    position: float
    i_max: float
    i_min: float
    visibility: float


@dataclass(frozen=True)
class FringeReport:
    primary_width: float
    secondary_width: Optional[float]
    visibility: float
    peak_positions: Tuple[float, ...]


def _refine(z: np.ndarray, d: np.ndarray, idx: np.ndarray) -> List[Extremum]:
    h = z[1] - z[0]
    out = []
    for i in idx:
        y0, y1, y2 = d[i - 1], d[i], d[i + 1]
        curv = y0 - 2.0 * y1 + y2
        delta = 0.5 * (y0 - y2) / curv if curv != 0 else 0.0
        out.append(Extremum(float(z[i] + delta * h), float(y1 - 0.25 * (y0 - y2) * delta)))
    return out


def find_extrema(pattern: CoincidencePattern) -> Tuple[List[Extremum], List[Extremum]]:
    """Interior local maxima and minima, refined by a parabola through each extremum and its neighbours."""
    z, d = pattern.z2_samples, pattern.density
    if z.size < MIN_SAMPLES:
        raise TooFewSamples(f"pattern has {z.size} samples; at least {MIN_SAMPLES} are needed")
    imax, _ = signal.find_peaks(d)
    imin, _ = signal.find_peaks(-d)
    if imax.size == 0 and imin.size == 0:
        raise NoExtremaFound("pattern has no interior extremum (flat or monotone)")
    return _refine(z, d, imax), _refine(z, d, imin)


def _local_prominence(m: Extremum, minima: List[Extremum]) -> float:
    left = [x.value for x in minima if x.position < m.position]
    right = [x.value for x in minima if x.position > m.position]
    sides = ([left[-1]] if left else []) + ([right[0]] if right else [])
    return m.value - max(sides) if sides else m.value


def principal_maxima(maxima: List[Extremum], minima: List[Extremum],
                     secondary_ratio: float = SECONDARY_RATIO) -> List[Extremum]:
    """Drop maxima much less prominent than their neighbouring maxima (three-slit secondary peaks).

    Neighbours are combined by geometric mean so a Gaussian envelope cancels to first order.
    An outermost maximum has a single neighbour and the envelope falloff can sink it below
    the ratio; it is kept anyway when it sits at least EDGE_SPACING principal spacings
    beyond the nearest kept maximum.
    """
    minima = sorted(minima, key=lambda x: x.position)
    prom = np.maximum([_local_prominence(m, minima) for m in maxima], np.finfo(float).tiny)
    n = len(maxima)
    keep = []
    for i in range(n):
        nb = [prom[j] for j in (i - 1, i + 1) if 0 <= j < n]
        if not nb or prom[i] >= secondary_ratio * float(np.exp(np.mean(np.log(nb)))):
            keep.append(i)
    if len(keep) >= 2:
        step = float(np.median(np.diff([maxima[i].position for i in keep])))
        for edge, inner in ((0, keep[0]), (n - 1, keep[-1])):
            if edge not in keep and abs(maxima[edge].position - maxima[inner].position) >= EDGE_SPACING * step:
                keep.append(edge)
    return [maxima[i] for i in sorted(keep)]


# ---------- Visibility ----------
def _pair_minima(peaks: List[Extremum], minima: List[Extremum],
                 centre: Optional[float]) -> List[FringeVisibility]:
    if not peaks:
        return []
    minima = sorted(minima, key=lambda x: x.position)
    if centre is None:
        c = int(np.argmax([p.value for p in peaks]))
    else:
        c = int(np.argmin([abs(p.position - centre) for p in peaks]))
    centre = peaks[c].position
    out = []
    for k, p in enumerate(peaks):
        if k == c:
            continue
        if p.position > centre:
            cand = [x for x in minima if centre < x.position < p.position]
            mn = cand[-1] if cand else None
        else:
            cand = [x for x in minima if p.position < x.position < centre]
            mn = cand[0] if cand else None
        if mn is None:
            continue
        v = (p.value - mn.value) / (p.value + mn.value)
        out.append(FringeVisibility(k - c, p.position, p.value, mn.value, float(np.clip(v, 0.0, 1.0))))
    return out


def fringe_visibilities(pattern: CoincidencePattern, secondary_ratio: float = SECONDARY_RATIO,
                        centre: Optional[float] = None) -> List[FringeVisibility]:
    """Per-fringe records counted from the central maximum (the highest one, or the one nearest `centre`)."""
    maxima, minima = find_extrema(pattern)
    return _pair_minima(principal_maxima(maxima, minima, secondary_ratio), minima, centre)


def visibility(pattern: CoincidencePattern, fringe: int = 1, allow_flat: bool = False,
               secondary_ratio: float = SECONDARY_RATIO, centre: Optional[float] = None) -> float:
    """(I_max - I_min)/(I_max + I_min) for an off-centre fringe and its neighbouring minimum.

    When both sides hold a fringe of the requested order the larger value is returned.
    `allow_flat` gives 0.0 for an unmodulated pattern (no extrema or a single principal
    maximum); a modulated pattern that lacks the requested order still raises NoFringePair.
    """
    if fringe < 1:
        raise ConfigError(f"fringe order must be >= 1; got {fringe}")
    try:
        maxima, minima = find_extrema(pattern)
    except NoExtremaFound:
        if allow_flat:
            return 0.0
        raise
    peaks = principal_maxima(maxima, minima, secondary_ratio)
    if allow_flat and len(peaks) < 2:
        logger.debug("single principal maximum; reporting zero visibility")
        return 0.0
    hits = [r.visibility for r in _pair_minima(peaks, minima, centre) if abs(r.order) == fringe]
    if not hits:
        raise NoFringePair(f"no off-centre fringe of order {fringe} with a neighbouring minimum "
                           f"({len(peaks)} principal maxima)")
    return max(hits)


# ---------- Widths ----------
def _power(z: np.ndarray, d: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    x = d - d.mean()
    return np.abs(np.exp(-2j * np.pi * np.outer(freqs, z)) @ x) ** 2


def fringe_widths(pattern: CoincidencePattern, secondary_ratio: float = SECONDARY_RATIO) -> FringeReport:
    maxima, minima = find_extrema(pattern)
    peaks = principal_maxima(maxima, minima, secondary_ratio)
    if len(peaks) < 3:
        raise TooFewPeaks(f"{len(peaks)} principal maxima resolved; at least 3 are needed")
    pos = np.array([p.position for p in peaks])
    primary = float(np.median(np.diff(pos)))
    fp = 1.0 / primary
    z, d = pattern.z2_samples, pattern.density
    p_primary = _power(z, d, np.linspace(0.75 * fp, 1.25 * fp, 101)).max()
    scan = np.linspace(1.5 * fp, 2.5 * fp, 401)
    p2 = _power(z, d, scan)
    secondary = None
    if p2.max() > SECONDARY_POWER * p_primary:
        secondary = float(1.0 / scan[int(np.argmax(p2))])
    vis = visibility(pattern, allow_flat=True, secondary_ratio=secondary_ratio)
    return FringeReport(primary, secondary, vis, tuple(float(x) for x in pos))


def rms_deviation(a, b) -> float:
    """RMS difference of two patterns after scaling each to unit peak."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigError(f"patterns differ in shape: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a / a.max() - b / b.max()) ** 2)))
