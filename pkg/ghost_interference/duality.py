from __future__ import annotations
import logging, math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from .analysis import MIN_SAMPLES, visibility
from .analytic import conditional_packets, detector_pattern, post_slit_state
from .oracle import GridSpec, oracle_coincidence
from .schema import (
    CoincidencePattern, ConfigError, DegenerateCorrelation, DegenerateGeometry, DualityReport, Geometry,
    OutsideEnvelope, PathDetector, SourceParams, TooFewSamples,
)

logger = logging.getLogger(__name__)

SLACK = 1e-9
ENVELOPE_WIDTHS = 3.0
BACKGROUND_FLOOR = 1e-6
PATTERN_SOURCES = ("analytic", "pattern", "oracle")


@dataclass(frozen=True)
class DualitySample:
    detector: PathDetector
    report: DualityReport
    pattern_source: str
    sides: Optional[Tuple[float, float]] = None     # analytic V2 at +z2 and -z2

    def violates(self, slack: float = SLACK) -> bool:
        return self.report.margin < -slack

    def mirror_report(self) -> Optional[DualityReport]:
        """The relation evaluated on the larger of the two analytic sides."""
        if self.sides is None:
            return None
        r = self.report
        return DualityReport.build(min(max(self.sides), 1.0), r.distinguishability, r.two_slit)

    def mirror_violates(self, slack: float = SLACK) -> bool:
        m = self.mirror_report()
        return m is not None and m.margin < -slack


# ---------- Which-path quantities ----------
def distinguishability(detector: PathDetector) -> float:
    """1 - mean pairwise overlap |<d_i|d_j>|."""
    ov = detector.overlaps()
    return float(min(1.0, max(0.0, 1.0 - sum(ov) / len(ov))))


def visibility_bound(detector: PathDetector) -> float:
    s = float(sum(detector.overlaps()))
    if detector.n_paths == 2:
        return s
    return 3.0 * s / (6.0 + s)


def second_fringe_position(geom: Geometry) -> float:
    if geom.z0 < 1e-3 * geom.epsilon:
        raise DegenerateGeometry(f"z0={geom.z0:g} is below 1e-3*epsilon; no fringes to pick")
    return 2.0 * geom.lam * geom.D / geom.z0


def analytic_v2(detector: PathDetector, source: SourceParams, geom: Geometry, z2: float) -> float:
    """Fringe visibility at z2 from the maximum and minimum of the detector-weighted ghost pattern."""
    if not source.good_correlation(geom.epsilon):
        raise DegenerateCorrelation(
            f"analytic visibility needs good correlation: Omega={source.omega:g}, sigma={source.sigma:g}, "
            f"epsilon={geom.epsilon:g}")
    if geom.z0 < 1e-3 * geom.epsilon:
        raise DegenerateGeometry(f"z0={geom.z0:g} is below 1e-3*epsilon")
    gd2 = geom.gamma_d_sq(source)
    if abs(z2) > ENVELOPE_WIDTHS * math.sqrt(gd2):
        raise OutsideEnvelope(f"|z2|={abs(z2):g} exceeds {ENVELOPE_WIDTHS:g} envelope widths ({math.sqrt(gd2):g})")
    x = 2.0 * z2 * geom.z0 / gd2
    if detector.n_paths == 2:
        return float(detector.overlap(0, 1) / math.cosh(2.0 * x))
    zeta = 1.0 / geom.photon1_width() + 1.0 / gd2
    c = geom.z0 ** 2 * zeta
    alpha = 2.0 * (math.exp(c) + 2.0 * math.exp(-c) * math.cosh(2.0 * x))
    g12, g13, g23 = detector.overlaps()
    xp = g12 * math.exp(x) + g13 * math.exp(-c) + g23 * math.exp(-x)
    return float(3.0 * xp / (alpha + xp))


def fringe_v2_sides(detector: PathDetector, source: SourceParams, geom: Geometry,
                    z2: Optional[float] = None) -> Tuple[float, float]:
    """Analytic visibility at +z2 and -z2, by default the second off-centre fringe.

    The two sides exchange the weights of |<d1|d2>| and |<d2|d3>|, so they differ
    whenever those overlaps do.
    """
    z2 = second_fringe_position(geom) if z2 is None else abs(z2)
    return analytic_v2(detector, source, geom, z2), analytic_v2(detector, source, geom, -z2)


def fringe_v2(detector: PathDetector, source: SourceParams, geom: Geometry, z2: Optional[float] = None) -> float:
    """Analytic visibility at the second off-centre fringe, the lower of the two sides."""
    return min(fringe_v2_sides(detector, source, geom, z2))


def _fringe_order(geom: Geometry, two_slit: bool) -> int:
    period = geom.lam * geom.D / geom.z0 / (2.0 if two_slit else 1.0)
    return max(1, int(round(second_fringe_position(geom) / period)))


def _default_window(source: SourceParams, geom: Geometry, samples: int = 2001) -> np.ndarray:
    half = ENVELOPE_WIDTHS * math.sqrt(geom.gamma_d_sq(source))
    return np.linspace(-half, half, samples)


def fringe_contrast(pattern: CoincidencePattern, background: CoincidencePattern) -> CoincidencePattern:
    """Pattern divided by the fully marked background, over the span where the background
    stays above BACKGROUND_FLOOR of its peak. The shared envelope cancels."""
    bg = background.density
    idx = np.flatnonzero(bg >= BACKGROUND_FLOOR * bg.max())
    if idx.size < MIN_SAMPLES:
        raise TooFewSamples(f"background exceeds the floor at {idx.size} samples; at least {MIN_SAMPLES} are needed")
    keep = slice(idx[0], idx[-1] + 1)
    ratio = pattern.density[keep] / np.maximum(bg[keep], np.finfo(float).tiny)
    return CoincidencePattern(pattern.z2_samples[keep], ratio, pattern.z1_fixed,
                              pattern.source, pattern.geometry, pattern.detector)


def measured_v2(detector: PathDetector, source: SourceParams, geom: Geometry, pattern_source: str = "pattern",
                z2_grid=None, spec: Optional[GridSpec] = None, exact: bool = False) -> float:
    """Second-fringe visibility read off a sampled pattern against its fully marked background."""
    two = detector.n_paths == 2
    slits = "AC" if two else "ABC"
    if pattern_source == "pattern":
        z2 = _default_window(source, geom) if z2_grid is None else np.asarray(z2_grid, dtype=float)
        packets = conditional_packets(source, geom, exact)

        def sample(d: PathDetector) -> CoincidencePattern:
            return detector_pattern(post_slit_state(source, geom, packets, d, slits), z2)
    elif pattern_source == "oracle":
        def sample(d: PathDetector) -> CoincidencePattern:
            return oracle_coincidence(source, geom, spec, "gaussian", slits, d)
    else:
        raise ConfigError(f"measured visibility needs pattern_source 'pattern' or 'oracle'; got {pattern_source!r}")
    contrast = fringe_contrast(sample(detector), sample(PathDetector.orthogonal(len(slits))))
    return visibility(contrast, fringe=_fringe_order(geom, two), allow_flat=True, centre=0.0)


# ---------- Checks ----------
def check_duality(detector: PathDetector, source: SourceParams, geom: Geometry, pattern_source: str = "analytic",
                  z2_grid=None, spec: Optional[GridSpec] = None, exact: bool = False) -> DualitySample:
    if pattern_source not in PATTERN_SOURCES:
        raise ConfigError(f"pattern_source must be one of {PATTERN_SOURCES}; got {pattern_source!r}")
    d = distinguishability(detector)
    sides = None
    if pattern_source == "analytic":
        sides = fringe_v2_sides(detector, source, geom)
        v2 = min(sides)
    else:
        v2 = measured_v2(detector, source, geom, pattern_source, z2_grid, spec, exact)
    report = DualityReport.build(min(v2, 1.0), d, two_slit=detector.n_paths == 2)
    return DualitySample(detector, report, pattern_source, sides)


def two_slit_check(overlap, source: SourceParams, geom: Geometry, pattern_source: str = "analytic",
                   z2_grid=None, spec: Optional[GridSpec] = None, exact: bool = False) -> DualitySample:
    """Slit B closed, two-state detector with |<d_1|d_2>| = overlap: checks V2 + D <= 1."""
    detector = overlap if isinstance(overlap, PathDetector) else PathDetector.from_overlaps(float(overlap))
    if detector.n_paths != 2:
        raise ConfigError(f"two-slit check needs a two-state detector; got {detector.n_paths} paths")
    return check_duality(detector, source, geom, pattern_source, z2_grid, spec, exact)


# ---------- Random detectors ----------
def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def sample_gram(seed: int, count: int, dim: int = 3, n_paths: int = 3) -> List[PathDetector]:
    """Gram matrices of random detector states mixing a shared vector, orthogonal axes and noise."""
    if count < 1:
        raise ConfigError(f"count must be >= 1; got {count}")
    if dim < n_paths:
        raise ConfigError(f"dim={dim} cannot hold {n_paths} orthogonal detector states")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        shared, orth, noise = np.sqrt(rng.dirichlet([0.5, 0.5, 0.5]))
        u = _unit(rng, dim)
        vecs = []
        for i in range(n_paths):
            e = np.zeros(dim, dtype=complex)
            e[i] = np.exp(2j * np.pi * rng.random())
            v = shared * u + orth * e + noise * _unit(rng, dim)
            vecs.append(v / np.linalg.norm(v))
        m = np.array(vecs)
        gram = m.conj() @ m.T
        np.fill_diagonal(gram, 1.0)
        out.append(PathDetector(gram))
    return out


def sweep(seed: int, count: int, source: SourceParams, geom: Geometry, n_paths: int = 3,
          pattern_source: str = "analytic", progress: bool = False, spec: Optional[GridSpec] = None,
          exact: bool = False) -> List[DualitySample]:
    detectors = sample_gram(seed, count, n_paths=n_paths)
    it = tqdm(detectors, desc="duality sweep", disable=not progress)
    return [check_duality(d, source, geom, pattern_source, None, spec, exact) for d in it]


def violations(samples: List[DualitySample], slack: float = SLACK) -> List[DualitySample]:
    bad = [s for s in samples if s.violates(slack)]
    if bad:
        logger.warning("%d of %d samples break the duality bound (worst margin %.3e)",
                       len(bad), len(samples), min(s.report.margin for s in bad))
    return bad


def mirror_violations(samples: List[DualitySample], slack: float = SLACK) -> List[DualitySample]:
    """Samples whose larger analytic side breaks the bound; measured samples carry no sides."""
    bad = [s for s in samples if s.mirror_violates(slack)]
    if bad:
        logger.info("%d of %d samples break the bound on the mirror fringe (worst margin %.3e)",
                    len(bad), len(samples), min(s.mirror_report().margin for s in bad))
    return bad
