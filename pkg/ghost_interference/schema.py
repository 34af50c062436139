from __future__ import annotations
import logging, math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

PSD_TOL = 1e-12
UNIT_TOL = 1e-9

# ---------- Errors ----------
class GhostError(Exception):
    pass

class ConfigError(GhostError, ValueError):
    """Invalid physical parameters or configuration."""

class NonHermitian(ConfigError):
    pass

class NotNormalized(ConfigError):
    pass

class NotPositiveSemidefinite(ConfigError):
    pass

class UnknownConfigKey(ConfigError):
    pass

class NumericalGuard(GhostError, ArithmeticError):
    """A numerical precondition of a computation does not hold."""

class DegenerateCorrelation(NumericalGuard):
    pass

class DegenerateGeometry(NumericalGuard):
    pass

class SpanTooSmall(NumericalGuard):
    pass

class UnderResolved(NumericalGuard):
    pass

class AliasingRisk(NumericalGuard):
    pass

class OutsideEnvelope(NumericalGuard):
    pass

class AnalysisError(GhostError, ValueError):
    pass

class TooFewSamples(AnalysisError):
    pass

class NoExtremaFound(AnalysisError):
    pass

class NoFringePair(AnalysisError):
    pass

class TooFewPeaks(AnalysisError):
    pass


def _require(cond: bool, exc: type, msg: str) -> None:
    if not cond:
        raise exc(msg)

def _positive(name: str, value: float) -> None:
    _require(math.isfinite(value) and value > 0, ConfigError, f"{name} must be finite and > 0; got {value!r}")

def _non_negative(name: str, value: float) -> None:
    _require(math.isfinite(value) and value >= 0, ConfigError, f"{name} must be finite and >= 0; got {value!r}")


def effective_diffusion(lam: float, L: float) -> float:
    """lambda*L/pi: the length^2 that replaces 2*hbar*t/m for a photon with L = c*t."""
    _positive("lambda", lam)
    _non_negative("L", L)
    return lam * L / math.pi


# ---------- Source and geometry ----------
@dataclass(frozen=True)
class SourceParams:
    sigma: float   # 1/m, momentum-correlation width parameter
    omega: float   # m, centre-of-mass spread

    def __post_init__(self):
        _positive("sigma", self.sigma)
        _positive("omega", self.omega)

    def good_correlation(self, epsilon: float, ratio: float = 10.0) -> bool:
        return self.omega >= ratio * epsilon and self.omega * self.sigma >= ratio


@dataclass(frozen=True)
class Geometry:
    z0: float        # slit centres at +z0, 0, -z0
    epsilon: float   # slit width parameter
    lam: float       # wavelength
    L1: float        # slit plane -> D1
    L2: float        # source -> slit plane

    def __post_init__(self):
        _positive("z0", self.z0)
        _positive("epsilon", self.epsilon)
        _positive("lambda", self.lam)
        _non_negative("L1", self.L1)
        _non_negative("L2", self.L2)
        if self.overlapping:
            logger.warning("slits overlap: epsilon=%g >= z0=%g; formulas stay defined but packets are not orthogonal",
                           self.epsilon, self.z0)

    @property
    def D(self) -> float:
        return self.L1 + 2 * self.L2

    @property
    def overlapping(self) -> bool:
        return self.epsilon >= self.z0

    def diffusion(self, L: float) -> float:
        return effective_diffusion(self.lam, L)

    def photon1_width(self) -> float:
        """epsilon^2 + (lambda*L1/(pi*epsilon))^2, the photon-1 envelope denominator at D1."""
        l1 = self.diffusion(self.L1)
        return self.epsilon ** 2 + (l1 / self.epsilon) ** 2

    def gamma_sq(self, source: SourceParams) -> float:
        return self.epsilon ** 2 + 1.0 / source.sigma ** 2

    def gamma_d_sq(self, source: SourceParams) -> float:
        g2 = self.gamma_sq(source)
        return g2 + self.diffusion(self.D) ** 2 / g2


@dataclass(frozen=True)
class ComplexWidth:
    re: float
    im: float

    def __post_init__(self):
        _require(math.isfinite(self.re) and self.re > 0, ConfigError,
                 f"complex width needs a positive real part; got re={self.re!r}")

    @classmethod
    def from_complex(cls, w: complex) -> "ComplexWidth":
        return cls(float(w.real), float(w.imag))

    def __complex__(self) -> complex:
        return complex(self.re, self.im)


# ---------- Which-path detector ----------
@dataclass(frozen=True, eq=False)
class PathDetector:
    """Gram matrix G[i][j] = <d_i|d_j> of the which-path states (2 or 3 paths)."""
    gram: np.ndarray

    def __post_init__(self):
        g = np.array(self.gram, dtype=complex)
        _require(g.ndim == 2 and g.shape[0] == g.shape[1] and g.shape[0] in (2, 3), ConfigError,
                 f"Gram matrix must be 2x2 or 3x3; got shape {g.shape}")
        if not np.allclose(g, g.conj().T, atol=UNIT_TOL, rtol=0):
            raise NonHermitian(f"Gram matrix is not Hermitian: max |G - G^H| = {np.abs(g - g.conj().T).max():.3e}")
        if not np.allclose(np.diag(g), 1.0, atol=UNIT_TOL, rtol=0):
            raise NotNormalized(f"detector states are not normalized: diag(G) = {np.diag(g).real.tolist()}")
        ev = np.linalg.eigvalsh(0.5 * (g + g.conj().T))
        if ev.min() < -PSD_TOL * max(ev.max(), 1.0):
            raise NotPositiveSemidefinite(f"Gram matrix is not positive semidefinite: smallest eigenvalue {ev.min():.3e}")
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)

    @property
    def n_paths(self) -> int:
        return self.gram.shape[0]

    def overlap(self, i: int, j: int) -> float:
        return float(abs(self.gram[i, j]))

    def overlaps(self) -> Tuple[float, ...]:
        """|G_ij| for i < j in row-major order: (g12, g13, g23) or (g12,)."""
        n = self.n_paths
        return tuple(self.overlap(i, j) for i in range(n) for j in range(i + 1, n))

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.gram)

    @classmethod
    def orthogonal(cls, n: int = 3) -> "PathDetector":
        return cls(np.eye(n))

    @classmethod
    def unmarked(cls, n: int = 3) -> "PathDetector":
        return cls(np.ones((n, n)))

    @classmethod
    def uniform(cls, g: float, n: int = 3) -> "PathDetector":
        m = np.full((n, n), g, dtype=complex)
        np.fill_diagonal(m, 1.0)
        return cls(m)

    @classmethod
    def from_overlaps(cls, g12: float, g13: Optional[float] = None, g23: Optional[float] = None,
                      phases: Tuple[float, float, float] = (0.0, 0.0, 0.0)) -> "PathDetector":
        if g13 is None and g23 is None:
            p = np.exp(1j * phases[0])
            return cls(np.array([[1, g12 * p], [g12 * np.conj(p), 1]], dtype=complex))
        e = np.exp(1j * np.asarray(phases))
        m = np.eye(3, dtype=complex)
        m[0, 1], m[0, 2], m[1, 2] = g12 * e[0], g13 * e[1], g23 * e[2]
        m[1, 0], m[2, 0], m[2, 1] = np.conj(m[0, 1]), np.conj(m[0, 2]), np.conj(m[1, 2])
        return cls(m)


def validate_gram(gram) -> PathDetector:
    return PathDetector(np.asarray(gram))


# ---------- Sampled patterns and reports ----------
@dataclass(frozen=True, eq=False)
class CoincidencePattern:
    z2_samples: np.ndarray
    density: np.ndarray
    z1_fixed: float = 0.0
    source: Optional[SourceParams] = None
    geometry: Optional[Geometry] = None
    detector: Optional[PathDetector] = None

    def __post_init__(self):
        z = np.array(self.z2_samples, dtype=float)
        d = np.array(self.density, dtype=float)
        _require(z.ndim == 1 and z.shape == d.shape, ConfigError,
                 f"z2_samples and density must be 1-D of equal length; got {z.shape} and {d.shape}")
        if z.size > 1:
            step = np.diff(z)
            _require(bool(np.all(step > 0)), ConfigError, "z2_samples must be strictly increasing")
            _require(np.allclose(step, step[0], rtol=1e-6, atol=0), ConfigError, "z2_samples must be uniformly spaced")
        _require(bool(np.all(d >= 0)), ConfigError, f"density must be non-negative; min = {d.min():.3e}")
        z.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "z2_samples", z)
        object.__setattr__(self, "density", d)

    @property
    def spacing(self) -> float:
        return float(self.z2_samples[1] - self.z2_samples[0])

    def normalized(self) -> "CoincidencePattern":
        peak = float(self.density.max())
        scale = 1.0 / peak if peak > 0 else 1.0
        return CoincidencePattern(self.z2_samples, self.density * scale, self.z1_fixed,
                                  self.source, self.geometry, self.detector)


@dataclass(frozen=True)
class DualityReport:
    visibility: float
    distinguishability: float
    bound_lhs: float
    margin: float
    two_slit: bool = False

    def __post_init__(self):
        _require(-UNIT_TOL <= self.visibility <= 1 + UNIT_TOL, ConfigError, f"visibility out of [0,1]: {self.visibility}")
        _require(-UNIT_TOL <= self.distinguishability <= 1 + UNIT_TOL, ConfigError,
                 f"distinguishability out of [0,1]: {self.distinguishability}")

    @classmethod
    def build(cls, visibility: float, distinguishability: float, two_slit: bool = False) -> "DualityReport":
        d = distinguishability
        lhs = visibility + d if two_slit else visibility + 2 * d / (3 - d)
        return cls(visibility, d, lhs, 1.0 - lhs, two_slit)
