from __future__ import annotations
import logging, math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import integrate

from .schema import (
    ComplexWidth, CoincidencePattern, ConfigError, DegenerateCorrelation, DegenerateGeometry,
    Geometry, PathDetector, SourceParams,
)

logger = logging.getLogger(__name__)

SLIT_ORDER = "ABC"
DEGENERACY_TOL = 1e-12
NORMALIZATIONS = ("closed_form", "quadrature")


def slit_centres(z0, slits: str = SLIT_ORDER) -> Tuple:
    """Centres of the open slits: A at +z0, B at 0, C at -z0."""
    sign = {"A": 1.0, "B": 0.0, "C": -1.0}
    return tuple(sign[s] * z0 for s in slits)


def check_slits(slits: str) -> str:
    s = "".join(ch for ch in SLIT_ORDER if ch in slits.upper())
    if not s or len(s) != len(slits) or len(set(slits.upper())) != len(slits):
        raise ConfigError(f"slits must be a non-empty subset of 'ABC' without repeats; got {slits!r}")
    return s


# ---------- Source state ----------
def epr_position_space(source: SourceParams, z1, z2):
    """Generalized EPR amplitude at the source, normalized to unit probability."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    pref = math.sqrt(2.0 * source.sigma / (math.pi * source.omega))
    return pref * np.exp(-((z1 - z2) * source.sigma) ** 2) * np.exp(-((z1 + z2) ** 2) / (4.0 * source.omega ** 2))


def uncertainties(source: SourceParams) -> Tuple[float, float]:
    dz = math.sqrt(source.omega ** 2 + 1.0 / (4.0 * source.sigma ** 2))
    dk = 0.5 * math.sqrt(source.sigma ** 2 + 1.0 / (4.0 * source.omega ** 2))
    return dz, dk


def marginal_std(source: SourceParams) -> Tuple[float, float]:
    """Standard deviations of the single-photon position and wavenumber marginals."""
    dz, dk = uncertainties(source)
    return dz / 2.0, 2.0 * dk


# ---------- Conditional packets ----------
@dataclass(frozen=True)
class ConditionalPacketParams:
    gamma_cap: ComplexWidth
    z0_prime: complex
    c2_norm: complex
    gamma_sq: float
    weights: Tuple[complex, complex, complex] = (1.0, 1.0, 1.0)   # slits A, B, C
    exact: bool = False

    @property
    def gamma(self) -> complex:
        return complex(self.gamma_cap)

    def weight(self, slit: str) -> complex:
        return self.weights[SLIT_ORDER.index(slit)]


def _exact_terms(source: SourceParams, geom: Geometry) -> Tuple[complex, complex, float]:
    s = geom.diffusion(geom.L2)
    u = 1.0 / (2.0 * source.sigma ** 2) + 1j * s
    v = 2.0 * source.omega ** 2 + 1j * s
    return u, v, s


def conditional_packets(source: SourceParams, geom: Geometry, exact: bool = False) -> ConditionalPacketParams:
    g2 = geom.gamma_sq(source)
    s = geom.diffusion(geom.L2)
    if not exact:
        gamma = complex(g2, 2.0 * s)
        z0p = complex(geom.z0)
        weights = (1.0 + 0j, 1.0 + 0j, 1.0 + 0j)
    else:
        if abs(4.0 * source.omega ** 2 * source.sigma ** 2 - 1.0) < DEGENERACY_TOL:
            raise DegenerateCorrelation(
                f"4*Omega^2*sigma^2 = 1 makes the conditional centre undefined (sigma={source.sigma}, Omega={source.omega})")
        if 4.0 * source.omega ** 2 < 1.0 / source.sigma ** 2:
            raise DegenerateCorrelation(
                f"exact packets need 4*Omega^2 >= 1/sigma^2; got 4*Omega^2={4 * source.omega ** 2:.3e}, "
                f"1/sigma^2={1 / source.sigma ** 2:.3e}")
        u, v, _ = _exact_terms(source, geom)
        e2 = geom.epsilon ** 2
        den = u + v + 2.0 * e2
        gamma = (2.0 * u * v + e2 * (u + v)) / den
        z0p = geom.z0 * (v - u) / den
        weights = tuple(complex(np.exp(-2.0 * c ** 2 / den)) for c in slit_centres(geom.z0))
    gw = ComplexWidth.from_complex(gamma)
    c2 = (2.0 * (1.0 / gamma).real / math.pi) ** 0.25
    shift = abs(z0p - geom.z0) / geom.z0
    if shift > 1e-2:
        logger.debug("conditional centre moved by %.3g of z0 (exact=%s)", shift, exact)
    return ConditionalPacketParams(gw, complex(z0p), complex(c2), g2, weights, exact)


def closed_form_gamma(source: SourceParams, geom: Geometry) -> complex:
    """Gamma as the ratio form of the slit decomposition, lengths substituted for 2ht/m."""
    s = geom.diffusion(geom.L2)
    e2 = geom.epsilon ** 2
    w2 = 4.0 * source.omega ** 2
    n0 = geom.gamma_sq(source) + e2 / (w2 * source.sigma ** 2)
    d0 = 1.0 + e2 / source.omega ** 2 + 1.0 / (w2 * source.sigma ** 2)
    return (n0 + 1j * s) / (d0 + 1j * s / w2) + 1j * s


def closed_form_z0_prime(source: SourceParams, geom: Geometry) -> float:
    u0 = 1.0 / (2.0 * source.sigma ** 2)
    v0 = 2.0 * source.omega ** 2
    den = v0 - u0
    if abs(den) < DEGENERACY_TOL * v0:
        raise DegenerateCorrelation(f"z0' denominator vanishes for sigma={source.sigma}, Omega={source.omega}")
    return geom.z0 / (1.0 + 2.0 * (u0 + geom.epsilon ** 2) / den)


# ---------- Two-photon state after the slits ----------
def _gauss_overlap(w1: complex, c1: complex, w2: complex, c2: complex) -> complex:
    """Integral of exp(-(z-c1)^2/w1) * conj(exp(-(z-c2)^2/w2)) over the real line."""
    p = 1.0 / w1 + np.conj(1.0 / w2)
    q = c1 / w1 + np.conj(c2 / w2)
    curv = p.real
    peak = q.real / curv
    scale = 1.0 / math.sqrt(curv)

    def f(t):
        z = peak + t * scale
        return np.exp(-(z - c1) ** 2 / w1) * np.conj(np.exp(-(z - c2) ** 2 / w2))

    re, _ = integrate.quad(lambda t: f(t).real, -12.0, 12.0, limit=400)
    im, _ = integrate.quad(lambda t: f(t).imag, -12.0, 12.0, limit=400)
    return complex(re, im) * scale


@dataclass(frozen=True, eq=False)
class TwoPhotonAmplitude:
    source: SourceParams
    geometry: Geometry
    packets: ConditionalPacketParams
    detector: Optional[PathDetector] = None
    slits: str = SLIT_ORDER
    normalization: str = "closed_form"
    _ct: complex = field(default=0j, init=False, repr=False)

    def __post_init__(self):
        slits = check_slits(self.slits)
        object.__setattr__(self, "slits", slits)
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}; got {self.normalization!r}")
        if self.detector is not None and self.detector.n_paths != len(slits):
            raise ConfigError(f"detector has {self.detector.n_paths} paths but {len(slits)} slits are open")
        if self.normalization == "closed_form":
            ct = self.closed_form_ct()
        else:
            ct = 1.0 / math.sqrt(self._unnormalized_probability())
        object.__setattr__(self, "_ct", complex(ct))

    # complex widths of the photon-1 and photon-2 factors at the detectors
    @property
    def a(self) -> complex:
        return complex(self.geometry.epsilon ** 2, self.geometry.diffusion(self.geometry.L1))

    @property
    def b(self) -> complex:
        return self.packets.gamma + 1j * self.geometry.diffusion(self.geometry.L1)

    @property
    def ct(self) -> complex:
        return self._ct

    @property
    def exact(self) -> bool:
        return self.packets.exact

    def centres1(self) -> Tuple[float, ...]:
        return slit_centres(self.geometry.z0, self.slits)

    def centres2(self) -> Tuple[complex, ...]:
        return slit_centres(self.packets.z0_prime, self.slits)

    def weights(self) -> Tuple[complex, ...]:
        return tuple(self.packets.weight(s) for s in self.slits)

    def closed_form_ct(self) -> complex:
        gr = self.packets.gamma_cap.re
        n = len(self.slits)
        return math.sqrt(2.0 / (n * math.pi)) / (np.sqrt(self.a / self.geometry.epsilon) * np.sqrt(self.b / math.sqrt(gr)))

    def overlap_weights(self) -> np.ndarray:
        n = len(self.slits)
        return np.ones((n, n)) if self.detector is None else self.detector.magnitudes()

    def terms(self, z1, z2) -> np.ndarray:
        """Per-slit amplitude terms, stacked on a leading axis in slit order, without C_t."""
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        a, b = self.a, self.b
        out = [w * np.exp(-(z1 - c1) ** 2 / a) * np.exp(-(z2 - c2) ** 2 / b)
               for w, c1, c2 in zip(self.weights(), self.centres1(), self.centres2())]
        return np.stack(out)

    def amplitude(self, z1, z2):
        return self._ct * self.terms(z1, z2).sum(axis=0)

    def density(self, z1, z2):
        t = self.terms(z1, z2)
        if self.detector is None:
            return abs(self._ct) ** 2 * np.abs(t.sum(axis=0)) ** 2
        g = self.overlap_weights()
        n = len(self.slits)
        acc = sum(np.abs(t[i]) ** 2 for i in range(n))
        for i in range(n):
            for j in range(i + 1, n):
                acc = acc + 2.0 * g[i, j] * (t[i] * np.conj(t[j])).real
        return abs(self._ct) ** 2 * acc

    def _unnormalized_probability(self) -> float:
        a, b = self.a, self.b
        w, c1, c2 = self.weights(), self.centres1(), self.centres2()
        g = self.overlap_weights()
        total = 0j
        for i in range(len(w)):
            for j in range(len(w)):
                ov = _gauss_overlap(a, c1[i], a, c1[j]) * _gauss_overlap(b, c2[i], b, c2[j])
                total += g[i, j] * w[i] * np.conj(w[j]) * ov
        return float(total.real)

    def total_probability(self) -> float:
        return abs(self._ct) ** 2 * self._unnormalized_probability()


def post_slit_state(source: SourceParams, geom: Geometry, packets: ConditionalPacketParams,
                    detector: Optional[PathDetector] = None, slits: str = SLIT_ORDER,
                    normalization: str = "closed_form") -> TwoPhotonAmplitude:
    return TwoPhotonAmplitude(source, geom, packets, detector, slits, normalization)


# ---------- Closed-form densities ----------
def _rho_xi(w: complex) -> Tuple[float, float]:
    inv = 1.0 / w
    return inv.real, -inv.imag


def _closed_form_ok(state: TwoPhotonAmplitude) -> bool:
    p = state.packets
    return (not p.exact) and p.z0_prime.imag == 0 and all(w == 1 for w in p.weights)


def coincidence_density(state: TwoPhotonAmplitude, z1, z2):
    """Envelope plus cross-term expansion of the detector-plane density."""
    if not _closed_form_ok(state):
        return state.density(z1, z2)
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    rho1, xi1 = _rho_xi(state.a)
    rho2, xi2 = _rho_xi(state.b)
    c1 = state.centres1()
    c2 = [c.real for c in state.centres2()]
    g = state.overlap_weights()
    n = len(c1)
    acc = sum(np.exp(-2 * rho1 * (z1 - c1[i]) ** 2 - 2 * rho2 * (z2 - c2[i]) ** 2) for i in range(n))
    for i in range(n):
        for j in range(i + 1, n):
            s1 = (z1 - c1[i]) ** 2 + (z1 - c1[j]) ** 2
            s2 = (z2 - c2[i]) ** 2 + (z2 - c2[j]) ** 2
            d1 = (z1 - c1[i]) ** 2 - (z1 - c1[j]) ** 2
            d2 = (z2 - c2[i]) ** 2 - (z2 - c2[j]) ** 2
            acc = acc + 2 * g[i, j] * np.exp(-rho1 * s1 - rho2 * s2) * np.cos(xi1 * d1 + xi2 * d2)
    return abs(state.ct) ** 2 * acc


def fringe_periods(geom: Geometry) -> Dict[str, float]:
    _check_geometry(geom)
    w_ab = geom.lam * geom.D / geom.z0
    return {"AB": w_ab, "BC": w_ab, "AC": w_ab / 2.0}


def beta_phase(geom: Geometry) -> float:
    """Phase z0^2*pi/lambda*(1/L1 + 1/D) dropped from the fixed-D1 pattern."""
    _check_geometry(geom)
    if geom.L1 <= 0:
        raise DegenerateGeometry("beta phase needs L1 > 0")
    return geom.z0 ** 2 * math.pi / geom.lam * (1.0 / geom.L1 + 1.0 / geom.D)


def _check_geometry(geom: Geometry) -> None:
    if geom.z0 < 1e-3 * geom.epsilon:
        raise DegenerateGeometry(f"slit separation z0={geom.z0:g} < 1e-3*epsilon={1e-3 * geom.epsilon:g}: packets merge")
    if geom.D <= 0:
        raise DegenerateGeometry("fringe quantities need D = L1 + 2*L2 > 0")


def _fixed_d1(state: TwoPhotonAmplitude, z2: np.ndarray, neglect_beta: bool) -> np.ndarray:
    geom = state.geometry
    z0 = geom.z0
    rho1, xi1 = _rho_xi(state.a)
    rho2, xi2 = _rho_xi(state.b)
    g = state.overlap_weights()
    if neglect_beta:
        _check_geometry(geom)
        k1 = 4 * math.pi * z0 / (geom.lam * geom.D)
        k2 = 2 * math.pi * z0 / (geom.lam * geom.D)
        ph_ab = ph_bc = k2 * z2
        ph_ac = k1 * z2
    else:
        beta = z0 ** 2 * (xi1 + xi2)
        ph_ab = 2 * z2 * z0 * xi2 - beta
        ph_bc = 2 * z2 * z0 * xi2 + beta
        ph_ac = 4 * z2 * z0 * xi2
    env = np.exp(-2 * rho2 * z2 ** 2)
    side = np.exp(-2 * rho1 * z0 ** 2)
    cross = 2 * np.exp(-z0 ** 2 * (rho1 + rho2)) * env
    out = (side * (np.exp(-2 * rho2 * (z2 - z0) ** 2) + np.exp(-2 * rho2 * (z2 + z0) ** 2)) + env
           + 2 * g[0, 2] * side * np.exp(-2 * rho2 * (z2 ** 2 + z0 ** 2)) * np.cos(ph_ac)
           + g[0, 1] * cross * np.exp(2 * rho2 * z2 * z0) * np.cos(ph_ab)
           + g[1, 2] * cross * np.exp(-2 * rho2 * z2 * z0) * np.cos(ph_bc))
    return abs(state.ct) ** 2 * out


def ghost_pattern(state: TwoPhotonAmplitude, z2_grid, neglect_beta: bool = True) -> CoincidencePattern:
    """Coincidence density along z2 with detector D1 held at z1 = 0."""
    z2 = np.asarray(z2_grid, dtype=float)
    if _closed_form_ok(state) and state.slits == SLIT_ORDER:
        dens = _fixed_d1(state, z2, neglect_beta)
    else:
        dens = state.density(np.zeros_like(z2), z2)
    return CoincidencePattern(z2, np.clip(dens, 0.0, None), 0.0, state.source, state.geometry, state.detector)


def detector_pattern(state: TwoPhotonAmplitude, z2_grid, neglect_beta: bool = True) -> CoincidencePattern:
    if state.detector is None:
        raise ConfigError("detector_pattern needs a state carrying a PathDetector")
    return ghost_pattern(state, z2_grid, neglect_beta)
