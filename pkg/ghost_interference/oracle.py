"""Grid-based two-photon propagation used to cross-check the closed forms.

The state lives on an n1 x n2 grid (photon 1 along axis 0, photon 2 along axis 1)
and is propagated with the paraxial transfer function in Fourier space.
"""
from __future__ import annotations
import logging, math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analytic import SLIT_ORDER, check_slits, epr_position_space, marginal_std, slit_centres
from .schema import (
    AliasingRisk, CoincidencePattern, ComplexWidth, ConfigError, Geometry, PathDetector,
    SourceParams, SpanTooSmall, UnderResolved,
)

logger = logging.getLogger(__name__)

SPAN_STDS = 6.0
RENORM_TOL = 1e-6
PROJECTIONS = ("gaussian", "hard")

# ---------- Grid ----------
@dataclass(frozen=True)
class GridSpec:
    n1: int
    n2: int
    span1: float   # half-width of the z1 domain
    span2: float

    def __post_init__(self):
        for name in ("n1", "n2"):
            n = getattr(self, name)
            if int(n) != n or n < 16 or n % 2:
                raise ConfigError(f"{name} must be an even integer >= 16; got {n!r}")
        for name in ("span1", "span2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be finite and > 0; got {v!r}")

    @property
    def dz1(self) -> float:
        return 2.0 * self.span1 / self.n1

    @property
    def dz2(self) -> float:
        return 2.0 * self.span2 / self.n2

    @property
    def z1(self) -> np.ndarray:
        return (np.arange(self.n1) - self.n1 // 2) * self.dz1

    @property
    def z2(self) -> np.ndarray:
        return (np.arange(self.n2) - self.n2 // 2) * self.dz2

    @classmethod
    def square(cls, n: int, span: float) -> "GridSpec":
        return cls(n, n, span, span)


@dataclass(frozen=True, eq=False)
class Grid2D:
    spec: GridSpec
    values: np.ndarray
    transmitted: float = 1.0   # probability kept by the last slit projection

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.spec.n1, self.spec.n2):
            raise ConfigError(f"grid values have shape {v.shape}; spec needs {(self.spec.n1, self.spec.n2)}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def z1(self) -> np.ndarray:
        return self.spec.z1

    @property
    def z2(self) -> np.ndarray:
        return self.spec.z2

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.spec.dz1 * self.spec.dz2)

    def normalized(self) -> "Grid2D":
        return Grid2D(self.spec, self.values / math.sqrt(self.norm()), self.transmitted)

    def marginal(self, which_photon: int) -> np.ndarray:
        p = np.abs(self.values) ** 2
        if which_photon == 1:
            return p.sum(axis=1) * self.spec.dz2
        return p.sum(axis=0) * self.spec.dz1


def default_grid(source: SourceParams, geom: Geometry, n: int = 1024) -> GridSpec:
    std_z, _ = marginal_std(source)
    photon1 = geom.z0 + SPAN_STDS * 0.5 * math.sqrt(geom.photon1_width())
    photon2 = SPAN_STDS * 0.5 * math.sqrt(geom.gamma_d_sq(source))
    span = 1.05 * max(SPAN_STDS * std_z, photon1, photon2)
    return GridSpec.square(n, span)


# ---------- Pipeline stages ----------
def discretize_state(source: SourceParams, spec: GridSpec, geom: Optional[Geometry] = None) -> Grid2D:
    std_z, _ = marginal_std(source)
    span = min(spec.span1, spec.span2)
    if span < SPAN_STDS * std_z:
        raise SpanTooSmall(f"grid half-span {span:g} < {SPAN_STDS:g} x marginal std {std_z:g}")
    dz = max(spec.dz1, spec.dz2)
    if geom is not None and dz > geom.epsilon / 8.0:
        raise UnderResolved(f"grid step {dz:g} > epsilon/8 = {geom.epsilon / 8.0:g}")
    if dz > 0.4 / source.sigma:
        raise UnderResolved(f"grid step {dz:g} > 0.4/sigma = {0.4 / source.sigma:g}")
    z1, z2 = np.meshgrid(spec.z1, spec.z2, indexing="ij")
    grid = Grid2D(spec, epr_position_space(source, z1, z2).astype(complex))
    nrm = grid.norm()
    if abs(nrm - 1.0) > RENORM_TOL:
        raise SpanTooSmall(f"discrete norm {nrm:.9f} differs from 1 by more than {RENORM_TOL:g}")
    logger.debug("discretized source on %dx%d grid, norm %.12f", spec.n1, spec.n2, nrm)
    return grid.normalized()


def aliasing_ratio(spec: GridSpec, which_photon: int, lam: float, L: float) -> float:
    """Phase step of the transfer function between adjacent band-edge samples, in units of pi."""
    n, dz = (spec.n1, spec.dz1) if which_photon == 1 else (spec.n2, spec.dz2)
    s = lam * L / math.pi
    return s * math.pi / (n * dz * dz)


def propagate(grid: Grid2D, which_photon: int, lam: float, L: float) -> Grid2D:
    if which_photon not in (1, 2):
        raise ConfigError(f"which_photon must be 1 or 2; got {which_photon!r}")
    if L == 0:
        return Grid2D(grid.spec, grid.values, grid.transmitted)
    ratio = aliasing_ratio(grid.spec, which_photon, lam, L)
    if ratio > 1.0:
        raise AliasingRisk(f"transfer-function phase step {ratio:.3f}*pi exceeds pi at the band edge "
                           f"(photon {which_photon}, L={L:g})")
    axis = which_photon - 1
    n, dz = (grid.spec.n1, grid.spec.dz1) if axis == 0 else (grid.spec.n2, grid.spec.dz2)
    k = 2.0 * math.pi * np.fft.fftfreq(n, d=dz)
    h = np.exp(-1j * (lam * L / (4.0 * math.pi)) * k ** 2)
    h = h[:, None] if axis == 0 else h[None, :]
    out = np.fft.ifft(np.fft.fft(grid.values, axis=axis) * h, axis=axis)
    return Grid2D(grid.spec, out, grid.transmitted)


def slit_mode(z, centre: float, epsilon: float) -> np.ndarray:
    return (2.0 / (math.pi * epsilon ** 2)) ** 0.25 * np.exp(-((z - centre) ** 2) / epsilon ** 2)


def _branches(grid: Grid2D, geom: Geometry, slits: str):
    """Per-slit components phi_i(z1) <phi_i|psi>(z2) of the Gaussian slit projection."""
    z1 = grid.z1
    for c in slit_centres(geom.z0, slits):
        phi = slit_mode(z1, c, geom.epsilon)
        coeff = phi @ grid.values * grid.spec.dz1
        yield np.outer(phi, coeff)


def project_slits(grid: Grid2D, geom: Geometry, mode: str = "gaussian", slits: str = SLIT_ORDER) -> Grid2D:
    slits = check_slits(slits)
    if mode == "gaussian":
        out = sum(_branches(grid, geom, slits))
    elif mode == "hard":
        z1 = grid.z1
        mask = np.zeros_like(z1, dtype=bool)
        for c in slit_centres(geom.z0, slits):
            mask |= np.abs(z1 - c) <= geom.epsilon
        out = grid.values * mask[:, None]
    else:
        raise ConfigError(f"projection mode must be one of {PROJECTIONS}; got {mode!r}")
    kept = Grid2D(grid.spec, out)
    p = kept.norm() / grid.norm()
    if p <= 0:
        raise SpanTooSmall("slit projection removed the whole state")
    logger.debug("slit projection (%s, %s) transmitted %.6g", mode, slits, p)
    return Grid2D(grid.spec, kept.normalized().values, p)


def conditional_packet(grid: Grid2D, geom: Geometry, slit: str = "B") -> np.ndarray:
    """Photon-2 state <phi_slit|psi> over grid.z2."""
    (c,) = slit_centres(geom.z0, check_slits(slit))
    phi = slit_mode(grid.z1, c, geom.epsilon)
    return phi @ grid.values * grid.spec.dz1


def fit_complex_width(z, psi, threshold: float = 1e-3) -> ComplexWidth:
    """Fit psi ~ exp(-(z - c)^2/Gamma): 1/(4 var) gives Re(1/Gamma), the quadratic phase gives -Im(1/Gamma)."""
    z = np.asarray(z, dtype=float)
    psi = np.asarray(psi, dtype=complex)
    p = np.abs(psi) ** 2
    mean = np.sum(z * p) / np.sum(p)
    var = np.sum((z - mean) ** 2 * p) / np.sum(p)
    keep = p > threshold * p.max()
    phase = np.unwrap(np.angle(psi[keep]))
    quad = np.polyfit(z[keep], phase, 2, w=np.sqrt(p[keep]))[0]
    inv = complex(1.0 / (4.0 * var), -quad)
    return ComplexWidth.from_complex(1.0 / inv)


def final_state(source: SourceParams, geom: Geometry, spec: GridSpec, mode: str, slits: str) -> Grid2D:
    g = discretize_state(source, spec, geom)
    g = propagate(propagate(g, 1, geom.lam, geom.L2), 2, geom.lam, geom.L2)
    g = project_slits(g, geom, mode, slits)
    return propagate(propagate(g, 1, geom.lam, geom.L1), 2, geom.lam, geom.L1)


def oracle_coincidence(source: SourceParams, geom: Geometry, spec: Optional[GridSpec] = None,
                       mode: str = "gaussian", slits: str = SLIT_ORDER,
                       detector: Optional[PathDetector] = None) -> CoincidencePattern:
    """Full grid pipeline sliced at z1 = 0, normalized to unit peak.

    With a detector, each slit branch is carried separately and the branches are
    recombined with the overlap magnitudes |<d_i|d_j>| (Gaussian projection only).
    """
    spec = spec or default_grid(source, geom)
    slits = check_slits(slits)
    i0 = int(np.argmin(np.abs(spec.z1)))
    if detector is None:
        row = final_state(source, geom, spec, mode, slits).values[i0]
        dens = np.abs(row) ** 2
    else:
        if mode != "gaussian":
            raise ConfigError("path-detector oracle runs need the gaussian slit projection")
        if detector.n_paths != len(slits):
            raise ConfigError(f"detector has {detector.n_paths} paths but {len(slits)} slits are open")
        g = discretize_state(source, spec, geom)
        g = propagate(propagate(g, 1, geom.lam, geom.L2), 2, geom.lam, geom.L2)
        rows = []
        for branch in _branches(g, geom, slits):
            b = Grid2D(spec, branch)
            b = propagate(propagate(b, 1, geom.lam, geom.L1), 2, geom.lam, geom.L1)
            rows.append(b.values[i0])
        m = detector.magnitudes()
        dens = sum(np.abs(r) ** 2 for r in rows)
        for i in range(len(rows)):
            for j in range(i + 1, len(rows)):
                dens = dens + 2.0 * m[i, j] * (rows[i] * np.conj(rows[j])).real
    dens = np.clip(dens, 0.0, None)
    return CoincidencePattern(spec.z2, dens, float(spec.z1[i0]), source, geom, detector).normalized()


# ---------- Binary dump ----------
def dump_grid(grid: Grid2D, path: str) -> None:
    """Header n1, n2, span1, span2 as little-endian float64; payload interleaved re/im float64, row-major."""
    s = grid.spec
    header = np.array([s.n1, s.n2, s.span1, s.span2], dtype="<f8")
    payload = np.empty((s.n1, s.n2, 2), dtype="<f8")
    payload[..., 0] = grid.values.real
    payload[..., 1] = grid.values.imag
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(payload.tobytes())


def load_grid(path: str) -> Grid2D:
    with open(path, "rb") as f:
        raw = f.read()
    header = np.frombuffer(raw[:32], dtype="<f8")
    n1, n2 = int(header[0]), int(header[1])
    payload = np.frombuffer(raw[32:], dtype="<f8")
    if payload.size != n1 * n2 * 2:
        raise ConfigError(f"grid dump {path} holds {payload.size} floats; header promises {n1 * n2 * 2}")
    payload = payload.reshape(n1, n2, 2)
    return Grid2D(GridSpec(n1, n2, float(header[2]), float(header[3])), payload[..., 0] + 1j * payload[..., 1])
