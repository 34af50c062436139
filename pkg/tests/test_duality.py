import logging, math

import numpy as np
import pytest
import hypothesis as hyp
from hypothesis import given, strategies as st

from ghost_interference.duality import (
    DualitySample, analytic_v2, check_duality, distinguishability, fringe_contrast, fringe_v2, fringe_v2_sides,
    measured_v2, mirror_violations, sample_gram, second_fringe_position, sweep, two_slit_check, violations,
    visibility_bound,
)
from ghost_interference.schema import (
    CoincidencePattern, ConfigError, DegenerateCorrelation, DualityReport, NoFringePair, OutsideEnvelope, PathDetector,
    SourceParams, TooFewSamples,
)


# ---------- which-path quantities ----------
def test_endpoint_detectors():
    assert distinguishability(PathDetector.orthogonal()) == 1.0
    assert distinguishability(PathDetector.unmarked()) == 0.0
    assert visibility_bound(PathDetector.orthogonal()) == 0.0
    assert visibility_bound(PathDetector.unmarked()) == 1.0

@given(st.integers(0, 2 ** 32 - 1))
@hyp.settings(max_examples=30, deadline=None)
def test_bound_saturates_relation(seed):
    for d in sample_gram(seed, 5):
        lhs = DualityReport.build(visibility_bound(d), distinguishability(d)).bound_lhs
        np.testing.assert_allclose(lhs, 1.0, rtol=1e-12)
    for d in sample_gram(seed, 5, n_paths=2):
        lhs = DualityReport.build(visibility_bound(d), distinguishability(d), two_slit=True).bound_lhs
        np.testing.assert_allclose(lhs, 1.0, rtol=1e-12)

def test_bound_grows_with_overlap():
    bounds = [visibility_bound(PathDetector.uniform(g)) for g in np.linspace(0, 1, 21)]
    assert np.all(np.diff(bounds) > 0)

def test_second_fringe_position(physical_geom):
    np.testing.assert_allclose(second_fringe_position(physical_geom), 2 * 1.053e-2, rtol=1e-12)

# ---------- analytic visibility ----------
def test_analytic_v2_endpoints(physical_source, duality_geom):
    assert fringe_v2(PathDetector.orthogonal(), physical_source, duality_geom) == 0.0
    assert 0.99 < fringe_v2(PathDetector.unmarked(), physical_source, duality_geom) <= 1.0

def test_analytic_v2_ignores_overlap_phases(physical_source, duality_geom):
    z2 = second_fringe_position(duality_geom)
    plain = PathDetector.from_overlaps(0.3, 0.2, 0.4)
    phased = PathDetector.from_overlaps(0.3, 0.2, 0.4, phases=(0.5, 0.2, -0.3))
    np.testing.assert_allclose(analytic_v2(phased, physical_source, duality_geom, z2),
                               analytic_v2(plain, physical_source, duality_geom, z2), rtol=1e-12)

def test_analytic_v2_guards(physical_source, duality_geom):
    with pytest.raises(OutsideEnvelope):
        analytic_v2(PathDetector.unmarked(), physical_source, duality_geom, 1.0)
    with pytest.raises(DegenerateCorrelation):
        analytic_v2(PathDetector.unmarked(), SourceParams(sigma=1e6, omega=1e-4), duality_geom, 0.0)

def test_random_sweep_respects_relation(physical_source, duality_geom):
    samples = sweep(7, 10_000, physical_source, duality_geom)
    assert len(samples) == 10_000
    assert violations(samples) == []
    assert all(s.pattern_source == "analytic" for s in samples)
    # the relation holds on the lower side only; the mirror fringe breaks it for many detectors
    assert len(mirror_violations(samples)) > 0

@pytest.mark.parametrize("g", np.linspace(0.0, 1.0, 11))
def test_two_slit_relation(physical_source, duality_geom, g):
    s = two_slit_check(float(g), physical_source, duality_geom)
    x = 2 * second_fringe_position(duality_geom) * duality_geom.z0 / duality_geom.gamma_d_sq(physical_source)
    np.testing.assert_allclose(s.report.visibility, g / math.cosh(2 * x), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(s.report.distinguishability, 1 - g, atol=1e-15)
    assert s.report.two_slit
    assert s.report.margin >= 0

def test_two_slit_check_needs_two_paths(physical_source, duality_geom):
    with pytest.raises(ConfigError):
        two_slit_check(PathDetector.uniform(0.5), physical_source, duality_geom)

# ---------- measured visibility ----------
def test_measured_visibility_for_uniform_detector(physical_source, duality_geom):
    s = check_duality(PathDetector.uniform(0.5), physical_source, duality_geom, "pattern")
    assert 0.0 < s.report.visibility <= visibility_bound(PathDetector.uniform(0.5))
    assert not s.violates()

def test_measured_visibility_endpoints(physical_source, duality_geom):
    clear = check_duality(PathDetector.unmarked(), physical_source, duality_geom, "pattern")
    assert clear.report.visibility >= 0.9
    marked = check_duality(PathDetector.orthogonal(), physical_source, duality_geom, "pattern")
    assert marked.report.visibility == 0.0
    np.testing.assert_allclose(marked.report.bound_lhs, 1.0)

def test_unknown_pattern_source(physical_source, duality_geom):
    with pytest.raises(ConfigError):
        check_duality(PathDetector.unmarked(), physical_source, duality_geom, "guess")

# ---------- random detectors ----------
def test_sample_gram_is_deterministic():
    a = sample_gram(3, 20)
    b = sample_gram(3, 20)
    c = sample_gram(4, 20)
    assert all(np.array_equal(x.gram, y.gram) for x, y in zip(a, b))
    assert not all(np.array_equal(x.gram, y.gram) for x, y in zip(a, c))

def test_sample_gram_spreads_over_distinguishability():
    ds = np.array([distinguishability(d) for d in sample_gram(11, 1000)])
    assert np.all((ds >= 0) & (ds <= 1))
    assert ds.min() < 0.25 and ds.max() > 0.75

def test_sample_gram_arguments():
    assert {d.n_paths for d in sample_gram(0, 10, n_paths=2)} == {2}
    with pytest.raises(ConfigError):
        sample_gram(0, 0)
    with pytest.raises(ConfigError):
        sample_gram(0, 5, dim=2, n_paths=3)

def test_violations_are_reported(caplog):
    bad = DualitySample(PathDetector.uniform(0.5), DualityReport.build(1.0, 0.5), "analytic")
    good = DualitySample(PathDetector.uniform(0.5), DualityReport.build(0.5, 0.5), "analytic")
    with caplog.at_level(logging.WARNING):
        found = violations([good, bad])
    assert found == [bad]
    assert "break the duality bound" in caplog.text

# ---------- fringe sides ----------
def test_sides_differ_when_outer_overlaps_differ(physical_source, duality_geom):
    d = PathDetector.from_overlaps(1.0, 0.0, 0.0)
    plus, minus = fringe_v2_sides(d, physical_source, duality_geom)
    assert plus > visibility_bound(d) > minus
    s = check_duality(d, physical_source, duality_geom)
    assert s.sides == (plus, minus)
    np.testing.assert_allclose(s.report.visibility, minus, rtol=1e-15)
    assert not s.violates()
    assert s.mirror_violates()
    assert s.mirror_report().margin < 0
    assert mirror_violations([s]) == [s]

def test_sides_agree_for_symmetric_detectors(physical_source, duality_geom):
    for d in (PathDetector.uniform(0.5), PathDetector.from_overlaps(0.3, 0.8, 0.3)):
        plus, minus = fringe_v2_sides(d, physical_source, duality_geom)
        np.testing.assert_allclose(plus, minus, rtol=1e-12)
        assert not check_duality(d, physical_source, duality_geom).mirror_violates()

def test_measured_samples_carry_no_sides(physical_source, duality_geom):
    s = check_duality(PathDetector.uniform(0.5), physical_source, duality_geom, "pattern")
    assert s.sides is None and s.mirror_report() is None and not s.mirror_violates()

# ---------- fringe contrast ----------
def test_fringe_contrast_cancels_the_envelope():
    z = np.linspace(-5, 5, 1001)
    env = np.exp(-z ** 2)
    contrast = fringe_contrast(CoincidencePattern(z, env * (1 + 0.4 * np.cos(2 * np.pi * z))),
                               CoincidencePattern(z, env))
    assert contrast.z2_samples.max() < 3.75
    np.testing.assert_allclose(contrast.density, 1 + 0.4 * np.cos(2 * np.pi * contrast.z2_samples), rtol=1e-12)

def test_fringe_contrast_needs_a_wide_background():
    z = np.linspace(-5, 5, 1001)
    spike = CoincidencePattern(z, np.exp(-z ** 2 / 1e-4))
    with pytest.raises(TooFewSamples):
        fringe_contrast(spike, spike)

@pytest.mark.parametrize("g", [0.25, 0.5, 0.75, 1.0])
def test_measured_two_slit_visibility_tracks_overlap(physical_source, duality_geom, g):
    s = two_slit_check(g, physical_source, duality_geom, "pattern")
    x = 2 * second_fringe_position(duality_geom) * duality_geom.z0 / duality_geom.gamma_d_sq(physical_source)
    assert s.report.visibility > 0
    np.testing.assert_allclose(s.report.visibility, g / math.cosh(2 * x), rtol=2e-2)
    assert s.report.visibility + s.report.distinguishability <= 1.02

def test_measured_two_slit_visibility_without_overlap(physical_source, duality_geom):
    s = two_slit_check(0.0, physical_source, duality_geom, "pattern")
    assert s.report.visibility == 0.0 and s.report.distinguishability == 1.0

def test_measured_window_without_the_fringe_is_an_error(physical_source, duality_geom):
    with pytest.raises(NoFringePair):
        measured_v2(PathDetector.from_overlaps(0.5), physical_source, duality_geom, "pattern",
                    z2_grid=np.linspace(-0.01, 0.01, 401))

# ---------- oracle-measured visibility ----------
def test_oracle_visibility_for_uniform_detector(desk_source, desk_geom, desk_grid):
    s = check_duality(PathDetector.uniform(0.5), desk_source, desk_geom, "oracle", spec=desk_grid)
    assert s.pattern_source == "oracle"
    assert 0.1 < s.report.visibility
    assert s.report.margin >= -0.02

def test_oracle_visibility_falls_with_weak_correlation(desk_source, desk_geom, desk_grid):
    strong = two_slit_check(1.0, desk_source, desk_geom, "oracle", spec=desk_grid)
    weak = two_slit_check(1.0, SourceParams(sigma=0.5, omega=10.0), desk_geom, "oracle", spec=desk_grid)
    assert strong.report.visibility > 0.05
    assert weak.report.visibility < 0.2 * strong.report.visibility
