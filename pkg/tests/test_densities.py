"""Unit tests for the density families and the density grammar."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from tailscore.densities import (
    HLT_SCALE,
    CdfMix,
    Normal,
    ScaledT,
    SkewT,
    Spliced,
    make_cdfmix_G,
    make_cdfmix_H,
    make_hlt,
    make_hrt,
    parse_density,
    tail_matched,
    tail_scaled,
)
from tailscore.errors import ConfigError, DomainError, GrammarError


def catalog():
    return [
        Normal(0.0, 1.0),
        Normal(0.4, 1.2),
        ScaledT(4.0, HLT_SCALE, 0.0),
        ScaledT(8.4, 0.013, -0.012),
        make_hlt(),
        make_hrt(),
        make_cdfmix_G(),
        make_cdfmix_H(),
        SkewT(8.5, 0.94, 0.0, 1.0),
    ]


def fd_grid(p, n=41):
    """Evaluation grid spanning +-5 scale units, avoiding density breakpoints."""
    lo, hi = p.quantile(0.01), p.quantile(0.99)
    scale = (hi - lo) / 4.0
    mid = 0.5 * (lo + hi)
    xs = np.linspace(mid - 5 * scale, mid + 5 * scale, n)
    bps = np.asarray(p.breakpoints(), dtype=float)
    if bps.size:
        keep = np.abs(xs[:, None] - bps[None, :]).min(axis=1) > 1e-2
        xs = xs[keep]
    return xs


class TestCatalogInvariants:
    @pytest.mark.parametrize("p", catalog(), ids=lambda p: type(p).__name__ + repr(p.breakpoints()))
    def test_unit_mass(self, p):
        cuts = [-np.inf] + sorted(p.breakpoints()) + [np.inf]
        mass = sum(
            integrate.quad(p.pdf, a, b, limit=200)[0] for a, b in zip(cuts[:-1], cuts[1:])
        )
        assert mass == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("p", catalog(), ids=lambda p: type(p).__name__ + repr(p.breakpoints()))
    def test_quantile_cdf_roundtrip(self, p):
        us = np.linspace(0.001, 0.999, 23)
        xs = p.quantile(us)
        assert np.all(np.diff(xs) > 0)
        np.testing.assert_allclose(p.cdf(xs), us, atol=1e-8)

    @pytest.mark.parametrize("p", catalog(), ids=lambda p: type(p).__name__ + repr(p.breakpoints()))
    def test_log_pdf_consistent(self, p):
        xs = fd_grid(p)
        np.testing.assert_allclose(np.exp(p.log_pdf(xs)), p.pdf(xs), rtol=1e-12)

    @pytest.mark.parametrize("p", catalog(), ids=lambda p: type(p).__name__ + repr(p.breakpoints()))
    def test_dlog_matches_finite_differences(self, p):
        xs = fd_grid(p)
        h = 1e-6
        fd = (p.log_pdf(xs + h) - p.log_pdf(xs - h)) / (2 * h)
        np.testing.assert_allclose(p.dlog(xs), fd, rtol=1e-5, atol=1e-5)

    @pytest.mark.parametrize("p", catalog(), ids=lambda p: type(p).__name__ + repr(p.breakpoints()))
    def test_d2ratio_matches_finite_differences(self, p):
        xs = fd_grid(p)
        h = 1e-4
        # p''/p = (log p)'' + ((log p)')^2, with (log p)'' from central differences
        d2log = (p.log_pdf(xs + h) - 2 * p.log_pdf(xs) + p.log_pdf(xs - h)) / h**2
        ref = d2log + p.dlog(xs) ** 2
        np.testing.assert_allclose(p.d2ratio(xs), ref, rtol=1e-4, atol=1e-4)


class TestNormal:
    def test_pdf_closed_form(self):
        p = Normal(0.0, 1.0)
        assert p.pdf(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-15)
        assert p.log_pdf(0.0) == pytest.approx(-0.9189385332046727, abs=1e-15)

    def test_cdf_erf_oracle(self):
        p = Normal(0.3, 2.0)
        for x in (-1.5, 0.3, 4.0):
            oracle = 0.5 * (1 + math.erf((x - 0.3) / (2.0 * math.sqrt(2))))
            assert p.cdf(x) == pytest.approx(oracle, abs=1e-14)

    def test_invalid_scale(self):
        with pytest.raises((DomainError, GrammarError)):
            Normal(0.0, -1.0)


class TestScaledT:
    def test_log_pdf_oracle(self):
        p = ScaledT(4.0, 0.94, 0.1)
        # scipy.stats.t oracle, frozen
        assert p.log_pdf(1.3) == pytest.approx(-1.7733568658902303, abs=1e-12)

    def test_heavier_tail_than_normal(self):
        p = ScaledT(4.0, HLT_SCALE, 0.0)
        assert p.pdf(5.0) > Normal(0.0, 1.0).pdf(5.0)

    def test_dlog_closed_form(self):
        p = ScaledT(5.0, 1.3, -0.2)
        z = (2.0 - -0.2) / 1.3
        oracle = -(5.0 + 1.0) * z / (5.0 + z * z) / 1.3
        assert p.dlog(2.0) == pytest.approx(oracle, rel=1e-12)


class TestComposites:
    def test_hlt_continuity_at_knot(self):
        h = make_hlt()
        assert h.pdf(-1e-12) == pytest.approx(h.pdf(1e-12), rel=1e-9)
        assert h.pdf(0.0) == pytest.approx(0.3989422804014327, rel=1e-12)

    def test_hlt_cdf_left_tail_oracle(self):
        h = make_hlt()
        # frozen from scipy.stats.t.cdf(x / HLT_SCALE, 4)
        assert h.cdf(-5.0) == pytest.approx(0.0030043399653482193, abs=1e-14)
        assert h.cdf(-1.0) == pytest.approx(0.17367867486652394, abs=1e-14)
        assert h.cdf(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_hlt_equals_normal_on_right_half_bitwise(self):
        h = make_hlt()
        n01 = Normal(0.0, 1.0)
        xs = np.linspace(1e-9, 8.0, 101)
        assert np.array_equal(h.pdf(xs), n01.pdf(xs))
        assert np.array_equal(h.log_pdf(xs), n01.log_pdf(xs))
        assert np.array_equal(h.cdf(xs), n01.cdf(xs))

    def test_hrt_mirrors_hlt(self):
        h, g = make_hlt(), make_hrt()
        xs = np.linspace(-6.0, 6.0, 41)
        np.testing.assert_allclose(g.pdf(xs), h.pdf(-xs), rtol=1e-12)
        np.testing.assert_allclose(g.cdf(xs), 1.0 - h.cdf(-xs), atol=1e-12)

    def test_cdfmix_G_cdf_oracle(self):
        G = make_cdfmix_G()
        # frozen from Phi_{0,1/2}(x) Phi(x) + (1 - Phi_{0,1/2}(x)) F_4(x)
        assert G.cdf(-2.0) == pytest.approx(0.058057143506089856, abs=1e-12)
        assert G.cdf(-0.5) == pytest.approx(0.3195822438097231, abs=1e-12)
        assert G.cdf(0.0) == pytest.approx(0.5, abs=1e-12)
        assert G.cdf(1.5) == pytest.approx(0.933142592245344, abs=1e-12)

    def test_cdfmix_pdf_matches_cdf_derivative(self):
        for p in (make_cdfmix_G(), make_cdfmix_H()):
            for x in (-1.0, 0.2, 1.7):
                fd = (p.cdf(x + 1e-6) - p.cdf(x - 1e-6)) / 2e-6
                assert p.pdf(x) == pytest.approx(fd, rel=1e-6)

    def test_G_H_sum_to_normal_plus_t(self):
        # the two blends use complementary weights, so G + H = Phi + F_4
        G, H = make_cdfmix_G(), make_cdfmix_H()
        xs = np.linspace(-4.0, 4.0, 33)
        ref = stats.norm.cdf(xs) + stats.t.cdf(xs, 4)
        np.testing.assert_allclose(G.cdf(xs) + H.cdf(xs), ref, atol=1e-12)


class TestSkewT:
    def test_mass_below_mode_offset(self):
        sk = SkewT(8.5, 0.94, 0.0, 1.0)
        assert sk.cdf(0.0) == pytest.approx(1.0 / (1.0 + 0.94**2), abs=1e-12)

    def test_reduces_to_t_when_symmetric(self):
        sk = SkewT(6.0, 1.0, 0.0, 1.0)
        xs = np.linspace(-3.0, 3.0, 13)
        np.testing.assert_allclose(sk.pdf(xs), stats.t.pdf(xs, 6.0), rtol=1e-12)

    def test_location_scale(self):
        base = SkewT(8.5, 0.94, 0.0, 1.0)
        moved = SkewT(8.5, 0.94, -0.012, 0.015)
        x = 0.004
        assert moved.pdf(x) == pytest.approx(base.pdf((x + 0.012) / 0.015) / 0.015, rel=1e-12)


class TestTailConstructors:
    def test_tail_matched_preserves_region(self):
        base = Normal(0.0, 1.0)
        alt = tail_matched(base, 1.0, ScaledT(4.0, HLT_SCALE, 0.0))
        xs = np.linspace(1.0 + 1e-9, 6.0, 25)
        assert np.array_equal(alt.pdf(xs), base.pdf(xs))
        assert alt.cdf(1.0) == pytest.approx(base.cdf(1.0), abs=1e-15)

    def test_tail_scaled_proportional_on_region(self):
        base = Normal(0.0, 1.0)
        alt = tail_scaled(base, 0.0, 1.3, ScaledT(4.0, HLT_SCALE, 0.0))
        xs = np.linspace(0.5, 4.0, 9)
        np.testing.assert_allclose(alt.pdf(xs) / base.pdf(xs), 1.3, rtol=1e-12)

    def test_tail_scaled_rejects_bad_mass(self):
        with pytest.raises(DomainError):
            tail_scaled(Normal(0.0, 1.0), 0.0, 2.5, ScaledT(4.0, 1.0, 0.0))


class TestSampling:
    def test_seeded_reproducibility(self):
        p = make_hlt()
        a = p.sample(np.random.default_rng(11), 100)
        b = p.sample(np.random.default_rng(11), 100)
        assert np.array_equal(a, b)

    def test_sample_distribution(self):
        p = Normal(0.5, 2.0)
        x = p.sample(np.random.default_rng(0), 200_000)
        assert np.mean(x) == pytest.approx(0.5, abs=0.02)
        assert np.std(x) == pytest.approx(2.0, abs=0.02)

    def test_scalar_draw(self):
        x = Normal(0.0, 1.0).sample(np.random.default_rng(3))
        assert isinstance(x, float)


class TestGrammar:
    @pytest.mark.parametrize(
        "spec,kind",
        [
            ("normal(0,1)", Normal),
            ("scaledt(4,0.94,0)", ScaledT),
            ("skewt(8.5,0.94,0,1)", SkewT),
            ("hlt", Spliced),
            ("hrt", Spliced),
            ("G", CdfMix),
            ("H", CdfMix),
        ],
    )
    def test_known_specs(self, spec, kind):
        assert isinstance(parse_density(spec), kind)

    def test_whitespace_tolerated(self):
        p = parse_density("  normal( 0 , 1 ) ")
        assert p.pdf(0.0) == pytest.approx(0.3989422804014327, rel=1e-12)

    @pytest.mark.parametrize(
        "spec", ["gamma(2,3)", "normal(0)", "normal(0,1,2)", "normal(a,b)", "", "hlt(1)"]
    )
    def test_rejects_bad_specs(self, spec):
        with pytest.raises(GrammarError):
            parse_density(spec)


@settings(max_examples=50, deadline=None)
@given(
    mu=st.floats(-5, 5),
    sigma=st.floats(0.1, 5),
    u=st.floats(1e-4, 1 - 1e-4),
)
def test_normal_quantile_inverts_cdf(mu, sigma, u):
    p = Normal(mu, sigma)
    assert p.cdf(p.quantile(u)) == pytest.approx(u, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(nu=st.floats(2.5, 30), scale=st.floats(0.05, 4), x=st.floats(-10, 10))
def test_scaledt_pdf_positive_and_cdf_monotone(nu, scale, x):
    p = ScaledT(nu, scale, 0.0)
    assert p.pdf(x) > 0
    assert p.cdf(x) <= p.cdf(x + 0.5)
