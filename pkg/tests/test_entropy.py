"""Quantizer, Gaussian probability model, CDF tables, and range coder."""

import numpy as np
import pytest
from scipy.special import ndtr

from waveletcodec import (
    CdfTable,
    DecodingError,
    DegenerateInput,
    EncodingError,
    GaussianCdfs,
    NumericalError,
    ShapeMismatch,
    SymbolPlane,
    TableCdfs,
    build_factorized_cdf,
    build_gaussian_row,
    dequantize,
    estimate_rate,
    gaussian_symbol_prob,
    normal_cdf,
    quantize,
    range_decode,
    range_encode,
)
from waveletcodec.cdftable import _quantize_cumulative
from waveletcodec.errors import BadShape
from waveletcodec.gaussian import P_FLOOR, SYMBOL_MAX, SYMBOL_MIN


def draw_plane(seed, n, sigma_hi=25.0):
    """Symbols drawn from their own per-element Gaussians (zero mean)."""
    rng = np.random.default_rng(seed)
    sigma = np.exp(rng.uniform(np.log(0.11), np.log(sigma_hi), n)).astype(
        np.float32)
    mu_src = rng.uniform(-3, 3, n).astype(np.float32)
    syms = quantize(rng.normal(mu_src, sigma).astype(np.float32), mu_src)
    return SymbolPlane(syms, np.zeros(n, np.float32), sigma)


class TestNormalCdf:
    def test_matches_scipy_reference(self):
        x = np.linspace(-8, 8, 2001)
        np.testing.assert_allclose(normal_cdf(x), ndtr(x), atol=1e-7)

    def test_basic_values(self):
        assert normal_cdf(0.0) == pytest.approx(0.5, abs=1e-9)
        assert normal_cdf(20.0) == pytest.approx(1.0, abs=1e-12)
        assert normal_cdf(-20.0) == pytest.approx(0.0, abs=1e-12)


class TestQuantize:
    def test_round_half_away_from_zero(self):
        x = np.array([1.4, -2.5, 2.5, -1.4, 0.5, -0.5, 0.0])
        np.testing.assert_array_equal(
            quantize(x, np.zeros(7)), [1, -3, 3, -1, 1, -1, 0])

    def test_mean_removal(self):
        assert quantize(np.array([3.2]), np.array([0.9]))[0] == 2
        got = dequantize(np.array([2]), np.array([0.9]))
        assert got[0] == pytest.approx(2.9)

    def test_round_trip_within_half(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-50, 50, 5000)
        m = rng.uniform(-5, 5, 5000)
        back = dequantize(quantize(x, m), m)
        assert np.max(np.abs(back - x)) <= 0.5 + 1e-5

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericalError):
            quantize(np.array([np.inf]), np.array([0.0]))


class TestGaussianSymbolProb:
    def test_unit_variance_center_mass(self):
        p = gaussian_symbol_prob(0, 0.0, 1.0)
        assert p == pytest.approx(0.38292492, abs=1e-7)
        assert -np.log2(p) == pytest.approx(1.38479, abs=1e-4)

    def test_symmetry(self):
        for s in [0.11, 0.7, 3.0]:
            assert gaussian_symbol_prob(1, 0.0, s) == pytest.approx(
                gaussian_symbol_prob(-1, 0.0, s), rel=1e-12)

    def test_folded_probabilities_normalize(self):
        # folding semantics checked with the floor off: reconstruct the
        # unfloored masses straight from the CDF
        q = np.arange(SYMBOL_MIN, SYMBOL_MAX + 1)
        for mu, sigma in [(0.0, 1.0), (3.7, 22.0), (-200.0, 5.0)]:
            hi = np.where(q >= SYMBOL_MAX, 1.0,
                          normal_cdf((q + 0.5 - mu) / sigma))
            lo = np.where(q <= SYMBOL_MIN, 0.0,
                          normal_cdf((q - 0.5 - mu) / sigma))
            assert (hi - lo).sum() == pytest.approx(1.0, abs=1e-12)

    def test_floor_applies(self):
        assert gaussian_symbol_prob(200, 0.0, 0.11) == P_FLOOR

    def test_sigma_clamped_up(self):
        # sigma below the minimum behaves as sigma_min
        assert gaussian_symbol_prob(0, 0.0, 1e-6) == pytest.approx(
            gaussian_symbol_prob(0, 0.0, 0.11), rel=1e-12)


class TestSymbolPlane:
    def test_shape_agreement_required(self):
        with pytest.raises(ShapeMismatch):
            SymbolPlane(np.zeros(3, np.int32), np.zeros(4, np.float32),
                        np.ones(3, np.float32))

    def test_out_of_range_symbols_rejected(self):
        with pytest.raises(EncodingError):
            SymbolPlane(np.array([300], np.int32), np.zeros(1, np.float32),
                        np.ones(1, np.float32))

    def test_estimate_rate_single_element(self):
        pl = SymbolPlane(np.zeros(1, np.int32), np.zeros(1, np.float32),
                         np.ones(1, np.float32))
        assert estimate_rate(pl) == pytest.approx(1.38479, abs=1e-4)

    def test_estimate_rate_additive(self):
        a = draw_plane(1, 400)
        b = draw_plane(2, 300)
        joined = SymbolPlane(np.concatenate([a.symbols, b.symbols]),
                             np.concatenate([a.mu, b.mu]),
                             np.concatenate([a.sigma, b.sigma]))
        assert estimate_rate(joined) == pytest.approx(
            estimate_rate(a) + estimate_rate(b), rel=1e-12)

    def test_peaked_plane_rate_positive(self):
        pl = SymbolPlane(np.zeros(50, np.int32), np.zeros(50, np.float32),
                         np.full(50, 0.11, np.float32))
        assert 0 < estimate_rate(pl) < 1.0


class TestGaussianRow:
    def test_row_invariants_random_params(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            mu = float(rng.uniform(-260, 260))
            sigma = float(np.exp(rng.uniform(np.log(0.05), np.log(300))))
            row = build_gaussian_row(mu, sigma)
            assert row[0] == 0 and row[-1] == 65536
            assert np.all(np.diff(row) >= 1)

    def test_row_tracks_ideal_mass(self):
        row = build_gaussian_row(0.0, 2.0)
        widths = np.diff(row)
        ideal = gaussian_symbol_prob(np.arange(-255, 256), 0.0, 2.0) * 65536
        # each width is one reserved unit plus the ideal mass scaled onto
        # the remaining 65536-511 grid units, up to edge rounding
        expect = 1.0 + ideal * (65536 - 511) / 65536
        sel = ideal > 1
        assert np.max(np.abs(widths[sel] - expect[sel])) <= 2.0

    def test_custom_support(self):
        row = build_gaussian_row(0.0, 500.0, -9000, 9000)
        assert len(row) == 18002
        assert row[0] == 0 and row[-1] == 65536
        assert np.all(np.diff(row) >= 1)

    def test_support_too_wide_rejected(self):
        with pytest.raises(ShapeMismatch):
            build_gaussian_row(0.0, 1.0, -40000, 40000)


class TestRangeCoder:
    def test_round_trip_large(self):
        pl = draw_plane(10, 100_000)
        cdfs = GaussianCdfs(pl.mu, pl.sigma)
        blob = range_encode(pl.symbols, cdfs)
        out = range_decode(blob, GaussianCdfs(pl.mu, pl.sigma), 100_000)
        np.testing.assert_array_equal(out, pl.symbols)

    def test_empty_sequence(self):
        empty = GaussianCdfs(np.empty(0), np.empty(0))
        blob = range_encode(np.empty(0, np.int32), empty)
        assert len(blob) == 5
        assert range_decode(blob, empty, 0).size == 0

    def test_deterministic_symbols_tiny_payload(self):
        # near-certain symbols: 1000 zeros at sigma_min
        n = 1000
        cdfs = GaussianCdfs(np.zeros(n), np.full(n, 0.11))
        blob = range_encode(np.zeros(n, np.int32), cdfs)
        assert len(blob) <= 40

    def test_encode_deterministic(self):
        pl = draw_plane(11, 5000)
        a = range_encode(pl.symbols, GaussianCdfs(pl.mu, pl.sigma))
        b = range_encode(pl.symbols, GaussianCdfs(pl.mu, pl.sigma))
        assert a == b

    def test_tightness_bound(self):
        # excess = 8*bytes - est must sit in [0, 256 + 0.2% est]
        for k in range(40):
            pl = draw_plane(100 + k, int(
                np.random.default_rng(k).integers(64, 16384)))
            blob = range_encode(pl.symbols, GaussianCdfs(pl.mu, pl.sigma))
            est = estimate_rate(pl)
            excess = 8 * len(blob) - est
            assert 0.0 <= excess <= 256.0 + 0.002 * est

    def test_truncation_always_detected(self):
        pl = draw_plane(12, 4000)
        cdfs = GaussianCdfs(pl.mu, pl.sigma)
        blob = range_encode(pl.symbols, cdfs)
        rng = np.random.default_rng(0)
        cuts = set(rng.integers(1, len(blob), 60).tolist()) | {1, 5,
                                                               len(blob) - 1}
        for cut in cuts:
            with pytest.raises(DecodingError):
                range_decode(blob[:cut], GaussianCdfs(pl.mu, pl.sigma), 4000)

    def test_trailing_garbage_detected(self):
        pl = draw_plane(13, 500)
        blob = range_encode(pl.symbols, GaussianCdfs(pl.mu, pl.sigma))
        with pytest.raises(DecodingError):
            range_decode(blob + b"\x00\x00", GaussianCdfs(pl.mu, pl.sigma),
                         500)

    def test_symbol_outside_support_rejected(self):
        cdfs = GaussianCdfs(np.zeros(1), np.ones(1))
        with pytest.raises(EncodingError):
            range_encode(np.array([256], np.int32), cdfs)

    def test_provider_length_must_match(self):
        with pytest.raises(ShapeMismatch):
            range_encode(np.zeros(3, np.int32),
                         GaussianCdfs(np.zeros(2), np.ones(2)))

    def test_table_path_matches_gaussian_path(self):
        pl = draw_plane(14, 800)
        rows = [build_gaussian_row(0.0, float(s)) for s in pl.sigma]
        tab = CdfTable(mins=np.full(800, SYMBOL_MIN, np.int32), edges=rows)
        via_table = range_encode(pl.symbols, TableCdfs(tab, np.arange(800)))
        via_gauss = range_encode(pl.symbols,
                                 GaussianCdfs(pl.mu, pl.sigma))
        assert via_table == via_gauss
        back = range_decode(via_table, TableCdfs(tab, np.arange(800)), 800)
        np.testing.assert_array_equal(back, pl.symbols)


class TestCdfTable:
    def test_quantize_cumulative_strict(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            k = int(rng.integers(1, 700))
            probs = rng.uniform(0, 1, k) ** 4
            edges = _quantize_cumulative(probs + 1e-12)
            assert edges[0] == 0 and edges[-1] == 65536
            assert np.all(np.diff(edges) >= 1)

    def test_factorized_concentrates_on_constant(self):
        t = build_factorized_cdf(np.zeros((1, 1000), dtype=np.int64))
        assert t.support(0) == (-1, 1)
        assert t.prob(0, 0) >= 0.99
        assert t.prob(0, -1) > 0 and t.prob(0, 1) > 0

    def test_factorized_uniform_three_values(self):
        rng = np.random.default_rng(1)
        samples = rng.integers(-1, 2, (1, 30000))
        t = build_factorized_cdf(samples)
        for s in (-1, 0, 1):
            assert t.prob(0, s) == pytest.approx(1 / 3, abs=0.02)

    def test_factorized_empty_channel_rejected(self):
        with pytest.raises(DegenerateInput):
            build_factorized_cdf([np.array([1, 2]), np.array([])])
        with pytest.raises(DegenerateInput):
            build_factorized_cdf([])

    def test_wire_round_trip(self):
        rng = np.random.default_rng(2)
        t = build_factorized_cdf(rng.normal(0, 4, (5, 700)).round()
                                 .astype(np.int64))
        t2 = CdfTable.parse(t.serialize())
        assert np.array_equal(t.mins, t2.mins)
        for a, b in zip(t.edges, t2.edges):
            np.testing.assert_array_equal(a, b)

    def test_parse_rejects_malformed(self):
        t = build_factorized_cdf(np.zeros((1, 10), dtype=np.int64))
        raw = t.serialize()
        with pytest.raises(DecodingError):
            CdfTable.parse(raw[:-1])
        with pytest.raises(DecodingError):
            CdfTable.parse(raw + b"\x01")

    def test_json_round_trip(self):
        t = build_factorized_cdf(np.arange(-3, 4)[None, :])
        t2 = CdfTable.from_json(t.to_json())
        assert np.array_equal(t.mins, t2.mins)
        np.testing.assert_array_equal(t.edges[0], t2.edges[0])

    def test_monotone_for_random_samples(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            t = build_factorized_cdf(
                rng.integers(-40, 40, (2, 200)).astype(np.int64))
            for e in t.edges:
                assert np.all(np.diff(e) >= 1)
                assert e[0] == 0 and e[-1] == 65536

    def test_estimate_bits_matches_prob(self):
        t = build_factorized_cdf(np.array([[0, 0, 1, -1, 0]]))
        bits = t.estimate_bits(np.zeros(2, np.int64),
                               np.array([0, 1], np.int64))
        want = -np.log2(t.prob(0, 0)) - np.log2(t.prob(0, 1))
        assert bits == pytest.approx(want, rel=1e-12)

    def test_invalid_construction_rejected(self):
        with pytest.raises(BadShape):
            CdfTable(mins=np.array([0], np.int32),
                     edges=[np.array([0, 5, 5, 65536])])  # flat step
        with pytest.raises(BadShape):
            CdfTable(mins=np.array([0], np.int32),
                     edges=[np.array([1, 65536])])        # bad origin


class TestExactBits:
    def test_tracks_gaussian_payload_sizes(self):
        from waveletcodec import exact_bits
        for seed in range(6):
            plane = draw_plane(400 + seed, 3000)
            cdfs = GaussianCdfs(plane.mu, plane.sigma)
            payload = range_encode(plane.symbols, cdfs)
            bits = exact_bits(plane.symbols, cdfs)
            slack = 8 * len(payload) - bits
            assert 0.0 <= slack <= 64.0
            # the table never beats the ideal Gaussian code length
            assert bits >= estimate_rate(plane)

    def test_table_and_gaussian_providers_agree(self):
        from waveletcodec import exact_bits
        plane = draw_plane(500, 500, sigma_hi=8.0)
        sigma = np.full(plane.symbols.size, 3.0, np.float32)
        g = GaussianCdfs(np.zeros_like(sigma), sigma)
        row = build_gaussian_row(0.0, 3.0)
        t = TableCdfs(CdfTable(mins=[SYMBOL_MIN], edges=[row]),
                      np.zeros(plane.symbols.size, np.int32))
        assert exact_bits(plane.symbols, g) == \
            pytest.approx(exact_bits(plane.symbols, t), rel=1e-12)

    def test_out_of_support_symbol_rejected(self):
        from waveletcodec import exact_bits
        cdfs = GaussianCdfs(np.zeros(1, np.float32),
                            np.ones(1, np.float32))
        with pytest.raises(EncodingError):
            exact_bits(np.array([300], np.int32), cdfs)
        row = build_gaussian_row(0.0, 1.0, -4, 4)
        t = TableCdfs(CdfTable(mins=[-4], edges=[row]),
                      np.zeros(1, np.int32))
        with pytest.raises(EncodingError):
            exact_bits(np.array([9], np.int32), t)

    def test_size_mismatch_rejected(self):
        from waveletcodec import exact_bits
        cdfs = GaussianCdfs(np.zeros(2, np.float32),
                            np.ones(2, np.float32))
        with pytest.raises(ShapeMismatch):
            exact_bits(np.zeros(3, np.int32), cdfs)
