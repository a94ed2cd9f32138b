"""MUI, PAPR, QPSK and link metrics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crandn
from isacwave import comm
from isacwave.channel import ChannelConfig, ChannelRealization, apply_freq_channel, sample_rician_taps
from isacwave.ideal import min_norm_precoder
from isacwave.operators import GridConfig


@pytest.fixture
def link(small_grid):
    h = sample_rician_taps(ChannelConfig(), small_grid, 2)
    return h, comm.random_symbols(small_grid.n_sub, 2, 2)


class TestMui:
    def test_exact_precoder(self, link):
        h, s_d = link
        x, flagged = min_norm_precoder(h, s_d)
        assert not flagged
        assert comm.mui_energy(h, x, s_d) < 1e-16 * np.sum(np.abs(s_d) ** 2) * 1e4

    def test_zero_precoder(self, link):
        h, s_d = link
        assert np.isclose(comm.mui_energy(h, np.zeros(8), s_d), h.n_sub * h.n_users)

    def test_blockwise(self, rng, link):
        h, s_d = link
        x = crandn(rng, 8)
        ref = sum(np.sum(np.abs(h.freq_blocks[n] @ x[2 * n:2 * n + 2] - s_d[2 * n:2 * n + 2]) ** 2) for n in range(4))
        assert np.isclose(comm.mui_energy(h, x, s_d), ref)


class TestPapr:
    def test_constant_modulus(self, rng):
        g = GridConfig(3, 8, 2)
        s = np.exp(2j * np.pi * rng.random(g.time_len))
        rep = comm.papr_time(s, g)
        assert np.allclose(rep.per_antenna, 1.0) and abs(rep.max_db) < 1e-12

    def test_impulse(self):
        g = GridConfig(2, 8, 2)
        s = np.ones(g.time_len, complex)
        s[0::2] = 0
        s[4] = 5.0  # antenna 0, sample 2
        assert np.isclose(comm.papr_time(s, g).per_antenna[0], 8.0)

    def test_silent_antenna(self):
        g = GridConfig(2, 4, 1)
        s = np.zeros(g.time_len, complex)
        s[0] = 1
        with pytest.raises(ValueError, match="antenna silent"):
            comm.papr_time(s, g)

    def test_scale_invariance_and_lower_bound(self, rng):
        g = GridConfig(4, 8, 2)
        x = crandn(rng, g.freq_len)
        r = comm.papr(x, g)
        assert np.all(r.per_antenna >= 1.0)
        assert np.allclose(comm.papr((2 - 3j) * x, g).per_antenna, r.per_antenna, rtol=1e-12)

    def test_oversampled_measurement(self, rng):
        g = GridConfig(2, 8, 2, 4)
        x = crandn(rng, g.freq_len)
        assert comm.papr(x, g).max_db >= comm.papr(x, g.nyquist()).max_db - 1e-9


class TestQpsk:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=2, max_size=64).filter(lambda b: len(b) % 2 == 0))
    def test_roundtrip(self, bits):
        assert comm.qpsk_detect(comm.qpsk_modulate(bits)).tolist() == bits

    def test_gray_and_unit_energy(self):
        pts = comm.qpsk_modulate([0, 0, 0, 1, 1, 1, 1, 0])
        assert np.allclose(np.abs(pts), 1.0)
        # neighbours differ in one bit
        assert np.isclose(pts[0], (1 + 1j) / np.sqrt(2)) and np.isclose(pts[2], (-1 - 1j) / np.sqrt(2))

    def test_small_noise(self, rng):
        y = (1 + 1j) / np.sqrt(2) + 0.099 * np.exp(2j * np.pi * rng.random(100))
        assert np.allclose(comm.qpsk_slice(y), (1 + 1j) / np.sqrt(2))

    def test_ser_theory_value(self):
        from scipy.stats import norm

        q = norm.sf(np.sqrt(10.0))
        assert np.isclose(comm.qpsk_ser_theory(10.0), 2 * q * (1 - 0.5 * q), rtol=1e-12)


class TestSer:
    def test_noiseless_exact(self, link):
        h, s_d = link
        x, _ = min_norm_precoder(h, s_d)
        assert comm.empirical_ser(h, x, s_d, 0.0, 5, 0) == 0.0

    def test_zero_precoder_guessing(self, link):
        h, s_d = link
        ser = comm.empirical_ser(h, np.zeros(8), s_d, 1.0, 3000, 4)
        sigma = np.sqrt(0.75 * 0.25 / (3000 * 8))
        assert abs(ser - 0.75) < 3 * sigma

    def test_monotone_in_noise(self, rng, link):
        h, s_d = link
        x = min_norm_precoder(h, s_d)[0] + 0.1 * crandn(rng, 8)
        sers = [comm.empirical_ser(h, x, s_d, sd, 400, 7) for sd in (1.0, 0.6, 0.3, 0.1)]
        assert all(a >= b for a, b in zip(sers, sers[1:]))


class TestSumRate:
    def test_unit_noise_no_mui(self, link):
        h, s_d = link
        x, _ = min_norm_precoder(h, s_d)
        assert np.isclose(comm.sum_rate(h, x, s_d, 1.0), 2.0)

    def test_zero_precoder(self, link):
        h, s_d = link
        nz = 0.5
        assert np.isclose(comm.sum_rate(h, np.zeros(8), s_d, nz), 8 * np.log2(1 + 1 / (1 + nz**2)) / 4)

    def test_less_mui_more_rate(self, rng, link):
        h, s_d = link
        x0, _ = min_norm_precoder(h, s_d)
        d = crandn(rng, 8)
        rates = [comm.sum_rate(h, x0 + t * d, s_d, 0.3) for t in (1.0, 0.5, 0.1, 0.0)]
        assert all(a < b for a, b in zip(rates, rates[1:]))

    def test_rejects_zero_noise(self, link):
        h, s_d = link
        with pytest.raises(ValueError):
            comm.sum_rate(h, np.zeros(8), s_d, 0.0)


def test_awgn_ser_matches_theory_when_mui_free():
    g = GridConfig(2, 4, 2)
    taps = np.eye(2)[None].astype(complex)
    h = ChannelRealization.from_taps(taps, 4)
    s_d = comm.random_symbols(4, 2, 0)
    ser = comm.empirical_ser(h, s_d, s_d, comm.esn0_to_noise_std(6.0), 4000, 1)
    p = comm.qpsk_ser_theory(6.0)
    assert abs(ser - p) < 3 * np.sqrt(p * (1 - p) / 32000)
    assert np.allclose(apply_freq_channel(h, s_d), s_d)
