import math

import numpy as np
import pytest
from scipy.special import erfc

from occloc.modem import (
    LedIdFrame,
    FRAME_BITS,
    BadCrc,
    BadPreamble,
    SampledWaveform,
    add_awgn,
    crc8,
    decode_frame,
    demodulate,
    encode_frame,
    measure_ber,
    modulate,
)


def crc8_table_oracle(data: bytes) -> int:
    """Independent table-driven CRC-8/0x07 for cross-checking."""
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07 if crc & 0x80 else crc << 1) & 0xFF
        table.append(crc)
    crc = 0
    for b in data:
        crc = table[crc ^ b]
    return crc


def q_function(x):
    return 0.5 * erfc(x / math.sqrt(2.0))


class TestCrc8:
    def test_known_check_value(self):
        assert crc8(b"123456789") == 0xF4

    def test_matches_table_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            data = bytes(rng.integers(0, 256, size=rng.integers(1, 16)))
            assert crc8(data) == crc8_table_oracle(data)


def bits_to_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


class TestEncodeFrame:
    def test_zero_payload(self):
        bits = encode_frame(0, 0)
        assert len(bits) == FRAME_BITS == 48
        assert bits_to_int(bits[:8]) == 0xAA
        assert bits_to_int(bits[8:40]) == 0
        assert bits_to_int(bits[40:]) == crc8_table_oracle(b"\x00\x00\x00\x00")

    def test_worked_coordinates(self):
        bits = encode_frame(200, 150)
        payload = bits_to_int(bits[8:40]).to_bytes(4, "big")
        assert payload == bytes([0x00, 0xC8, 0x00, 0x96])
        assert bits_to_int(bits[40:]) == crc8_table_oracle(payload)

    def test_all_ones_payload(self):
        bits = encode_frame(65535, 65535)
        assert bits_to_int(bits[8:40]) == 0xFFFFFFFF

    def test_overflow(self):
        with pytest.raises(ValueError):
            encode_frame(65536, 0)
        with pytest.raises(ValueError):
            encode_frame(0, -1)


class TestModulate:
    def test_two_bit_expansion(self):
        wave = modulate(np.array([1, 0]), 2, high_level=1.0, dim_level=0.0)
        assert list(wave.samples) == [1.0, 1.0, 0.0, 0.0]

    def test_identity_expansion(self):
        bits = np.array([1, 0, 1, 1], dtype=np.uint8)
        wave = modulate(bits, 1, 1.0, 0.0)
        assert list(wave.samples) == [1.0, 0.0, 1.0, 1.0]

    def test_preamble_square_wave(self):
        spb = 3
        wave = modulate(encode_frame(0, 0)[:8], spb, 1.0, 0.0)
        period = 2 * spb
        samples = list(wave.samples)
        assert samples[:period] * 4 == samples

    def test_level_ordering_enforced(self):
        with pytest.raises(ValueError):
            modulate(np.array([1, 0]), 2, high_level=0.5, dim_level=0.5)


class TestAddAwgn:
    def test_zero_sigma_identity(self):
        wave = modulate(np.array([1, 0, 1]), 2)
        assert add_awgn(wave, 0.0, 1) is wave

    def test_reproducible(self):
        wave = modulate(np.array([1, 0, 1]), 2)
        a = add_awgn(wave, 0.5, 99)
        b = add_awgn(wave, 0.5, 99)
        assert np.array_equal(a.samples, b.samples)

    def test_noise_mean_vanishes(self):
        wave = SampledWaveform(np.zeros(1_000_000), 1)
        noisy = add_awgn(wave, 1.0, 7)
        # law of large numbers: |mean| below 4 sigma / sqrt(N)
        assert abs(noisy.samples.mean()) < 4.0 / 1000.0


class TestDemodulate:
    def test_round_trip(self):
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, size=480).astype(np.uint8)
        wave = modulate(bits, 4, high_level=1.0, dim_level=0.1)
        assert np.array_equal(demodulate(wave), bits)

    def test_all_below_threshold(self):
        wave = SampledWaveform(np.full(40, 0.2), 4)
        assert not demodulate(wave, threshold=0.5).any()

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            SampledWaveform(np.zeros(5), 2)


class TestDecodeFrame:
    def test_round_trip(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            x, y = int(rng.integers(0, 65536)), int(rng.integers(0, 65536))
            assert decode_frame(encode_frame(x, y)) == (x, y)

    def test_single_bit_flip_always_caught(self):
        # every flippable payload+crc position, across many frames
        rng = np.random.default_rng(13)
        for _ in range(100):
            x, y = int(rng.integers(0, 65536)), int(rng.integers(0, 65536))
            frame = encode_frame(x, y)
            for pos in range(8, 48):
                corrupted = frame.copy()
                corrupted[pos] ^= 1
                with pytest.raises(BadCrc):
                    decode_frame(corrupted)

    def test_preamble_flip(self):
        frame = encode_frame(1, 2)
        frame[3] ^= 1
        with pytest.raises(BadPreamble):
            decode_frame(frame)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            decode_frame(np.zeros(47, dtype=np.uint8))


class TestFullChainRoundTrip:
    def test_lossless_at_zero_noise(self):
        rng = np.random.default_rng(17)
        for _ in range(10_000):
            x, y = int(rng.integers(0, 65536)), int(rng.integers(0, 65536))
            wave = modulate(encode_frame(x, y), 4)
            assert decode_frame(demodulate(wave)) == (x, y)

    def test_frame_view_matches_codec(self):
        frame = LedIdFrame(200, 150)
        assert frame.payload == bytes([0x00, 0xC8, 0x00, 0x96])
        assert np.array_equal(frame.bits(), encode_frame(200, 150))
        assert frame.crc == crc8_table_oracle(frame.payload)
        with pytest.raises(ValueError):
            LedIdFrame(-1, 0)


class TestMeasureBer:
    def test_noise_free_limit(self):
        assert measure_ber(1e6, 10_000, 1) == 0.0

    def test_zero_snir_is_coin_flip(self):
        ber = measure_ber(0.0, 100_000, 2)
        assert abs(ber - 0.5) < 3.0 * math.sqrt(0.25 / 100_000)

    @pytest.mark.parametrize("snir,seed", [(4.0, 3), (9.0, 4)])
    def test_matches_analytic_curve(self, snir, seed):
        n = 100_000
        p = q_function(math.sqrt(snir))
        ber = measure_ber(snir, n, seed)
        assert abs(ber - p) <= 3.0 * math.sqrt(p * (1 - p) / n)

    def test_requires_enough_bits(self):
        with pytest.raises(ValueError):
            measure_ber(1.0, 9_999, 1)
