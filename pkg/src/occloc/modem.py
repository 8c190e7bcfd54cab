"""LED-ID framing and OOK transport over a rolling-shutter sample stream.

Each fixture broadcasts a 48-bit frame: an alternating 8-bit preamble, its
ceiling coordinates as two big-endian 16-bit centimeter fields, and a CRC-8
(polynomial 0x07) over the 32 payload bits. The shutter reads the scene row by
row, so the waveform is modeled as one intensity sample per row exposure;
bit '1' is the bright level, bit '0' a dim (never fully off) level.

Frames are assumed sample-aligned: no synchronization search is performed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PREAMBLE = 0xAA
PREAMBLE_BITS = 8
PAYLOAD_BITS = 32
CRC_BITS = 8
FRAME_BITS = PREAMBLE_BITS + PAYLOAD_BITS + CRC_BITS


class FrameError(ValueError):
    """An undecodable sighting; callers drop the detection."""


class BadPreamble(FrameError):
    pass


class BadCrc(FrameError):
    pass


def crc8(data: bytes) -> int:
    """CRC-8, polynomial 0x07, init 0x00, MSB first, no reflection or final xor."""
    crc = 0
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07 if crc & 0x80 else crc << 1) & 0xFF
    return crc


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


@dataclass(frozen=True)
class LedIdFrame:
    """Structured view of one broadcast: coordinate payload plus its checksum."""

    x_cm: int
    y_cm: int

    def __post_init__(self):
        for name, v in (("x_cm", self.x_cm), ("y_cm", self.y_cm)):
            if not (0 <= v < 2**16):
                raise ValueError(f"{name}={v} does not fit 16 bits")

    @property
    def payload(self) -> bytes:
        return bytes([self.x_cm >> 8, self.x_cm & 0xFF, self.y_cm >> 8, self.y_cm & 0xFF])

    @property
    def crc(self) -> int:
        return crc8(self.payload)

    def bits(self) -> np.ndarray:
        return np.concatenate(
            [
                _int_to_bits(PREAMBLE, PREAMBLE_BITS),
                _int_to_bits(int.from_bytes(self.payload, "big"), PAYLOAD_BITS),
                _int_to_bits(self.crc, CRC_BITS),
            ]
        )


def encode_frame(x_cm: int, y_cm: int) -> np.ndarray:
    """Serialize fixture coordinates into the 48-bit frame (most significant bit first)."""
    return LedIdFrame(x_cm, y_cm).bits()


def decode_frame(bits: np.ndarray) -> tuple[int, int]:
    """Recover (x_cm, y_cm) from 48 bits; raises BadPreamble / BadCrc on corruption."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (FRAME_BITS,):
        raise ValueError(f"frame must be exactly {FRAME_BITS} bits, got {bits.shape}")
    if _bits_to_int(bits[:PREAMBLE_BITS]) != PREAMBLE:
        raise BadPreamble("preamble mismatch")
    payload_bits = bits[PREAMBLE_BITS : PREAMBLE_BITS + PAYLOAD_BITS]
    payload = _bits_to_int(payload_bits).to_bytes(4, "big")
    if crc8(payload) != _bits_to_int(bits[PREAMBLE_BITS + PAYLOAD_BITS :]):
        raise BadCrc("checksum mismatch")
    return (payload[0] << 8) | payload[1], (payload[2] << 8) | payload[3]


@dataclass(frozen=True)
class SampledWaveform:
    """Row-exposure intensity stream: samples, expansion factor, and the AWGN
    sigma already applied to them (0 for a clean waveform)."""

    samples: np.ndarray
    samples_per_bit: int
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.samples_per_bit < 1:
            raise ValueError("samples_per_bit must be at least 1")
        if len(self.samples) % self.samples_per_bit != 0:
            raise ValueError("sample count is not a whole number of bits")


def modulate(
    bits: np.ndarray,
    samples_per_bit: int,
    high_level: float = 1.0,
    dim_level: float = 0.1,
) -> SampledWaveform:
    """Expand bits to constant-level samples: '1' -> high_level, '0' -> dim_level."""
    if not high_level > dim_level >= 0.0:
        raise ValueError("levels must satisfy high > dim >= 0")
    bits = np.asarray(bits, dtype=np.uint8)
    levels = np.where(bits == 1, high_level, dim_level)
    return SampledWaveform(np.repeat(levels, samples_per_bit), samples_per_bit)


def add_awgn(wave: SampledWaveform, sigma: float, seed: int) -> SampledWaveform:
    """White Gaussian noise on every sample; sigma = 0 returns the wave unchanged."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return wave
    rng = np.random.default_rng(seed)
    noisy = wave.samples + rng.normal(0.0, sigma, size=len(wave.samples))
    return SampledWaveform(noisy, wave.samples_per_bit, sigma)


def demodulate(wave: SampledWaveform, threshold: float | None = None) -> np.ndarray:
    """Per-bit averaging detector: mean of each bit's samples against a threshold.

    With no threshold given, the midpoint of the observed sample range is used;
    that inverts modulate exactly on a noise-free waveform.
    """
    samples = np.asarray(wave.samples, dtype=float)
    if threshold is None:
        threshold = 0.5 * (samples.min() + samples.max())
    means = samples.reshape(-1, wave.samples_per_bit).mean(axis=1)
    return (means > threshold).astype(np.uint8)


def measure_ber(snir_linear: float, n_bits: int, seed: int) -> float:
    """Monte-Carlo OOK error rate at a given linear SNIR.

    Unit-sigma noise; the on/off separation is 2*sqrt(SNIR) with the decision
    threshold at the midpoint, so the distance from either level to the
    threshold is sqrt(SNIR) sigmas and Q(sqrt(SNIR)) is the exact analytic
    counterpart.
    """
    if snir_linear < 0:
        raise ValueError("SNIR must be non-negative")
    if n_bits < 10_000:
        raise ValueError("need at least 1e4 bits for a meaningful error rate")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=n_bits).astype(np.uint8)
    amplitude = float(np.sqrt(snir_linear))
    rx = SampledWaveform(
        bits.astype(float) * (2.0 * amplitude) + rng.normal(0.0, 1.0, size=n_bits),
        samples_per_bit=1,
        noise_sigma=1.0,
    )
    decided = demodulate(rx, threshold=amplitude)
    return float(np.mean(decided != bits))
