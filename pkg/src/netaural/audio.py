"""Audible renderings of node waveforms: 16-bit PCM WAV, spectra, spectrograms.

Normalisation here is for listening only; any analysis should read the raw
waveforms, since peak scaling discards amplitude differences between nodes.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

DEFAULT_RATE = 11025
DEFAULT_PEAK = 0.9
FULL_SCALE = 32767


class WavFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate: int = DEFAULT_RATE

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("an audio clip needs a non-empty 1-D sample array")
        if s.min() < -32768 or s.max() > 32767:
            raise ValueError("samples out of 16-bit range")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", s.astype(np.int16))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __eq__(self, other):
        if not isinstance(other, AudioClip):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)


def waveform_to_clip(column, sample_rate: int = DEFAULT_RATE, peak: float = DEFAULT_PEAK) -> AudioClip:
    """Scale a waveform so its largest magnitude maps to ``peak`` of full scale."""
    if not 0.0 < peak <= 1.0:
        raise ValueError("peak must lie in (0, 1]")
    col = np.asarray(column, dtype=np.float64)
    top = np.abs(col).max() if col.size else 0.0
    scale = peak / top if top > 0 else 0.0
    pcm = np.round(scale * col * FULL_SCALE)
    return AudioClip(pcm.astype(np.int16), sample_rate)


def concat_all_nodes(s: np.ndarray, sample_rate: int = DEFAULT_RATE, gap: float = 0.0,
                     peak: float = DEFAULT_PEAK) -> AudioClip:
    """One clip per node in id order, each normalised on its own, joined by ``gap`` seconds of silence."""
    silence = np.zeros(int(round(gap * sample_rate)), dtype=np.int16)
    parts = []
    for v in range(s.shape[1]):
        if v and silence.size:
            parts.append(silence)
        parts.append(waveform_to_clip(s[:, v], sample_rate, peak).samples)
    return AudioClip(np.concatenate(parts), sample_rate)


def write_wav(clip: AudioClip) -> bytes:
    """Canonical 44-byte-header RIFF/WAVE, PCM, mono, 16-bit little-endian."""
    data = clip.samples.astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(data), b"WAVE",
        b"fmt ", 16, 1, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16,
        b"data", len(data),
    )
    return header + data


def read_wav(data: bytes) -> AudioClip:
    """Parse the canonical layout written by :func:`write_wav`."""
    if len(data) < 44:
        raise WavFormatError("file shorter than a WAV header")
    (riff, size, wave, fmt, fmt_len, tag, channels, rate, byte_rate,
     align, bits, data_id, data_len) = struct.unpack_from("<4sI4s4sIHHIIHH4sI", data)
    if riff != b"RIFF" or wave != b"WAVE" or fmt != b"fmt " or data_id != b"data":
        raise WavFormatError("not a canonical RIFF/WAVE file")
    if (tag, channels, bits, fmt_len) != (1, 1, 16, 16):
        raise WavFormatError("only mono 16-bit PCM is supported")
    if size != 36 + data_len or len(data) != 44 + data_len:
        raise WavFormatError("chunk sizes disagree with file length")
    samples = np.frombuffer(data, dtype="<i2", offset=44, count=data_len // 2)
    return AudioClip(samples.copy(), rate)


def spectrum(column) -> np.ndarray:
    """DFT magnitudes for bins 0..l/2."""
    col = np.asarray(column, dtype=np.float64)
    if col.size == 0:
        raise ValueError("empty column")
    return np.abs(np.fft.rfft(col))


def spectrogram(column, window: int = 256, hop: int = 128) -> np.ndarray:
    """Hann-windowed STFT magnitudes, shape ``(frames, window // 2 + 1)``.

    No padding: ``frames = 1 + (l - window) // hop``.
    """
    col = np.asarray(column, dtype=np.float64)
    if col.size < window:
        raise ValueError(f"column of length {col.size} is shorter than the window ({window})")
    frames = np.lib.stride_tricks.sliding_window_view(col, window)[::hop]
    # periodic Hann, the usual choice for spectral analysis
    hann = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(window) / window)
    return np.abs(np.fft.rfft(frames * hann, axis=1))


def matrix_csv(rows: np.ndarray, header: list[str]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in np.atleast_2d(rows):
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def spectrum_csv(mags: np.ndarray, length: int, sample_rate: int = DEFAULT_RATE) -> str:
    bins = np.arange(mags.shape[0])
    freqs = bins * sample_rate / length
    return matrix_csv(np.column_stack([bins, freqs, mags]), ["bin", "frequency_hz", "magnitude"])


def spectrogram_csv(spec: np.ndarray) -> str:
    frames = np.arange(spec.shape[0])[:, None]
    return matrix_csv(np.hstack([frames, spec]), ["frame"] + [f"bin_{k}" for k in range(spec.shape[1])])
