import io
import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from netaural import audio
from netaural.auralize import auralize

from .helpers import parse_riff


class TestClip:
    def test_silent(self):
        assert np.all(audio.waveform_to_clip(np.zeros(10)).samples == 0)

    def test_scaling_example(self):
        clip = audio.waveform_to_clip([0.5, -1.0, 0.25], peak=0.9)
        assert clip.samples.tolist() == [14745, -29490, 7373]

    def test_full_scale(self):
        assert audio.waveform_to_clip([2, -2], peak=1.0).samples.tolist() == [32767, -32767]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            audio.AudioClip(np.zeros(0, dtype=np.int16))

    @given(arrays(np.float64, st.integers(1, 200), elements=st.floats(-1e6, 1e6)), st.floats(0.01, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_never_clips(self, col, peak):
        clip = audio.waveform_to_clip(col, peak=peak)
        assert np.abs(clip.samples.astype(int)).max() <= round(peak * 32767) + 1


class TestWav:
    def test_one_sample_header(self):
        data = audio.write_wav(audio.AudioClip(np.array([1000], dtype=np.int16), 11025))
        assert len(data) == 46
        assert data[22:24] == b"\x01\x00"
        assert data[:4] == b"RIFF" and struct.unpack_from("<I", data, 4)[0] == 38
        assert struct.unpack_from("<I", data, 24)[0] == 11025
        assert struct.unpack_from("<I", data, 28)[0] == 22050
        assert struct.unpack_from("<H", data, 32)[0] == 2
        assert struct.unpack_from("<H", data, 34)[0] == 16
        assert data[36:40] == b"data" and struct.unpack_from("<I", data, 40)[0] == 2
        assert data[44:] == struct.pack("<h", 1000)

    def test_independent_parsers(self):
        clip = audio.waveform_to_clip(np.sin(np.arange(500) * 0.3), 8000)
        data = audio.write_wav(clip)
        info = parse_riff(data)
        assert (info["tag"], info["channels"], info["rate"], info["bits"]) == (1, 1, 8000, 16)
        assert info["byte_rate"] == 16000 and info["align"] == 2
        np.testing.assert_array_equal(info["samples"], clip.samples)
        with wave.open(io.BytesIO(data)) as w:
            assert (w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()) == (1, 2, 8000, 500)
            np.testing.assert_array_equal(np.frombuffer(w.readframes(500), dtype="<i2"), clip.samples)

    def test_round_trip(self):
        clip = audio.AudioClip(np.array([-32768, 0, 32767, 5], dtype=np.int16), 22050)
        assert audio.read_wav(audio.write_wav(clip)) == clip

    def test_read_rejects_garbage(self):
        with pytest.raises(audio.WavFormatError):
            audio.read_wav(b"RIFX" + bytes(60))


class TestConcat:
    def test_duration_two_nodes(self):
        s = np.random.default_rng(0).normal(size=(10000, 2))
        clip = audio.concat_all_nodes(s, 11025, gap=0)
        assert clip.duration == pytest.approx(2 * 10000 / 11025)
        assert clip.duration == pytest.approx(1.814, abs=1e-3)

    def test_duration_fifteen(self):
        s = np.random.default_rng(1).normal(size=(10000, 15))
        assert audio.concat_all_nodes(s).duration == pytest.approx(13.6, abs=0.01)

    def test_single_node(self):
        s = np.random.default_rng(2).normal(size=(300, 1))
        assert audio.concat_all_nodes(s) == audio.waveform_to_clip(s[:, 0])

    def test_gap(self):
        s = np.ones((100, 3))
        clip = audio.concat_all_nodes(s, 1000, gap=0.05)
        assert clip.samples.size == 300 + 2 * 50

    def test_independent_normalisation(self):
        s = np.column_stack([np.sin(np.arange(64)), 100 * np.sin(np.arange(64))])
        clip = audio.concat_all_nodes(s, peak=1.0)
        np.testing.assert_array_equal(clip.samples[:64], clip.samples[64:])


class TestSpectrum:
    def test_zero(self):
        assert np.all(audio.spectrum(np.zeros(64)) == 0)

    def test_pure_tone(self):
        t = np.arange(256)
        mags = audio.spectrum(np.cos(2 * np.pi * 13 * t / 256))
        assert mags.shape == (129,) and int(np.argmax(mags)) == 13

    def test_path_alternation_is_nyquist(self, p3):
        s = auralize(p3, 0.0, 64)
        mags = audio.spectrum(s[:, 1])
        assert int(np.argmax(mags)) == 32

    @given(arrays(np.float64, st.integers(1, 300), elements=st.floats(-100, 100)))
    @settings(max_examples=50, deadline=None)
    def test_parseval(self, x):
        full = np.abs(np.fft.fft(x)) ** 2
        time_energy = float(np.sum(x ** 2))
        mags = audio.spectrum(x)
        l = x.size
        # rebuild the two-sided energy from the one-sided bins
        weights = np.full(mags.size, 2.0)
        weights[0] = 1.0
        if l % 2 == 0:
            weights[-1] = 1.0
        freq_energy = float(np.sum(weights * mags ** 2)) / l
        assert freq_energy == pytest.approx(time_energy, rel=1e-6, abs=1e-9)
        assert float(full.sum()) / l == pytest.approx(time_energy, rel=1e-6, abs=1e-9)


class TestSpectrogram:
    def test_frame_count(self):
        spec = audio.spectrogram(np.random.default_rng(0).normal(size=10000))
        assert spec.shape == (77, 129)

    def test_zero(self):
        assert np.all(audio.spectrogram(np.zeros(1000)) == 0)

    def test_stationary_tone(self):
        t = np.arange(4096)
        spec = audio.spectrogram(np.sin(2 * np.pi * t * 32 / 256))
        np.testing.assert_allclose(spec, np.repeat(spec[:1], spec.shape[0], axis=0), rtol=1e-6, atol=1e-8)

    def test_too_short(self):
        with pytest.raises(ValueError):
            audio.spectrogram(np.zeros(100))


def test_csv_exports():
    mags = audio.spectrum(np.cos(np.arange(8)))
    lines = audio.spectrum_csv(mags, 8, 8000).splitlines()
    assert lines[0] == "bin,frequency_hz,magnitude" and len(lines) == 6
    assert lines[2].startswith("1.0,1000.0,")
    spec = audio.spectrogram(np.zeros(512))
    assert audio.spectrogram_csv(spec).splitlines()[0].startswith("frame,bin_0,bin_1")
