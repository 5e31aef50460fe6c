"""Smoke tests for the Python bindings."""

import json
import math

import numpy as np
import pytest

import diarkit


def sine(hz, seconds, rate=16000, amp=1.0):
    n = np.arange(int(round(seconds * rate)))
    return diarkit.AudioBuffer((amp * np.sin(2 * np.pi * hz * n / rate)).astype(np.float32), rate)


def test_version():
    assert diarkit.__version__ == "0.1.0"


def test_wav_round_trip(tmp_path):
    audio = sine(440.0, 0.5, amp=0.5)
    path = tmp_path / "tone.wav"
    diarkit.write_wav(path, audio)
    back = diarkit.read_wav(path)
    assert back.sample_rate == 16000
    assert np.max(np.abs(back.samples - audio.samples)) < 1.0 / 32768 + 1e-7


def test_log_mel_shape_and_scaling():
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.4, 0.4, 16000).astype(np.float32)
    a = diarkit.log_mel(diarkit.AudioBuffer(x, 16000), 80)
    b = diarkit.log_mel(diarkit.AudioBuffer(2 * x, 16000), 80)
    assert a.shape == (98, 80)
    assert np.allclose(b - a, math.log(4.0), atol=1e-6)


def test_bandwidth_partition():
    assert diarkit.classify_bandwidth(sine(1000.0, 2.0)).value == diarkit.Bandwidth.CTS
    rng = np.random.default_rng(1)
    noise = diarkit.AudioBuffer(rng.uniform(-1, 1, 32000).astype(np.float32), 16000)
    assert diarkit.classify_bandwidth(noise).value == diarkit.Bandwidth.NCTS
    with pytest.raises(diarkit.PreconditionError):
        diarkit.classify_bandwidth(sine(1000.0, 1.0, rate=8000))


def test_rttm_and_der():
    turn = diarkit.RttmTurn("rec1", 1.25, 3.5, "spk01")
    text = diarkit.emit_rttm([turn])
    assert text == "SPEAKER rec1 1 1.250 3.500 <NA> <NA> spk01 <NA> <NA>\n"
    assert diarkit.parse_rttm(text) == [turn]

    ref = diarkit.Diarization("rec", [diarkit.Turn(diarkit.Segment(0, 5), "A"), diarkit.Turn(diarkit.Segment(5, 10), "B")])
    hyp = diarkit.Diarization("rec", [diarkit.Turn(diarkit.Segment(0, 10), "X")])
    report = diarkit.compute_der(ref, hyp)
    assert report.der == pytest.approx(0.5)
    assert report.confusion == pytest.approx(0.5)
    with pytest.raises(diarkit.InputError):
        diarkit.compute_der(ref, diarkit.Diarization("other", []))


def test_clustering_on_synthetic_embeddings():
    spec = diarkit.SynthSpec()
    spec.n_speakers = 3
    spec.noise_sigma = 0.05
    spec.seed = 4
    segments, truth, _ = diarkit.gen_embedding_stream(spec)
    xs = [s.embedding for s in segments]
    ahc = diarkit.ahc(xs)
    assert ahc.num_clusters() == 3
    labels, k, eigenvalues = diarkit.spectral_cluster(diarkit.cosine_affinity(xs), seed=1)
    assert k == 3
    assert eigenvalues == sorted(eigenvalues)
    # Same partition as the truth up to relabelling.
    pairs = {(a, b) for a, b in zip(labels, truth)}
    assert len(pairs) == 3


def test_merge_modes():
    e = diarkit.EmbeddedSegment
    segs = [e(diarkit.Segment(0, 1), [1.0, 0.0]), e(diarkit.Segment(1, 2), [1.0, 0.0]), e(diarkit.Segment(2, 3), [0.6, 0.8])]
    assert diarkit.recursive_merge(segs, 0.5)[0].embedding == pytest.approx([0.8, 0.4])
    assert diarkit.recursive_merge(segs, 0.5, "members")[0].embedding == pytest.approx([2.6 / 3, 0.8 / 3])
    with pytest.raises(diarkit.ParameterError):
        diarkit.recursive_merge(segs, 0.5, "median")


def test_postprocess_and_median():
    assert diarkit.median_filter([0, 0, 1, 0, 0], 3) == [0, 0, 0, 0, 0]
    d = diarkit.postprocess([[0.9] * 100, [0.1] * 100], ["spk01", "spk02"], [diarkit.Segment(0, 1)])
    assert d.speakers() == ["spk01"]


def test_config():
    cfg = diarkit.PipelineConfig()
    assert "merge_threshold=0.59999999999999998" in cfg.to_text() or "merge_threshold=0.6" in cfg.to_text()
    cfg.set("tsvad_threshold", "0.7")
    assert "tsvad_threshold=0.69999999999999996" in cfg.to_text() or "tsvad_threshold=0.7" in cfg.to_text()
    with pytest.raises(diarkit.ConfigError):
        cfg.set("nope", "1")
    assert "merge_mean" in diarkit.PipelineConfig.keys()


def test_diarize_synthetic_call():
    spec = diarkit.SynthSpec()
    spec.duration_s = 30.0
    spec.seed = 9
    audio, ref = diarkit.gen_audio_conversation(spec, "call")
    speech = [t.segment for t in ref.turns]
    hyp, report = diarkit.diarize(audio, "call", speech, stub_embeddings=True)
    rep = json.loads(report)
    assert rep["class"] == "CTS"
    assert rep["mode"] == "task1"
    assert rep["vad_model_loaded"] is False
    assert diarkit.compute_der(ref, hyp).der < 0.05
