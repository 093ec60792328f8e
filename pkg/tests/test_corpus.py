import numpy as np
import pytest

from reverbaug.acoustics import Diffusion, ImagePolyhedra, Rir
from reverbaug.corpus import (ANECHOIC, LabelTrack, ManifestEntry, MixRanges, Utterance,
                              augment_one, build_test_set, build_training_set, entry_seed,
                              expected_entries, iter_augmented, load_corpus_dir, load_entry,
                              load_utterance, pad_silence, read_labels, read_manifest,
                              synth_corpus, write_labels, write_manifest)
from reverbaug.dsp import Signal, measure_snr
from reverbaug.geometry import SimParams, sample_scenarios
from reverbaug.wavio import read_wav, write_wav

FS = 16000


def utt(n=FS, segs=((0.25, 0.75),), uid="u"):
    x = np.zeros(n)
    for a, b in segs:
        x[int(a * FS):int(b * FS)] = 0.3 * np.sin(np.arange(int(b * FS) - int(a * FS)) * 0.3)
    return Utterance(Signal(x, FS), LabelTrack(segs), uid)


# ---------------------------------------------------------------- labels

def test_label_validation():
    with pytest.raises(ValueError):
        LabelTrack([(0.5, 0.2)])
    with pytest.raises(ValueError):
        LabelTrack([(0.0, 0.5), (0.4, 0.8)])
    with pytest.raises(ValueError):
        LabelTrack([(-0.1, 0.5)])
    with pytest.raises(ValueError):
        Utterance(Signal(np.zeros(100), FS), LabelTrack([(0.0, 1.0)]), "x")


def test_label_shift_clips():
    lt = LabelTrack([(0.1, 0.3), (0.8, 0.95)]).shifted(0.1, 1.0)
    assert lt.segments == ((0.2, 0.4), (0.9, 1.0))
    assert LabelTrack([(0.1, 0.2)]).shifted(-0.3, 1.0).segments == ()


def test_label_file_roundtrip(tmp_path):
    lt = LabelTrack([(0.125, 0.5), (1.0, 1.75)])
    write_labels(lt, tmp_path / "a.txt")
    assert read_labels(tmp_path / "a.txt") == lt
    (tmp_path / "b.txt").write_text("# comment\n0.1 0.2 speech\n\n0.3 0.4\n")
    assert read_labels(tmp_path / "b.txt").segments == ((0.1, 0.2), (0.3, 0.4))


def test_load_corpus_dir(tmp_path):
    for name in ("b", "a"):
        write_wav(tmp_path / f"{name}.wav", np.full(800, 0.1), FS)
        (tmp_path / f"{name}.txt").write_text("0.0 0.02\n")
    c = load_corpus_dir(tmp_path)
    assert [u.utterance_id for u in c] == ["a", "b"]
    assert c[0].labels.segments == ((0.0, 0.02),)
    assert load_utterance(tmp_path / "a.wav", utterance_id="z").utterance_id == "z"


# ---------------------------------------------------------------- padding

def test_pad_append_and_prepend():
    u = utt()
    a = pad_silence(u, 2.0)
    assert a.signal.duration == pytest.approx(3.0)
    assert a.labels == u.labels
    assert a.speech_fraction == pytest.approx(0.5 / 3)
    p = pad_silence(u, 2.0, "prepend")
    assert p.labels.segments == ((2.25, 2.75),)
    np.testing.assert_array_equal(p.signal.samples[2 * FS:], u.signal.samples)
    s = pad_silence(u, 1.0, "split")
    assert s.labels.segments == ((0.75, 1.25),)
    assert pad_silence(u, 0.0) is u
    with pytest.raises(ValueError):
        pad_silence(u, -1.0)
    with pytest.raises(ValueError):
        pad_silence(u, 1.0, "middle")


# ---------------------------------------------------------------- synthetic corpus

def test_synth_corpus_deterministic_and_prefix_stable():
    a = synth_corpus(5, seed=3)
    b = synth_corpus(3, seed=3)
    for x, y in zip(a, b):
        assert x.signal.samples.tobytes() == y.signal.samples.tobytes()
        assert x.labels == y.labels
    assert a[0].utterance_id == "utt00000"
    assert not np.array_equal(a[0].signal.samples, synth_corpus(1, seed=4)[0].signal.samples)


def test_synth_corpus_properties():
    c = synth_corpus(40, seed=0)
    speech = sum(u.labels.speech_time() for u in c)
    total = sum(u.signal.duration for u in c)
    assert 0.4 < speech / total < 0.6
    for u in c:
        assert 2.0 <= u.signal.duration <= 4.0 + 1.6
        assert np.max(np.abs(u.signal.samples)) <= 0.5 + 1e-12
        mask = u.labels.sample_mask(len(u.signal), FS)
        assert np.all(u.signal.samples[~mask] == 0)
        assert np.mean(u.signal.samples[mask] ** 2) > 1e-3


# ---------------------------------------------------------------- seeds and manifests

def test_entry_seed():
    assert entry_seed(0, "a", "s") == entry_seed(0, "a", "s")
    assert len({entry_seed(0, "a", "s"), entry_seed(0, "b", "s"), entry_seed(0, "a", "t"),
                entry_seed(1, "a", "s")}) == 4


def test_mix_ranges_draw():
    m = MixRanges(snr_range=(10, 20))
    specs = [m.draw(s) for s in range(200)]
    snrs = [s.snr_db for s in specs]
    assert 10 <= min(snrs) and max(snrs) <= 20
    assert {s.noise_kind for s in specs} == {"white", "colored"}
    assert m.draw(5) == m.draw(5)
    with pytest.raises(ValueError):
        MixRanges(noise_kinds=("file",))
    with pytest.raises(ValueError):
        MixRanges(snr_range=(20, 10))


def test_manifest_roundtrip(tmp_path):
    e = [ManifestEntry("u2", str(tmp_path / "s.wav"), "s1", "diffusion", 12.5, "white", 7,
                       str(tmp_path / "audio" / "x.wav"), "", 0.8, 0.01),
         ManifestEntry("u1", "/elsewhere/s.wav", ANECHOIC, ANECHOIC, None, None, 1,
                       str(tmp_path / "y.wav"))]
    write_manifest(e, tmp_path / "m.jsonl")
    text = (tmp_path / "m.jsonl").read_text()
    assert str(tmp_path) not in text and "audio/x.wav" in text
    back = read_manifest(tmp_path / "m.jsonl")
    assert [b.utterance_id for b in back] == ["u1", "u2"]
    assert back[1] == e[0]
    assert back[0].source_path == "/elsewhere/s.wav"


def test_expected_entries():
    assert expected_entries(10, 20) == 210
    assert expected_entries(10, 20, include_anechoic=False) == 200


# ---------------------------------------------------------------- augmentation

def delta_rir(delay=0, n=64, sid="d"):
    h = np.zeros(n)
    h[delay] = 1.0
    return Rir(h, FS, None, sid, delay)


def test_augment_identity_rir_no_noise():
    u = utt()
    y, labels, g, spec = augment_one(u, delta_rir(), None, 0)
    assert spec is None and g == pytest.approx(1.0)
    np.testing.assert_allclose(y[:FS], u.signal.samples, atol=1e-12)
    assert labels == u.labels


def test_augment_shifts_labels_by_direct_delay():
    u = utt()
    y, labels, _, _ = augment_one(u, delta_rir(160, n=200), None, 0)
    assert labels.segments == ((0.26, 0.76),)
    assert y.size == FS + 199


def test_augment_noise_snr():
    u = utt()
    spec = MixRanges(snr_range=(15, 15)).draw(3)
    y, _, g, spec = augment_one(u, None, MixRanges(snr_range=(15, 15)), 3)
    mask = u.labels.sample_mask(FS, FS)
    clean = u.signal.samples * g
    assert measure_snr(clean, y - clean, mask) == pytest.approx(15.0, abs=1e-6)


def test_reverberant_output_level_matched():
    u = utt()
    sc = sample_scenarios(1, 1, (4, 6), (0.4, 0.5), seed=0)[0]
    from reverbaug.acoustics import simulate_rir
    rir = simulate_rir(sc, Diffusion())
    y, labels, g, _ = augment_one(u, rir, None, 0)
    assert y @ y == pytest.approx(u.signal.samples @ u.signal.samples, rel=1e-9)
    assert np.max(np.abs(y)) <= 0.99 + 1e-12
    assert labels.segments[0][0] == pytest.approx(0.25 + rir.peak_index / FS)


def test_build_training_set(tmp_path):
    corpus = synth_corpus(3, (1.0, 1.5), seed=1)
    scen = sample_scenarios(2, 2, (4, 6), (0.3, 0.4), seed=2)
    res = build_training_set(corpus, scen, Diffusion(), out_dir=tmp_path, seed=5,
                             params=SimParams(rir_length=0.3))
    assert not res.errors
    assert len(res) == expected_entries(3, 4) == 15
    assert len(list((tmp_path / "audio").glob("*.wav"))) == 15
    assert len(list((tmp_path / "rirs").glob("*.wav"))) == 4
    back = read_manifest(res.manifest_path)
    assert {e.scenario_id for e in back} == {ANECHOIC} | {s.scenario_id for s in scen}
    for e in back:
        u = load_entry(e)
        assert u.labels.end <= u.signal.duration + 1e-9
        assert 10 <= e.snr_db <= 20
        assert e.rir_model == (ANECHOIC if e.scenario_id == ANECHOIC else "diffusion")
    # the in-memory iterator reproduces the written audio up to PCM quantisation
    rirs = [Rir(*read_wav(tmp_path / "rirs" / f"{s.scenario_id}.wav"), None, s.scenario_id, 0)
            for s in scen[:1]]
    e0 = [e for e in back if e.scenario_id == ANECHOIC and e.utterance_id == "utt00000"][0]
    _, _, sig, _ = next(iter_augmented(corpus[:1], rirs, MixRanges(), seed=5))
    np.testing.assert_allclose(read_wav(e0.output_path)[0], sig.samples, atol=2 / 32768)


def test_build_training_set_reports_failed_scenarios(tmp_path):
    corpus = synth_corpus(2, (1.0, 1.2), seed=1)
    scen = sample_scenarios(1, 2, (4, 6), (0.3, 0.4), seed=2)
    res = build_training_set(corpus, scen, Diffusion(dt=1e-2), out_dir=tmp_path)
    assert len(res) == 2 and len(res.errors) == 2
    assert "errors.log" in {p.name for p in tmp_path.iterdir()}


def test_build_test_set(tmp_path):
    corpus = [utt(uid=f"u{i}") for i in range(10)]
    rirs = [delta_rir(0, sid=f"m{j}") for j in range(5)]
    res = build_test_set(corpus, rirs, tmp_path)
    assert len(res) == 50 and not res.errors
    e = res.entries[0]
    assert e.snr_db is None and e.rir_model == "measured"
    x = read_wav(e.output_path)[0]
    np.testing.assert_allclose(x[:FS], corpus[0].signal.samples, atol=1 / 32768)


def test_build_test_set_rate_mismatch(tmp_path):
    corpus = [utt(uid="u")]
    bad = Rir(np.r_[1.0, np.zeros(9)], 8000, None, "low", 0)
    res = build_test_set(corpus, [delta_rir(sid="ok"), bad], tmp_path)
    assert len(res) == 1 and len(res.errors) == 1 and "8000" in res.errors[0]


def test_build_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        build_training_set([], [], ImagePolyhedra(), out_dir=tmp_path)
    with pytest.raises(ValueError):
        build_training_set([utt()], [], ImagePolyhedra(), include_anechoic=False,
                           out_dir=tmp_path)
