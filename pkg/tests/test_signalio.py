import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from twinforge.signalio import (
    PreprocessConfig,
    RawRecord,
    RecordFormatError,
    Segment,
    SegmentSet,
    add_training_noise,
    augment,
    detrend_linear,
    load_record,
    load_segments,
    merge,
    preprocess,
    save_record,
    save_segments,
    segment_record,
    segment_rng,
    standardize,
    window_count,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def _write_csv(path, header, rows):
    lines = [",".join(map(str, header))] + [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def test_load_csv_two_channels(tmp_path):
    p = tmp_path / "r.csv"
    _write_csv(p, (2, 10, 100), [(i, -i) for i in range(10)])
    rec = load_record(p)
    assert (rec.channels, rec.samples_per_channel, rec.sample_rate_hz) == (2, 10, 100.0)
    assert rec.data[1, 3] == -3


def test_load_csv_with_named_header_row(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("channels,samples,rate_hz\n1,3,100\n1\n2\n3\n")
    assert load_record(p).data.tolist() == [[1, 2, 3]]


def test_nan_cell_is_rejected(tmp_path):
    p = tmp_path / "r.csv"
    _write_csv(p, (2, 4, 100), [(0, 1), (2, "nan"), (4, 5), (6, 7)])
    with pytest.raises(RecordFormatError, match=r"non-finite sample at \(1,1\)"):
        load_record(p)


@pytest.mark.parametrize(
    "header, rows, msg",
    [
        (("x", 2, 100), [(1,), (2,)], "malformed header"),
        ((1, 3, 100), [(1,), (2,)], "declares 3 samples"),
        ((2, 2, 100), [(1, 2), (3,)], "expected 2"),
    ],
)
def test_malformed_csv(tmp_path, header, rows, msg):
    p = tmp_path / "r.csv"
    _write_csv(p, header, rows)
    with pytest.raises(RecordFormatError, match=msg):
        load_record(p)


def test_binary_channel_length_mismatch(tmp_path):
    p = tmp_path / "r.twf"
    save_record(RawRecord(np.ones((2, 5)), 100.0), p)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(RecordFormatError, match="channel length mismatch"):
        load_record(p)


def test_detrend_exact_line_and_constant():
    t = np.arange(10.0)
    assert np.allclose(detrend_linear(3 + 2 * t), 0, atol=1e-12)
    assert np.allclose(detrend_linear(np.full(7, 4.2)), 0, atol=1e-12)


def test_detrend_quadratic_matches_normal_equations():
    t = np.arange(5.0)
    y = t**2
    A = np.column_stack([np.ones(5), t])
    coef = np.linalg.solve(A.T @ A, A.T @ y)
    assert np.allclose(detrend_linear(y), y - A @ coef, atol=1e-12)
    # residual of t^2 on 0..4 is (2, -1, -2, -1, 2)
    assert np.allclose(detrend_linear(y), [2, -1, -2, -1, 2], atol=1e-12)


def test_detrend_too_short():
    with pytest.raises(ValueError):
        detrend_linear([1.0])


def test_standardize_hand_values():
    assert np.allclose(standardize([1, 2, 3]), [-np.sqrt(1.5), 0, np.sqrt(1.5)], atol=1e-12)


def test_standardize_constant_rejected():
    with pytest.raises(ValueError):
        standardize([5, 5, 5])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(3, 200), elements=finite))
def test_preprocess_properties(x):
    if np.std(x - np.polyval(np.polyfit(np.arange(len(x)), x, 1), np.arange(len(x)))) < 1e-6:
        return
    cfg = PreprocessConfig(segment_length=len(x))
    y = preprocess(x, cfg)
    assert abs(y.mean()) < 1e-9
    assert abs(np.sqrt(np.mean(y**2)) - 1) < 1e-6
    t = np.arange(len(y)) - (len(y) - 1) / 2
    assert abs(t @ y / (t @ t)) < 1e-9
    assert np.allclose(preprocess(y, cfg), y, atol=1e-9)


@pytest.mark.parametrize(
    "n, L, overlap, expected",
    [(65536, 1201, 0, 54), (65536, 301, 0, 217), (1201, 1201, 0, 1), (1200, 1201, 0, 0), (10, 4, 2, 4)],
)
def test_window_count(n, L, overlap, expected):
    assert window_count(n, L, overlap) == expected


def test_segment_record_tiles_prefix():
    rng = np.random.default_rng(0)
    rec = RawRecord(rng.standard_normal((2, 1000)), 100.0, "x")
    cfg = PreprocessConfig(segment_length=300)
    segs = segment_record(rec, cfg, 1)
    assert len(segs) == 2 * 3
    assert segs.counts_per_label == {1: 6}
    s = segs.segments[4]
    assert (s.channel_index, s.window_index) == (1, 1)
    assert np.allclose(s.values, preprocess(rec.data[1, 300:600], cfg))


def test_segment_record_boundaries():
    cfg = PreprocessConfig(segment_length=1201)
    rng = np.random.default_rng(1)
    assert len(segment_record(RawRecord(rng.standard_normal((1, 1201)), 100.0), cfg, 0)) == 1
    with pytest.raises(ValueError, match="shorter than one"):
        segment_record(RawRecord(rng.standard_normal((1, 1200)), 100.0), cfg, 0)


def test_overlap_validation():
    with pytest.raises(ValueError):
        PreprocessConfig(segment_length=10, overlap=10)


def test_training_noise():
    seg = Segment(np.zeros(1201))
    assert add_training_noise(seg, 0.0, np.random.default_rng(0)) is seg
    a = add_training_noise(seg, 0.01, np.random.default_rng(3))
    b = add_training_noise(seg, 0.01, np.random.default_rng(3))
    c = add_training_noise(seg, 0.01, np.random.default_rng(4))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert abs(np.var(a.values) / 1e-4 - 1) < 0.2


def test_augment_independent_of_order():
    rng = np.random.default_rng(0)
    segs = [Segment(rng.standard_normal(50), ch, w, 0, "s") for ch in range(2) for w in range(3)]
    fwd = augment(SegmentSet(segs), 0.01, 9)
    rev = augment(SegmentSet(segs[::-1]), 0.01, 9)
    for a, b in zip(fwd.segments, rev.segments[::-1]):
        assert np.array_equal(a.values, b.values)
    assert segment_rng(9, 0, 0).random() == segment_rng(9, 0, 0).random()


def test_record_and_segment_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    rec = RawRecord(rng.standard_normal((3, 700)), 100.0, "orig")
    save_record(rec, tmp_path / "r.twf")
    back = load_record(tmp_path / "r.twf")
    assert back.data.tobytes() == rec.data.tobytes()
    cfg = PreprocessConfig(segment_length=200)
    segs = merge(segment_record(back, cfg, 0), segment_record(back, cfg, 1))
    save_segments(segs, tmp_path / "s.twf", cfg)
    again = load_segments(tmp_path / "s.twf")
    assert again.matrix().tobytes() == segs.matrix().tobytes()
    assert again.labels().tolist() == segs.labels().tolist()
    assert [s.source_tag for s in again.segments] == ["r"] * len(segs)


def test_csv_record_round_trip(tmp_path):
    rec = RawRecord(np.random.default_rng(5).standard_normal((2, 20)), 50.0)
    save_record(rec, tmp_path / "r.csv")
    assert load_record(tmp_path / "r.csv").data.tobytes() == rec.data.tobytes()


def test_merge_requires_one_rate():
    a = SegmentSet([Segment(np.zeros(4))], 100.0)
    b = SegmentSet([Segment(np.zeros(4))], 50.0)
    with pytest.raises(ValueError):
        merge(a, b)


def test_require_both_labels():
    with pytest.raises(ValueError, match="both condition labels"):
        SegmentSet([Segment(np.zeros(4), condition_label=0)]).validate(require_both_labels=True)
