import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmwave_ia.channel import LOS, NLOS, ChannelParams
from mmwave_ia.errors import FormatError, ShapeError
from mmwave_ia.scenario import (
    NormalizationScale,
    apply_normalization,
    build_dataset,
    export_csv,
    fit_normalization,
    load_dataset,
    sample_receivers,
    save_dataset,
    split_dataset,
    true_beam_label,
)


@pytest.mark.parametrize("az, beam", [(0.0, 1), (7.9, 1), (8.0, 2), (353.0, 1), (352.0, 24), (359.99, 1), (22.5, 2), (23.0, 3)])
def test_label_examples(az, beam):
    assert true_beam_label(az) == beam


def test_label_preimages_are_15_contiguous_degrees():
    labels = true_beam_label(np.arange(360))
    for b in range(1, 25):
        degs = np.nonzero(labels == b)[0]
        assert len(degs) == 15
        assert b == 1 or np.all(np.diff(degs) == 1)  # beam 1 wraps through 0
    assert set(np.nonzero(labels == 1)[0]) == set(range(353, 360)) | set(range(0, 8))


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 360, exclude_max=True, allow_nan=False))
def test_label_total_and_floor_based(a):
    b = true_beam_label(a)
    assert 1 <= b <= 24
    assert b == true_beam_label(float(np.floor(a)))


def test_receivers_respect_geometry():
    rec = sample_receivers(200_000, 25.0, 1.0, np.random.default_rng(0), 24)
    assert len(rec) == 200_000
    assert rec.distance.min() >= 1.0 and rec.distance.max() <= 25 * np.sqrt(2) + 1e-4
    assert np.all(np.abs(rec.x) <= 25) and np.all(np.abs(rec.y) <= 25)
    # azimuth consistent with atan2 and labels consistent with azimuth
    np.testing.assert_allclose(np.cos(np.deg2rad(rec.azimuth)) * rec.distance, rec.x, atol=1e-4)
    np.testing.assert_array_equal(rec.true_beam, true_beam_label(rec.azimuth))
    r0 = rec[0]
    assert r0.true_beam == rec.true_beam[0] and r0.id == 0


def test_exclusion_zero_boresight_gets_beam_one():
    from mmwave_ia.scenario import Receivers

    rec = Receivers(np.array([3.0, 0.5], np.float32), np.array([0.0, 0.0], np.float32), 24)
    assert list(rec.true_beam) == [1, 1]


def test_sector_occupancy_matches_monte_carlo_oracle():
    rec = sample_receivers(1_000_000, 25.0, 1.0, np.random.default_rng(5), 24)
    frac = np.bincount(rec.true_beam, minlength=25)[1:] / len(rec)
    # independent Monte-Carlo estimate of the same occupancy (square minus disk), different stream
    rng = np.random.default_rng(99)
    x, y = rng.uniform(-25, 25, (2, 2_000_000))
    keep = np.hypot(x, y) >= 1
    ref = np.bincount(true_beam_label(np.degrees(np.arctan2(y[keep], x[keep])) % 360), minlength=25)[1:] / keep.sum()
    np.testing.assert_allclose(frac, ref, atol=0.001)
    # a square is not angularly uniform: diagonal sectors hold up to ~5.8%, axis sectors ~3.3%
    assert frac.min() > 0.03 and frac.max() < 0.06


def test_bad_geometry_rejected():
    with pytest.raises(ValueError):
        sample_receivers(10, 1.0, 2.0, np.random.default_rng(0), 24)


def test_single_snapshot_features_are_raw(small_los):
    np.testing.assert_array_equal(small_los.features(1), small_los.rss_raw[:, :, 0].astype(np.float64))
    assert small_los.rss_features.shape == (6000, 24)
    assert np.all(np.isfinite(small_los.rss_raw))


def test_rss_composition():
    ds = build_dataset(500, ChannelParams(2.0, 0.0), seed=1, tx_power=20.0)
    from mmwave_ia.antenna import ArrayConfig, build_codebook
    from mmwave_ia.channel import mean_path_loss

    cb = build_codebook(ArrayConfig())
    expected = 20.0 + cb.gain_matrix(ds.receivers.azimuth) - mean_path_loss(ds.receivers.distance, ds.channel)[:, None]
    np.testing.assert_allclose(ds.features(), expected, atol=1e-4)


def test_snapshot_averaging_reduces_std():
    ds = build_dataset(100_000, NLOS, seed=4, snapshots=16)
    clean = build_dataset(100_000, ChannelParams(4.5, 0.0), seed=4, snapshots=1).features()[:, 0]
    base = np.std(ds.features(1)[:, 0] - clean)
    for s in (4, 16):
        assert np.std(ds.features(s)[:, 0] - clean) == pytest.approx(base / np.sqrt(s), rel=0.1)
    # doubling s halves the variance
    v2, v4 = np.var(ds.features(2)[:, 0] - clean), np.var(ds.features(4)[:, 0] - clean)
    assert v4 == pytest.approx(v2 / 2, rel=0.1)
    lin = ds.features(4, domain="linear")
    assert lin.shape == ds.features(4).shape and np.all(lin >= ds.features(4) - 1e-9)  # AM-GM in power
    with pytest.raises(ValueError):
        ds.features(17)


def test_shared_shadowing_is_common_across_beams():
    ds = build_dataset(2000, LOS, seed=3, shadowing="shared")
    clean = build_dataset(2000, ChannelParams(1.9, 0.0), seed=3).features()
    diff = ds.features() - clean
    np.testing.assert_allclose(diff, diff[:, :1].repeat(24, axis=1), atol=1e-3)
    assert np.all(np.argmax(ds.features(), 1) == np.argmax(clean, 1))


def test_generation_deterministic():
    a, b = build_dataset(3000, NLOS, seed=8, snapshots=3), build_dataset(3000, NLOS, seed=8, snapshots=3)
    np.testing.assert_array_equal(a.rss_raw, b.rss_raw)
    np.testing.assert_array_equal(a.split, b.split)
    assert not np.array_equal(a.rss_raw, build_dataset(3000, NLOS, seed=9, snapshots=3).rss_raw)


def test_split_sizes_and_determinism():
    ds = build_dataset(100, LOS, seed=0)
    assert ds.split_sizes() == {"train": 65, "val": 15, "test": 20}
    all_train = split_dataset(ds, (1.0, 0.0, 0.0), np.random.default_rng(1))
    assert all_train.split_sizes() == {"train": 100, "val": 0, "test": 0}
    p1 = split_dataset(ds, rng=np.random.default_rng(2)).split
    p2 = split_dataset(ds, rng=np.random.default_rng(2)).split
    np.testing.assert_array_equal(p1, p2)
    with pytest.raises(ValueError):
        split_dataset(ds, (0.5, 0.2, 0.2))


def test_linear_normalization_examples():
    one = fit_normalization(np.array([[-50.0]]), "linear")
    assert apply_normalization(np.array([[-50.0]]), one)[0, 0] == pytest.approx(1.0)
    rows = np.array([[-40.0, -45.0], [-50.0, -60.0]])
    sc = fit_normalization(rows, "linear")
    f = apply_normalization(rows, sc)
    assert f[1, 0] == pytest.approx(0.1) and f.max() == pytest.approx(1.0) and f.min() >= 0
    eq = np.full((5, 3), -70.0)
    np.testing.assert_allclose(apply_normalization(eq, fit_normalization(eq, "linear")), 1.0)
    assert sc.max_abs_linear == sc.scale


def test_db_normalization_unit_interval_and_monotone():
    rng = np.random.default_rng(0)
    rows = rng.uniform(-120, -30, (200, 7))
    sc = fit_normalization(rows, "db")
    f = apply_normalization(rows, sc)
    assert f.min() == 0.0 and f.max() == 1.0
    np.testing.assert_array_equal(np.argmax(f, 1), np.argmax(rows, 1))
    eq = np.full((4, 2), -70.0)
    np.testing.assert_allclose(apply_normalization(eq, fit_normalization(eq, "db")), 1.0)
    assert NormalizationScale.from_dict(sc.to_dict()) == sc
    with pytest.raises(AttributeError):
        sc.max_abs_linear
    with pytest.raises(ValueError):
        fit_normalization(np.zeros((0, 3)))


def test_dataset_round_trip(tmp_path):
    ds = build_dataset(1000, NLOS, channel_tag="nlos", seed=21, snapshots=2)
    p = tmp_path / "d.bin"
    save_dataset(ds, p)
    back = load_dataset(p)
    np.testing.assert_array_equal(back.rss_raw, ds.rss_raw)
    np.testing.assert_array_equal(back.receivers.x, ds.receivers.x)
    np.testing.assert_array_equal(back.split, ds.split)
    np.testing.assert_array_equal(back.true_beam, ds.true_beam)
    assert (back.seed, back.channel_tag, back.channel, back.tx_power) == (21, "nlos", NLOS, 20.0)
    assert back.meta == ds.meta


def test_corrupted_and_mismatched_files(tmp_path):
    ds = build_dataset(300, LOS, seed=2)
    p = tmp_path / "d.bin"
    save_dataset(ds, p)
    raw = bytearray(p.read_bytes())
    bad = tmp_path / "bad.bin"
    bad.write_bytes(bytes(raw[:20]) + b"#" * 10 + bytes(raw[30:]))
    with pytest.raises(FormatError):
        load_dataset(bad)
    bad.write_bytes(bytes(raw[:-7]))
    with pytest.raises(FormatError, match="truncated"):
        load_dataset(bad)
    flipped = bytearray(raw)
    flipped[-1] ^= 0xFF
    bad.write_bytes(bytes(flipped))
    with pytest.raises(FormatError, match="checksum"):
        load_dataset(bad)
    bad.write_bytes(b"nonsense")
    with pytest.raises(FormatError, match="magic"):
        load_dataset(bad)
    with pytest.raises(ShapeError):
        load_dataset(p, expected_n_beams=12)
    from mmwave_ia.antenna import ArrayConfig

    other = build_dataset(50, LOS, seed=2, n_beams=12, array=ArrayConfig())
    save_dataset(other, bad)
    with pytest.raises(ShapeError):
        load_dataset(bad, expected_n_beams=24)


def test_csv_export(tmp_path, small_los):
    p = tmp_path / "d.csv"
    export_csv(small_los, p)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("receiver,x,y,azimuth_deg,true_beam,split,rss_beam_1")
    assert len(lines) == 6001 and len(lines[1].split(",")) == 6 + 24
