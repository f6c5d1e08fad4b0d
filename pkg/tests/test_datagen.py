import math

import numpy as np
import pytest

from mpcnn.correlator import EpochParams, amplitude_m
from mpcnn.datagen import (
    BadMagicError,
    MultipathParams,
    ScenarioParams,
    ScenarioSpace,
    ShapeMismatchError,
    TruncatedPayloadError,
    build_dataset,
    build_tap_series_set,
    make_grid,
    read_dataset,
    render_snapshot,
    render_tap_series,
    sample_scenario,
    write_dataset,
)

TI = 1e-3
CN0 = 50.0


def scenario(mp=None):
    return ScenarioParams(epoch=EpochParams(ti=TI, cn0_dbhz=CN0), mp=mp)


def space(**kw):
    base = dict(ti=TI, cn0_dbhz=CN0, n=10)
    base.update(kw)
    return ScenarioSpace(**base)


class TestGrid:
    def test_n4_doppler_axis(self):
        g = make_grid(4, TI)
        np.testing.assert_allclose(
            g.doppler_axis, [-1000.0, -1000.0 / 3, 1000.0 / 3, 1000.0], rtol=1e-12
        )

    def test_n2_code_axis(self):
        g = make_grid(2, 5e-3)
        np.testing.assert_array_equal(g.code_axis, [-1.0, 1.0])

    def test_20ms_extremes(self):
        g = make_grid(40, 20e-3)
        assert g.doppler_axis[0] == -50.0
        assert g.doppler_axis[-1] == 50.0

    def test_axes_symmetric_increasing(self):
        g = make_grid(7, TI)
        assert np.all(np.diff(g.doppler_axis) > 0)
        np.testing.assert_allclose(g.doppler_axis, -g.doppler_axis[::-1], atol=1e-9)

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            make_grid(1, TI)


class TestRenderSnapshot:
    def test_clean_origin_cell(self):
        # odd n puts (0, 0) exactly on the grid
        g = make_grid(9, TI)
        snap = render_snapshot(scenario(), g, rng=None)
        m = amplitude_m(EpochParams(ti=TI, cn0_dbhz=CN0))
        assert snap.tensor[0, 4, 4] == pytest.approx(m, rel=1e-6)
        assert abs(snap.tensor[1, 4, 4]) < 1e-9
        assert snap.label == 0

    def test_degenerate_alpha_zero(self):
        g = make_grid(8, TI)
        mp = MultipathParams(alpha=0.0, dtau_chips=0.4, df_hz=100.0, dtheta_rad=0.0)
        with_mp = render_snapshot(scenario(mp), g, rng=None)
        without = render_snapshot(scenario(), g, rng=None)
        np.testing.assert_array_equal(with_mp.tensor, without.tensor)
        assert with_mp.label == 1

    def test_two_triangle_superposition(self):
        # Brute-force per-cell recomputation of the noiseless I channel at
        # zero doppler error for dtau=0.5, alpha=0.8, df=0, dtheta=0.
        g = make_grid(9, TI)
        mp = MultipathParams(alpha=0.8, dtau_chips=0.5, df_hz=0.0, dtheta_rad=0.0)
        snap = render_snapshot(scenario(mp), g, rng=None)
        scale = (TI / 2) * math.sqrt(10 ** (CN0 / 10) / 2)
        for j, c in enumerate(g.code_axis):
            expected = scale * (
                max(0.0, 1 - abs(c)) + 0.8 * max(0.0, 1 - abs(c - 0.5))
            )
            assert snap.tensor[0, 4, j] == pytest.approx(expected, rel=1e-5)

    def test_exact_float32_superposition(self):
        # Rendered tensor decomposes exactly into main + scaled replica
        # fields in noiseless mode.
        g = make_grid(10, TI)
        mp = MultipathParams(alpha=0.7, dtau_chips=0.3, df_hz=250.0, dtheta_rad=1.0)
        combined = render_snapshot(scenario(mp), g, rng=None).tensor
        main = render_snapshot(scenario(), g, rng=None).tensor
        replica_scenario = ScenarioParams(
            epoch=EpochParams(ti=TI, cn0_dbhz=CN0), mp=mp
        )
        from mpcnn.datagen import _field_pair

        f_err, c_err = np.meshgrid(g.doppler_axis, g.code_axis, indexing="ij")
        _, replica = _field_pair(replica_scenario, f_err, c_err)
        np.testing.assert_array_equal(combined, main + replica)

    def test_noise_field_statistics(self):
        from mpcnn.correlator import noise_sigma

        g = make_grid(40, TI)
        rng = np.random.default_rng(3)
        clean = render_snapshot(scenario(), g, rng=None).tensor
        noisy = render_snapshot(scenario(), g, rng=rng).tensor
        resid = (noisy - clean).ravel()
        sigma = noise_sigma(EpochParams(ti=TI, cn0_dbhz=CN0))
        assert resid.std() == pytest.approx(sigma, rel=0.05)

    def test_ti_mismatch_rejected(self):
        g = make_grid(8, 20e-3)
        with pytest.raises(ValueError, match="ti"):
            render_snapshot(scenario(), g)


class TestSampleScenario:
    def test_label0_has_no_mp(self):
        sc = sample_scenario(space(), 0, np.random.default_rng(0))
        assert sc.mp is None and sc.label == 0

    def test_uniform_law_moments(self):
        rng = np.random.default_rng(1)
        alphas = np.array(
            [sample_scenario(space(), 1, rng).mp.alpha for _ in range(10_000)]
        )
        assert alphas.min() >= 0.5 and alphas.max() <= 0.9
        assert alphas.mean() == pytest.approx(0.7, abs=0.01)

    def test_dtau_within_bounds(self):
        rng = np.random.default_rng(2)
        dtaus = np.array(
            [sample_scenario(space(), 1, rng).mp.dtau_chips for _ in range(10_000)]
        )
        assert dtaus.min() >= 0.1 and dtaus.max() <= 0.8

    def test_dtheta_draw_rule(self):
        rng = np.random.default_rng(3)
        sp = space(dtheta_deg=(0.0, 45.0, 90.0, 180.0))
        seen = {
            round(math.degrees(sample_scenario(sp, 1, rng).mp.dtheta_rad))
            for _ in range(200)
        }
        assert seen == {0, 45, 90, 180}

    def test_invalid_ranges_rejected(self):
        with pytest.raises(ValueError):
            space(alpha_range=(0.9, 0.5))
        with pytest.raises(ValueError):
            space(alpha_range=(0.0, 0.5))
        with pytest.raises(ValueError):
            space(dtheta_deg=())


class TestBuildDataset:
    def test_balance(self):
        ds = build_dataset(space(n=6), 50, seed=11)
        assert len(ds) == 100
        assert int(ds.labels.sum()) == 50

    def test_same_seed_bit_identical(self):
        a = build_dataset(space(), 20, seed=5)
        b = build_dataset(space(), 20, seed=5)
        assert np.array_equal(a.tensors, b.tensors)
        assert np.array_equal(a.labels, b.labels)

    def test_different_seeds_differ(self):
        a = build_dataset(space(), 5, seed=5)
        b = build_dataset(space(), 5, seed=6)
        assert not np.array_equal(a.tensors, b.tensors)

    def test_noiseless_category_a_identical(self):
        ds = build_dataset(space(), 10, seed=0, noisy=False)
        a_tensors = ds.tensors[ds.labels == 0]
        assert np.array_equal(a_tensors[0], a_tensors[1])
        assert np.array_equal(a_tensors[0], a_tensors[-1])

    def test_all_finite(self):
        ds = build_dataset(space(cn0_dbhz=20.0), 10, seed=1)
        assert np.isfinite(ds.tensors).all()


class TestTapSeries:
    def test_noiseless_clean_peak(self):
        ts = render_tap_series(scenario(), 20, rng=None)
        assert ts.taps.shape == (20, 13)
        assert np.array_equal(ts.taps[0], ts.taps[-1])
        assert ts.taps[0].argmax() == 6
        assert (ts.taps >= 0).all()

    def test_two_peak_superposition_values(self):
        # Brute-force tap evaluation of the squared two-triangle profile.
        mp = MultipathParams(alpha=0.8, dtau_chips=0.5, df_hz=0.0, dtheta_rad=0.0)
        ts = render_tap_series(scenario(mp), 2, rng=None)
        scale = (TI / 2) * math.sqrt(10 ** (CN0 / 10) / 2)
        for k, c in enumerate(np.linspace(-1, 1, 13)):
            i_val = scale * (max(0.0, 1 - abs(c)) + 0.8 * max(0.0, 1 - abs(c - 0.5)))
            assert ts.taps[0, k] == pytest.approx(i_val**2, rel=1e-5, abs=1e-18)

    def test_rejects_short_series(self):
        with pytest.raises(ValueError):
            render_tap_series(scenario(), 1)

    def test_paired_generation_reuses_scenarios(self):
        sp = space()
        ds = build_dataset(sp, 5, seed=9)
        taps = build_tap_series_set(sp, 5, seed=9, scenarios=ds.scenarios)
        for snap_sc, ts in zip(ds.scenarios, taps):
            assert ts.scenario is snap_sc


class TestDatasetFile:
    def test_roundtrip_bit_exact(self, tmp_path):
        ds = build_dataset(space(n=8), 7, seed=2)
        p = tmp_path / "data.gmpd"
        write_dataset(ds, p)
        back = read_dataset(p)
        assert np.array_equal(back.tensors, ds.tensors)
        assert np.array_equal(back.labels, ds.labels)
        assert back.meta["seed"] == 2

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "data.gmpd"
        write_dataset(build_dataset(space(n=4), 2, seed=0), p)
        raw = bytearray(p.read_bytes())
        raw[:4] = b"NOPE"
        p.write_bytes(raw)
        with pytest.raises(BadMagicError):
            read_dataset(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "data.gmpd"
        write_dataset(build_dataset(space(n=4), 2, seed=0), p)
        raw = p.read_bytes()
        p.write_bytes(raw[: len(raw) - 10])
        with pytest.raises(TruncatedPayloadError):
            read_dataset(p)

    def test_shape_mismatch(self, tmp_path):
        import struct

        p = tmp_path / "data.gmpd"
        write_dataset(build_dataset(space(n=4), 2, seed=0), p)
        raw = bytearray(p.read_bytes())
        raw[16:20] = struct.pack("<I", 3)  # claim 3 channels
        p.write_bytes(raw)
        with pytest.raises(ShapeMismatchError):
            read_dataset(p)
