import csv

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specprune import dse
from oracles import reported_utilization_table

# sum over VGG16 conv layers of tiles * c_in * c_out at n=8, h_krn=3 (m=6), counted by hand:
# 1444*4288 + 361*24576 + 100*163840 + 25*655360 + 9*786432
VGG16_TILE_PAIRS = 54_909_696
VGG16_SPATIAL_MACS = 15_346_630_656  # 224x224 'same' convs, standard published count


def test_platform_units():
    v7 = dse.VIRTEX7_690T
    assert v7.s_bw == pytest.approx(21e9 / (4 * 200e6))
    with pytest.raises(ValueError):
        dse.PlatformSpec(0, 1, 1, 1)


def test_vgg16_descriptor():
    wl = dse.vgg16_workload(8, 4.0)
    assert len(wl.layers) == 13 and wl.k == 16
    assert wl.macs_per_image() == VGG16_TILE_PAIRS * 16
    assert wl.spatial_macs_per_image() == VGG16_SPATIAL_MACS


def test_dense_spectral_reduction_between_3_and_5():
    wl = dse.vgg16_workload(8, 1.0)
    ratio = wl.spatial_macs_per_image() / wl.macs_per_image()
    assert ratio == pytest.approx(VGG16_SPATIAL_MACS / (VGG16_TILE_PAIRS * 64))
    assert 3.0 <= ratio <= 5.0


def test_design_point_resources():
    dp = dse.DesignPoint(R=16, P_b=10, P_o=64, lam=1 / 0.99).check(dse.VIRTEX7_690T)
    assert dp.dsp_used == 640 and dp.bram_used == 10 * 80 + 96
    assert dp.feasible
    big = dse.DesignPoint(R=1, P_b=10, P_o=128, lam=1.0).check(dse.VIRTEX7_690T)
    assert big.bram_used == 1472 + 10 and not big.bram_ok


def test_fps_frozen_value():
    wl = dse.vgg16_workload(8, 4.0)
    dp = dse.DesignPoint(R=16, P_b=10, P_o=64, lam=1 / 0.99)
    expected = 0.99 * 64 * 10 * 200e6 / (VGG16_TILE_PAIRS * 16)
    assert dse.fps(dp, dse.VIRTEX7_690T, wl) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(144.24, abs=0.01)


def test_fps_scales_with_alpha():
    plat = dse.VIRTEX7_690T
    f = {}
    for alpha, util in [(2, 1.0), (4, 0.99), (8, 0.96)]:
        f[alpha] = dse.fps(dse.DesignPoint(16, 10, 64, 1 / util), plat, dse.vgg16_workload(8, alpha))
    assert f[2] / f[4] == pytest.approx(0.5 / 0.99, rel=1e-9)
    assert f[8] / f[4] == pytest.approx(2 * 0.96 / 0.99, rel=1e-9)


def test_bandwidth_formula():
    # 2 * P_b * n^2 / (P_o * lam * k)
    assert dse.required_bandwidth(10, 64, 1.0, 8, 16) == pytest.approx(2 * 10 * 64 / (64 * 16))
    plat = dse.PlatformSpec(100, 100, 1.0, 1e8)
    assert dse.bandwidth_factor(plat, 0.25) == 1.0
    assert dse.bandwidth_factor(plat, 2.0) == 0.25


def test_bandwidth_limits_throughput():
    slow = dse.PlatformSpec(3600, 1470, 0.5, 200e6)
    dp = dse.DesignPoint(16, 10, 64, 1.0)
    fast_t = dse.t_sys(dse.DesignPoint(16, 10, 64, 1.0), dse.VIRTEX7_690T)
    slow_t = dse.t_sys(dp, slow)
    assert slow_t == pytest.approx(fast_t * 0.5 * 0.5 / dp.bw_req)


def test_t_sys_rejects_lambda_below_one():
    with pytest.raises(ValueError):
        dse.t_sys(dse.DesignPoint(1, 1, 1, 0.5), dse.VIRTEX7_690T)


def test_explore_finds_reference_optimum():
    best, frontier = dse.explore(dse.VIRTEX7_690T, dse.vgg16_workload(8, 4.0), reported_utilization_table(), p_b=10)
    assert (best.P_b, best.P_o, best.R) == (10, 64, 16)
    assert best.dsp_ok and best.bram_ok
    assert any(not d.feasible for d in frontier)


def test_explore_tie_break_prefers_fewer_brams():
    t = dse.UtilizationTable({(8, 2, 4.0): 1.0, (8, 4, 4.0): 1.0})
    best, _ = dse.explore(dse.VIRTEX7_690T, dse.lenet_toy_workload(), t, [8], p_b=1)
    assert best.R == 2


def test_explore_infeasible():
    tiny = dse.PlatformSpec(4, 2, 10.0, 1e8)
    with pytest.raises(dse.InfeasibleError):
        dse.explore(tiny, dse.lenet_toy_workload(), reported_utilization_table(), [64], p_b=10)


def test_explore_searches_p_b_when_free():
    t = dse.UtilizationTable({(64, 16, 4.0): 0.99})
    best, frontier = dse.explore(dse.VIRTEX7_690T, dse.vgg16_workload(), t, [64])
    assert len(frontier) == 3600 // 64
    # BRAM caps P_b: P_b * 80 + 96 <= 1470
    assert best.P_b == (1470 - 96) // 80


@settings(max_examples=15, deadline=None)
@given(st.integers(100, 4000), st.integers(200, 3000), st.floats(0.2, 50))
def test_t_sys_monotone_in_resources(dsp, bram, bw):
    wl = dse.vgg16_workload()
    table = reported_utilization_table()
    base = dse.PlatformSpec(dsp, bram, bw, 2e8)
    try:
        b0, _ = dse.explore(base, wl, table, [16, 32, 64, 128])
    except dse.InfeasibleError:
        return
    for bigger in (dse.PlatformSpec(dsp * 2, bram, bw, 2e8), dse.PlatformSpec(dsp, bram * 2, bw, 2e8),
                   dse.PlatformSpec(dsp, bram, bw * 2, 2e8)):
        b1, _ = dse.explore(bigger, wl, table, [16, 32, 64, 128])
        assert b1.t_sys >= b0.t_sys * (1 - 1e-12)


def test_utilization_table_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["P_o", "R", "alpha", "utilization", "cycles"])
        w.writerow([16, 2, 4.0, 0.5, 100])
        w.writerow([16, 4, 4.0, 0.8, 60])
    t = dse.UtilizationTable.from_csv(path)
    assert t(16, 2, 4) == 2.0 and t(16, 8, 4) is None
    assert t.r_values(16, 4.0) == [2, 4]
    with pytest.raises(ValueError):
        t.add(1, 1, 4, 1.5)


def test_frontier_csv(tmp_path):
    _, frontier = dse.explore(dse.VIRTEX7_690T, dse.vgg16_workload(), reported_utilization_table(), [32, 64], p_b=10)
    path = tmp_path / "f.csv"
    dse.write_frontier_csv(path, frontier)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == dse.FRONTIER_COLUMNS
    assert len(rows) == len(frontier)


def test_optimum_bandwidth_well_below_peak():
    wl = dse.vgg16_workload(8, 4.0)
    dp = dse.DesignPoint(16, 10, 64, 1 / 0.99)
    bw = dse.required_bandwidth_bytes(dp, dse.VIRTEX7_690T, wl)
    assert bw < 21e9


@pytest.mark.xfail(strict=True, reason="stall-inclusive bandwidth model gives about 1 GB/s, not the reported 9 GB/s")
def test_optimum_bandwidth_matches_reported_figure():
    wl = dse.vgg16_workload(8, 4.0)
    dp = dse.DesignPoint(16, 10, 64, 1 / 0.99)
    assert dse.required_bandwidth_bytes(dp, dse.VIRTEX7_690T, wl) == pytest.approx(9e9, rel=0.2)
