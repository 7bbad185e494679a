import numpy as np
import pytest

from optomem import table1_params
from optomem.maps import (
    GridSpec,
    average_stripe_width,
    classify_regions,
    region_width_sweep,
    scan_plane,
    write_map,
)
from optomem.gridio import read_table


@pytest.fixture(scope="module")
def params():
    return table1_params()


@pytest.fixture(scope="module")
def cmap64(params):
    return scan_plane(params, GridSpec(resolution=64))


def test_scan_plane_deterministic(params, cmap64):
    again = scan_plane(params, GridSpec(resolution=64))
    assert np.array_equal(again.g1, cmap64.g1)
    assert np.array_equal(again.gt, cmap64.gt)
    assert again.params_hash == cmap64.params_hash


def test_scan_window_periodicity(params, cmap64):
    shifted = scan_plane(params, GridSpec(q1_range=(0.75, 1.25),
                                          q2_range=(0.75, 1.25),
                                          resolution=64))
    assert np.allclose(shifted.g1, cmap64.g1, rtol=1e-9, atol=1e-12)
    assert np.allclose(shifted.g12, cmap64.g12, rtol=1e-6, atol=1e-18)


def test_zero_reflectivity_gives_zero_maps():
    p0 = table1_params(reflectivity_override=(0.0, 0.0))
    cmap = scan_plane(p0, GridSpec(resolution=16))
    assert np.all(cmap.g1 == 0.0) and np.all(cmap.gt == 0.0)
    regions = classify_regions(cmap)
    assert regions.union_fraction == 0.0
    assert region_width_sweep(p0, [104e-9], GridSpec(resolution=16))[0]["width"] == 0.0


def test_min_resolution_enforced():
    with pytest.raises(ValueError):
        GridSpec(resolution=8)


def test_fraction_monotone_in_threshold(cmap64):
    # larger assumed amplitude -> lower ratio threshold -> larger region
    fractions = [classify_regions(cmap64, amplitude_scale=s).union_fraction
                 for s in (10.0**7.0, 10.0**6.5, 10.0**6.0)]
    assert fractions[0] >= fractions[1] >= fractions[2]


def test_union_bounds_components(cmap64):
    regions = classify_regions(cmap64)
    for frac in regions.fractions.values():
        assert regions.union_fraction >= frac
    assert 0.0 <= regions.union_fraction <= 1.0


def test_tiny_amplitude_empty_mask(cmap64):
    regions = classify_regions(cmap64, amplitude_scale=1e-9)
    assert regions.union_fraction == 0.0


def test_classify_rejects_bad_arguments(cmap64):
    with pytest.raises(ValueError):
        classify_regions(cmap64, amplitude_scale=-1.0)
    with pytest.raises(ValueError):
        classify_regions(cmap64, fraction=1.5)


def test_stripe_width_exact_for_synthetic_stripe():
    mask = np.zeros((64, 64), dtype=bool)
    mask[10:14, :] = True            # horizontal stripe, width 4 cells
    cell = 0.5 / 64
    assert average_stripe_width(mask, cell) == pytest.approx(4 * cell)
    # two stripes of different widths: length-weighted mean
    mask[30:36, :] = True
    assert average_stripe_width(mask, cell) == pytest.approx(5 * cell)


def test_width_sweep_monotone_small_grid(params):
    res = region_width_sweep(params, [20e-9, 50e-9, 104e-9],
                             GridSpec(resolution=64))
    widths = [r["width"] for r in res]
    assert widths[0] > widths[1] > widths[2] > 0.0


def test_high_reflectivity_override_contours(params):
    # patterned-membrane regime: R set directly, phi = 0, Lz unchanged
    fractions = []
    for R in (0.7, 0.8, 0.9):
        p = params.with_(reflectivity_override=(R, 0.0))
        cmap = scan_plane(p, GridSpec(resolution=48))
        regions = classify_regions(cmap)
        quad = regions.masks["g12/g1"]
        fractions.append(quad.mean())
    assert all(f > 0 for f in fractions)
    assert len(set(fractions)) == 3          # contour families differ


def test_map_file_roundtrip(tmp_path, params):
    cmap = scan_plane(params, GridSpec(resolution=16))
    regions = classify_regions(cmap)
    path = tmp_path / "map.csv"
    write_map(path, cmap, regions)
    header, columns, data = read_table(path)
    assert header["params_hash"] == cmap.params_hash
    assert "mask_union" in columns
    assert data.shape == (16 * 16, len(columns))
    g1 = data[:, columns.index("g1")].reshape(16, 16)
    assert np.allclose(g1, cmap.g1)
