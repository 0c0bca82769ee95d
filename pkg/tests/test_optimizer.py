import numpy as np
import pytest

from mairs.channel import ScenarioChannels
from mairs.optimizer import (
    OptimizerConfig,
    area_snr,
    fpa_layout,
    grid_layout,
    initialize,
    layout_feasible,
    optimize,
    optimize_fpa_baselines,
    optimize_p1,
    optimize_p2,
    optimize_p3,
    reflections_feasible,
)
from mairs.scenario import Scheme, TargetArea, desk_scenario
from mairs.snr import expected_snr

TOL = OptimizerConfig().tol_obj


def _recomputed_worst(spec, sol):
    ch = ScenarioChannels(spec)
    return min(area_snr(ch, sol.layouts[j], sol.reflections[j], j).min()
               for j in range(len(spec.areas)))


def test_grid_layout_four_antennas():
    lam = 0.1
    lay = grid_layout(4, 8 * lam, lam / 2)
    assert lay.shape == (4, 2)
    assert len({tuple(p) for p in np.round(lay, 12)}) == 4
    d = np.linalg.norm(lay[:, None] - lay[None], axis=-1)
    assert d[np.triu_indices(4, 1)].min() >= lam / 2
    np.testing.assert_allclose(lay.mean(axis=0), 0.0, atol=1e-15)


def test_grid_layout_single_antenna():
    np.testing.assert_array_equal(grid_layout(1, 0.5, 0.05), [[0.0, 0.0]])


def test_grid_layout_tight_region():
    lay = grid_layout(9, 0.1, 0.05)
    spec = desk_scenario(m_antennas=9, region_over_lambda=1.0)
    assert layout_feasible(lay, spec)


def test_fpa_layout_positions():
    np.testing.assert_allclose(fpa_layout(4, 0.1), [[-0.075, 0], [-0.025, 0], [0.025, 0], [0.075, 0]])


def test_initialization_beats_random_phases(desk):
    ch = ScenarioChannels(desk)
    layouts, refl = initialize(desk, channels=ch)
    init_obj = min(area_snr(ch, layouts[j], refl[j], j).min() for j in range(len(desk.areas)))
    rand = []
    for seed in range(10):
        r = np.random.default_rng(seed)
        v = np.exp(1j * r.uniform(0, 2 * np.pi, desk.n_elements))
        rand.append(min(area_snr(ch, layouts[j], v, j).min() for j in range(len(desk.areas))))
    assert init_obj >= np.median(rand)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_scheme_contracts(desk, scheme):
    spec = desk.with_(scheme=scheme)
    sol = optimize(spec)
    assert sol.scheme is scheme
    for tr in sol.traces:
        assert tr.is_monotone()
    assert sol.trace.is_monotone()
    assert all(layout_feasible(l, spec) for l in sol.layouts)
    assert reflections_feasible(sol.reflections)
    assert sol.worst_case_snr == pytest.approx(_recomputed_worst(spec, sol), rel=1e-9)
    assert sol.worst_case_snr_db == pytest.approx(10 * np.log10(sol.worst_case_snr))
    if not scheme.adaptive_irs:
        np.testing.assert_array_equal(sol.reflections[0], sol.reflections[-1])
    if scheme in (Scheme.SHARED_MA_STA_IRS,) or not scheme.movable:
        np.testing.assert_array_equal(sol.layouts[0], sol.layouts[-1])
    if not scheme.movable:
        np.testing.assert_allclose(sol.layouts[0], fpa_layout(spec.m_antennas, spec.rf.wavelength))


def test_worst_point_is_argmin(desk):
    sol = optimize_p3(desk)
    ch = ScenarioChannels(desk)
    ids = [a.id for a in desk.areas]
    j = ids.index(sol.worst_point[0])
    vals = area_snr(ch, sol.layouts[j], sol.reflections[j], j)
    assert vals[sol.worst_point[1]] == pytest.approx(sol.worst_case_snr, rel=1e-12)


def test_single_area_schemes_coincide():
    spec = desk_scenario(n_areas=1)
    a, b, c = optimize_p1(spec), optimize_p2(spec), optimize_p3(spec)
    assert abs(a.worst_case_snr - b.worst_case_snr) <= TOL
    assert abs(a.worst_case_snr - c.worst_case_snr) <= TOL
    f1 = optimize_fpa_baselines(spec, scheme=Scheme.FPA_ADAPTIVE_IRS)
    f2 = optimize_fpa_baselines(spec, scheme=Scheme.FPA_STA_IRS)
    assert abs(f1.worst_case_snr - f2.worst_case_snr) <= TOL


def test_warm_start_dominance_chain(desk):
    p3 = optimize_p3(desk)
    p2 = optimize_p2(desk, init=p3)
    p1 = optimize_p1(desk, init=p2)
    assert p2.worst_case_snr >= p3.worst_case_snr - TOL
    assert p1.worst_case_snr >= p2.worst_case_snr - TOL


def test_fpa_nesting(desk):
    sta = optimize_fpa_baselines(desk, scheme=Scheme.FPA_STA_IRS)
    ada = optimize_fpa_baselines(desk, scheme=Scheme.FPA_ADAPTIVE_IRS, init=sta)
    assert ada.worst_case_snr >= sta.worst_case_snr - TOL


def test_fpa_rejects_movable(desk):
    with pytest.raises(ValueError):
        optimize_fpa_baselines(desk, scheme=Scheme.ADAPTIVE_MA_IRS)


def test_single_panel_ma_equals_fpa():
    spec = desk_scenario(n_irs=1)
    p3 = optimize_p3(spec)
    fpa = optimize_fpa_baselines(spec, scheme=Scheme.FPA_STA_IRS)
    assert abs(p3.worst_case_snr - fpa.worst_case_snr) <= TOL


def test_single_antenna_single_panel():
    spec = desk_scenario(n_irs=1, m_antennas=1)
    ma = optimize_p1(spec)
    fpa = optimize_fpa_baselines(spec, scheme=Scheme.FPA_ADAPTIVE_IRS)
    assert abs(ma.worst_case_snr - fpa.worst_case_snr) <= TOL


def test_single_point_alignment_oracle():
    spec = desk_scenario(n_irs=1, n_areas=1)
    area = TargetArea(0, (56.0, -9.0, 0.0), 0.0, 1.0)
    spec = spec.with_(areas=(area,), scheme=Scheme.FPA_ADAPTIVE_IRS)
    ch = ScenarioChannels(spec)
    rng = np.random.default_rng(0)
    start = 0.5 * np.exp(1j * rng.uniform(0, 2 * np.pi, spec.n_elements))
    layout = fpa_layout(spec.m_antennas, spec.rf.wavelength)
    sol = optimize(spec, init=(layout, start))
    pc = ch.areas[0]
    amp = np.abs(pc.h_hat[0] * ch.e_hat)
    want = spec.rf.p_bar * spec.m_antennas * amp.sum() ** 2
    got = expected_snr(ch, sol.layouts[0], sol.reflections[0], pc).coherent[0]
    assert got == pytest.approx(want, rel=1e-5)
    np.testing.assert_allclose(np.abs(sol.reflections[0]), 1.0, atol=1e-5)


def test_parallel_areas_match_serial(desk):
    a = optimize_p1(desk)
    b = optimize_p1(desk, OptimizerConfig(workers=2))
    np.testing.assert_array_equal(a.layouts, b.layouts)
    assert a.worst_case_snr == b.worst_case_snr


def test_position_first_order_also_monotone(desk):
    cfg = OptimizerConfig(block_order=("position", "reflection"))
    sol = optimize_p2(desk, cfg)
    assert sol.trace.is_monotone()


def test_deterministic(desk):
    assert optimize_p2(desk).worst_case_snr == optimize_p2(desk).worst_case_snr


def test_ao_improves_on_initialization(desk):
    ch = ScenarioChannels(desk)
    layouts, refl = initialize(desk, channels=ch, scheme=Scheme.ADAPTIVE_MA_IRS)
    start = min(area_snr(ch, layouts[j], refl[j], j).min() for j in range(len(desk.areas)))
    assert optimize_p1(desk).worst_case_snr > start
