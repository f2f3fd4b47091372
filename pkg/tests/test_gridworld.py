import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcmdp import gridworld as gw
from lcmdp import model as mdl
from lcmdp.automata import compile_spec
from lcmdp.gridworld import DOWN, ElevationMap, GridConfig, MapError
from lcmdp.product import build_product
from lcmdp.sim import sample
from lcmdp.synth import SynthesisProblem, synthesize


def flat_config(size, **kw):
    mask = np.zeros((size, size), dtype=int)
    return GridConfig(start=(0, size - 1), goal=[(size - 1, 0)], mask=mask, **kw)


def black_cells(img):
    return {tuple(rc) for rc in np.argwhere(np.all(img == 0, axis=2)).tolist()}


def test_csv_2x2(tmp_path):
    (tmp_path / "e.csv").write_text("0,1\n2,3\n")
    np.testing.assert_array_equal(gw.load_elevation(tmp_path / "e.csv").heights, [[0, 1], [2, 3]])


def test_pgm_p2_constant(tmp_path):
    (tmp_path / "e.pgm").write_text("P2\n# comment\n3 3\n15\n" + "7 7 7\n" * 3)
    np.testing.assert_array_equal(gw.load_elevation(tmp_path / "e.pgm").heights, np.full((3, 3), 7.0))


def test_pgm_p5_sixteen_bit(tmp_path):
    vals = np.array([[0, 300], [65535, 2]], dtype=">u2")
    (tmp_path / "e.pgm").write_bytes(b"P5\n2 2\n65535\n" + vals.tobytes())
    np.testing.assert_array_equal(gw.load_elevation(tmp_path / "e.pgm").heights, vals.astype(float))


def test_pgm_writer_round_trip(tmp_path):
    g = np.arange(12).reshape(3, 4)
    gw.write_pgm(g, tmp_path / "g.pgm")
    np.testing.assert_array_equal(gw.read_grid(tmp_path / "g.pgm"), g)


@pytest.mark.parametrize("text,msg", [
    ("0,1\n2\n", "row has 1 values, expected 2"),
    ("0,x\n", "non-numeric"),
    ("", "empty"),
    ("P2\n2 2\n255\n1 2 3\n", "expected 4 samples"),
])
def test_malformed_files(tmp_path, text, msg):
    (tmp_path / "bad").write_text(text)
    with pytest.raises(MapError, match=msg):
        gw.load_elevation(tmp_path / "bad")


def test_too_small_map():
    with pytest.raises(MapError):
        ElevationMap(np.zeros((1, 5)))


def test_ramp_gradient_peaks_at_steepest_pair():
    c = np.arange(10, dtype=float)
    h = np.tile(c ** 2, (10, 1))
    g = gw.max_gradient(h)
    # the steepest step is between columns 8 and 9: 81 -> 64 differs by 17
    assert g.max() == 17.0
    assert set(np.flatnonzero(g[0] == 17.0).tolist()) == {8, 9}


def test_risk_examples():
    assert not gw.derive_risk(ElevationMap(np.full((4, 4), 3.0))).any()

    cliff = np.zeros((10, 10))
    cliff[:, 5:] = 50.0
    r = gw.derive_risk(ElevationMap(cliff))
    np.testing.assert_array_equal(r[:, 4:6], 1.0)
    assert r.max() == 1.0

    ramp = np.tile(np.arange(10, dtype=float), (10, 1))
    r = gw.derive_risk(ElevationMap(ramp))
    np.testing.assert_array_equal(r[1:-1, 1:-1], 1.0)


def test_flat_map_is_deterministic():
    m = gw.build_grid_lcmdp(ElevationMap(np.zeros((5, 5))), None, flat_config(5))
    assert np.all(m.costs[0] == 0.0)
    assert np.all(m.trans.data == 1.0)
    assert mdl.validate(m) == []


def test_three_neighbor_failure_split():
    h = np.zeros((3, 3))
    h[1, 1], h[2, 2] = 0.3, 1.0
    cfg = GridConfig(start=(0, 1), goal=[(2, 0)], mask=np.zeros((3, 3), dtype=int), slope=1.0, p_min=0.1)
    m = gw.build_grid_lcmdp(ElevationMap(h), None, cfg)
    s = 1
    k = m.choices(s)[m.actions(s).index(DOWN)]
    row = dict(m.successors(k))
    assert row[4] == pytest.approx(0.7 + 0.1)
    assert row[0] == pytest.approx(0.1) and row[2] == pytest.approx(0.1)
    assert m.costs[0, k] == pytest.approx(cfg.risk_scale * 0.3)
    assert m.costs[1, k] == 1.0
    # off-grid moves are disabled
    assert sorted(m.actions(s)) == [1, 2, 3]


def test_p_min_clamp():
    h = np.zeros((2, 2))
    h[0, 1] = 100.0
    elev = ElevationMap(h)
    assert gw.success_probability(elev, (0, 0), (0, 1), 2.0, 0.55) == 0.55
    assert gw.success_probability(elev, (0, 0), (1, 0), 2.0, 0.55) == 1.0


@pytest.mark.parametrize("kw,msg", [
    ({"start": (5, 5)}, "outside"),
    ({"start": (2, 0)}, "inside the goal"),
    ({"goal": []}, "empty"),
])
def test_config_errors(kw, msg):
    cfg = dataclasses.replace(flat_config(3), **kw)
    with pytest.raises(MapError, match=msg):
        gw.build_grid_lcmdp(ElevationMap(np.zeros((3, 3))), None, cfg)


def test_mask_errors():
    cfg = flat_config(3)
    cfg.mask = np.full((3, 3), 7)
    with pytest.raises(MapError, match="region"):
        gw.build_grid_lcmdp(ElevationMap(np.zeros((3, 3))), None, cfg)
    cfg.mask = None
    with pytest.raises(MapError, match="mask"):
        gw.build_grid_lcmdp(ElevationMap(np.zeros((3, 3))), None, cfg)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9))
def test_random_terrain_models_valid(seed, size):
    rng = np.random.default_rng(seed)
    h = rng.uniform(0, 100, (size, size))
    cfg = GridConfig(start=(0, 0), goal=[(size - 1, size - 1)],
                     mask=rng.integers(0, 4, (size, size)), slope=float(rng.uniform(0, 5)))
    m = gw.build_grid_lcmdp(ElevationMap(h), gw.derive_risk(ElevationMap(h)), cfg)
    assert mdl.validate(m) == []
    np.testing.assert_allclose(np.asarray(m.trans.sum(axis=1)).ravel(), 1.0, atol=1e-12)
    assert np.all(m.costs[0] >= 0) and np.all(m.costs[0] <= cfg.risk_scale * (1 - cfg.p_min) + 1e-12)


def test_flat_shortest_path_is_manhattan():
    size = 6
    cfg = flat_config(size)
    m = gw.build_grid_lcmdp(ElevationMap(np.zeros((size, size))), None, cfg)
    m.costs = m.costs[::-1].copy()  # minimize length, bound risk
    prod = build_product(m, compile_spec("(A+B+C+D)*", m.ap))
    res = synthesize(SynthesisProblem(prod, 0.0, [np.inf]))
    assert res.solution.objective == pytest.approx(gw.manhattan_to_goal(cfg), abs=1e-9)


def test_synthetic_instance_shape():
    elev, risk, cfg = gw.synthetic_instance(20)
    assert elev.heights.shape == (20, 20) and risk.shape == (20, 20)
    assert 0 <= risk.min() and risk.max() <= 1
    assert set(np.unique(cfg.mask)) == {0, 1, 2, 3}
    assert gw.manhattan_to_goal(cfg) > 0
    assert all(cfg.mask[g] == gw.REGIONS.index("D") for g in cfg.goal)


def test_config_round_trip(tmp_path):
    _, _, cfg = gw.synthetic_instance(8)
    gw.save_config(cfg, tmp_path / "c.json")
    back = gw.load_config(tmp_path / "c.json", cfg.mask)
    assert back.to_dict() == cfg.to_dict()


def test_render_counts(tmp_path):
    risk = np.linspace(0, 1, 36).reshape(6, 6)
    mask = np.zeros((6, 6), dtype=int)
    img = gw.render(tmp_path / "a.ppm", risk, mask, cells=[])
    assert black_cells(img) == set()
    img = gw.render(tmp_path / "b.ppm", risk, mask, cells=[(0, 0), (0, 1)])
    assert black_cells(img) == {(0, 0), (0, 1)}
    np.testing.assert_array_equal(gw.read_ppm(tmp_path / "b.ppm"), img)
    big = gw.render(tmp_path / "c.ppm", risk, mask, cells=[(0, 0)], scale=4)
    assert big.shape == (24, 24, 3) and len(black_cells(big)) == 16


def test_render_sampled_path(tmp_path):
    elev, risk, cfg = gw.synthetic_instance(10)
    m = gw.build_grid_lcmdp(elev, risk, cfg)
    prod = build_product(m, compile_spec("(A+B+C+D)*", m.ap))
    res = synthesize(SynthesisProblem(prod, 0.0, [np.inf]))
    stats = sample(res.policy, seed=0, n=40, keep_trajectories=True)
    traj = max(stats.trajectories, key=lambda t: t.length)
    cells = [gw.cell_of(prod.mdp_state[x], 10) for x in traj.states]
    img = gw.render(tmp_path / "t.ppm", risk, cfg.mask, cells=cells)
    assert black_cells(img) == set(cells)
