import csv
import io
import math

import numpy as np
import pytest

from emcris.sim import cli
from emcris.sim.config import (
    ScenarioConfig, db_amplitude, dbm_to_watt, dump_config, load_config, parse_config,
)
from emcris.sim.scenario import JAMMER, Scenario, jammer_strategy, place_nodes, stream
from emcris.sim.schemes import run_scheme
from emcris.sim.sweep import CSV_COLUMNS, apply_point, records_to_csv, run_records, run_sweep
from conftest import toy_config


# configuration

def test_unit_conversions():
    assert dbm_to_watt(30) == pytest.approx(1.0)
    assert dbm_to_watt(-105) == pytest.approx(10 ** -13.5)
    assert db_amplitude(30) == pytest.approx(np.sqrt(1000))


def test_defaults_round_trip():
    text = dump_config()
    assert parse_config(text) == ScenarioConfig()


def test_parse_overrides_and_comments():
    cfg = parse_config("# comment\nN = 2   # inline\nschemes = proposed, passive\nsweep_grid = 1, 2\n"
                       "ris_pos = 0, 30, 2\nadaptive_rho = false\n")
    assert cfg.N == 2
    assert cfg.schemes == ("proposed", "passive")
    assert cfg.sweep_grid == (1.0, 2.0)
    assert cfg.ris_pos == (0.0, 30.0, 2.0)
    assert cfg.adaptive_rho is False


@pytest.mark.parametrize("text", [
    "trials = 0", "sweep = nope", "schemes = proposed, other", "sweep_grid = 3, 1",
    "P_max_dbm = inf", "unknown_key = 1", "N", "jammer_policy = loud",
])
def test_invalid_configs_rejected(text):
    with pytest.raises(ValueError):
        parse_config(text)


def test_sweep_points_apply():
    cfg = ScenarioConfig(sweep="m")
    assert apply_point(cfg, 36.0).M == 36
    with pytest.raises(ValueError):
        apply_point(cfg, 20.0)
    assert apply_point(ScenarioConfig(sweep="ris-y"), 40.0).ris_pos[1] == 40.0
    assert apply_point(ScenarioConfig(sweep="pj"), 5.0).P_J_dbm == 5.0


# scenario

def test_zero_radius_puts_users_at_center():
    cfg = ScenarioConfig(ue_radius=0.0)
    nodes = place_nodes(cfg, stream(1, 0, 0))
    assert np.allclose(nodes.ue_pos, cfg.ue_center)


def test_placement_is_deterministic():
    cfg = ScenarioConfig()
    a, b = place_nodes(cfg, stream(3, 0, 2)), place_nodes(cfg, stream(3, 0, 2))
    assert np.array_equal(a.ue_pos, b.ue_pos) and np.array_equal(a.jam_pos, b.jam_pos)
    c = place_nodes(cfg, stream(3, 0, 3))
    assert not np.array_equal(a.jam_pos, c.jam_pos)


def test_jammer_placement_mean():
    cfg = ScenarioConfig(Q=10_000)
    jam = place_nodes(cfg, stream(0, 0, 0)).jam_pos
    assert jam[:, 0].mean() == pytest.approx(25.0, rel=0.01)
    assert jam[:, 1].mean() == pytest.approx(135.0, rel=0.01)
    assert np.all((jam >= cfg.jam_lo) & (jam <= cfg.jam_hi))


def test_mrt_jammer_power_split():
    cfg = ScenarioConfig()
    nodes = place_nodes(cfg, stream(1, 0, 0))
    jam = jammer_strategy(cfg, nodes)
    P = dbm_to_watt(cfg.P_J_dbm)
    assert np.allclose(np.sum(np.abs(jam.w_J) ** 2, -1), P / cfg.K)
    cfg1 = ScenarioConfig(K=1)
    jam1 = jammer_strategy(cfg1, place_nodes(cfg1, stream(1, 0, 0)))
    assert np.allclose(np.sum(np.abs(jam1.w_J) ** 2, -1), P)


def test_isotropic_jammer_power():
    cfg = ScenarioConfig(jammer_policy="isotropic-random", Q=1)
    nodes = place_nodes(cfg, stream(1, 0, 0))
    rng = stream(1, JAMMER, 0)
    p = np.array([np.sum(np.abs(jammer_strategy(cfg, nodes, rng).w_J) ** 2, -1) for _ in range(10_000)])
    assert p.mean() == pytest.approx(dbm_to_watt(cfg.P_J_dbm) / cfg.K, rel=0.02)


def test_jammer_from_file(tmp_path):
    cfg = ScenarioConfig(Q=1, K=2, N_J=2)
    nodes = place_nodes(cfg, stream(1, 0, 0))
    w = np.arange(4).reshape(1, 2, 2) * (1 + 1j)
    path = tmp_path / "w.npy"
    np.save(path, w)
    jam = jammer_strategy(cfg.replace(jammer_policy="file", jammer_file=str(path)), nodes)
    assert np.array_equal(jam.w_J, w)
    np.save(path, w[:, :1])
    with pytest.raises(ValueError):
        jammer_strategy(cfg.replace(jammer_policy="file", jammer_file=str(path)), nodes)


# schemes

@pytest.mark.parametrize("scheme", ["proposed", "ideal", "mc-unaware", "passive"])
def test_schemes_produce_feasible_records(scheme):
    rec = run_scheme(toy_config(M_h=4, M_v=4), scheme, trial=0, keep_trace=True)
    assert rec.ok, rec.message
    assert rec.monotone
    assert rec.pa_slack >= -1e-6 and rec.pmax_slack >= -1e-6
    assert rec.rate_mc_se > 0
    assert rec.wall_ms == 0


def test_proposed_at_least_mc_unaware_on_dense_array():
    cfg = toy_config(M_h=4, M_v=4, ds_frac=0.125)
    sc = Scenario(cfg, 0)
    p = run_scheme(cfg, "proposed", scenario=sc)
    u = run_scheme(cfg, "mc-unaware", scenario=sc)
    assert p.rate_surrogate_bits >= u.rate_surrogate_bits - 1e-9


def test_infeasible_scenario_gives_failed_row():
    cfg = toy_config(P_A_dbm=-200.0, sigma_R_dbm=0.0)
    rec = run_scheme(cfg, "proposed")
    assert not rec.ok
    assert math.isnan(rec.rate_mc_mean_bits)
    assert rec.message


def test_unknown_scheme():
    with pytest.raises(ValueError):
        run_scheme(toy_config(), "magic")


# sweeps and CSV

def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_empty_scheme_list_gives_header_only():
    text, recs, bad = run_sweep(toy_config(schemes=()))
    assert _rows(text) == [list(CSV_COLUMNS)]
    assert recs == [] and bad == []


def test_sweep_rows_and_summaries():
    cfg = toy_config(sweep="pmax", sweep_grid=(20.0, 30.0), schemes=("passive", "ideal"), trials=2)
    text, recs, bad = run_sweep(cfg)
    rows = _rows(text)
    assert rows[0] == list(CSV_COLUMNS)
    body = [r for r in rows[1:] if r[3] != "summary"]
    summ = [r for r in rows[1:] if r[3] == "summary"]
    assert len(body) == 2 * 2 * 2 and len(summ) == 2 * 2
    assert [r[0] for r in body[:4]] == ["passive"] * 4
    assert [(r[2], r[3]) for r in body[:4]] == [("20", "0"), ("20", "1"), ("30", "0"), ("30", "1")]
    assert not bad


def test_iteration_sweep_rows():
    cfg = toy_config(sweep="iters", schemes=("proposed",), trials=2)
    rows = _rows(run_sweep(cfg)[0])
    per_trial = [r for r in rows[1:] if r[3] == "0"]
    vals = [float(r[5]) for r in per_trial]
    assert vals == sorted(vals)
    assert [int(float(r[2])) for r in per_trial] == list(range(len(per_trial)))


def test_parallel_matches_serial():
    cfg = toy_config(sweep="pj", sweep_grid=(0.0, 10.0), schemes=("proposed", "passive"), trials=2)
    a = records_to_csv(cfg, run_records(cfg, jobs=1))
    b = records_to_csv(cfg, run_records(cfg, jobs=2))
    assert a == b


# command line

def _write_cfg(tmp_path, **kw):
    cfg = toy_config(**kw)
    path = tmp_path / "scenario.cfg"
    path.write_text(dump_config(cfg), encoding="utf-8")
    return path


def test_cli_dump_defaults(capsys):
    assert cli.main(["--dump-defaults"]) == 0
    assert parse_config(capsys.readouterr().out) == ScenarioConfig()


def test_cli_run_writes_csv(tmp_path):
    path = _write_cfg(tmp_path)
    out = tmp_path / "out.csv"
    code = cli.main(["run", "--config", str(path), "--schemes", "passive", "--trials", "1", "--out", str(out)])
    assert code == 0
    rows = _rows(out.read_text())
    assert rows[0] == list(CSV_COLUMNS) and len(rows) == 3


def test_cli_rejects_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("trials = 0\n")
    assert cli.main(["run", "--config", str(path)]) == 2
    assert "trials" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_cli_validate(tmp_path, capsys):
    path = _write_cfg(tmp_path)
    assert cli.main(["validate", "--config", str(path), "--draws", "100000"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5


def test_load_config_file(tmp_path):
    path = _write_cfg(tmp_path, N=3)
    assert load_config(path).N == 3
