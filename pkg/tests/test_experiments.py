import numpy as np
import pytest

from greedy_idp.errors import ConfigurationError
from greedy_idp.experiments import (
    ExperimentConfig,
    default_config,
    dump_config,
    load_config,
    measure_front_speed,
    run_experiment,
    run_single,
)
from greedy_idp.reference import psystem_two_shock, pwlinear_exact


def test_default_config_validates():
    cfg = default_config("psystem", dofs=[21], seeds=[3, 4])
    assert cfg.mode == "greedy" and cfg.t_final == 0.7
    assert cfg.seeds == [3, 4]
    bad = [
        dict(cfl=1.5), dict(mode="fast"), dict(dofs=[2]), dict(t0=2.0),
        dict(epsilon=0.0), dict(seeds=[1, 1]), dict(entropy="fixed:2"),
    ]
    for kw in bad:
        with pytest.raises(ConfigurationError):
            default_config("psystem", **kw)
    with pytest.raises(ConfigurationError):
        default_config("sonic1d", mode="gms")
    with pytest.raises(ConfigurationError):
        default_config("psystem", mode="roe-only")
    with pytest.raises(ConfigurationError):
        default_config("burgers")


def test_config_file_round_trip(tmp_path):
    cfg = default_config("sonic1d", dofs=[51, 101], seeds=[1, 2], entropy="fixed:0.25", t0=1e-8)
    path = tmp_path / "run.cfg"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    # comments, the singular seed key and overrides
    path.write_text("experiment = pwlinear  # flux\nseed = 7\ndofs = 11, 21\n")
    got = load_config(path, cfl=0.25)
    assert got.seeds == [7] and got.dofs == [11, 21] and got.cfl == 0.25
    path.write_text("experiment = pwlinear\ncolour = red\n")
    with pytest.raises(ConfigurationError):
        load_config(path)
    path.write_text("dofs = 11\n")
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_front_speed_of_exact_solutions():
    x = np.linspace(-2, 2, 4001)
    times = np.linspace(0.1, 0.5, 9)
    fields = [pwlinear_exact(x, t) for t in times]
    assert measure_front_speed(times, x, fields, 1.5) == pytest.approx(-1.0, abs=1e-3)
    ex = psystem_two_shock()
    x = np.linspace(0, 1, 4001)
    times = np.linspace(0.2, 0.7, 11)
    u = [ex(x, t)[:, 1] for t in times]
    assert measure_front_speed(times, x, u, 0.5 * (ex.uL + ex.um)) == pytest.approx(-0.68493, abs=1e-3)
    with pytest.raises(ValueError):
        measure_front_speed(times, x, [np.ones_like(x)] * len(times), 0.5)


def test_run_single_small_problems():
    for name, kw in (("pwlinear", {}), ("sonic1d", {}), ("psystem", {}),
                     ("sonic1d", dict(entropy="square", t0=1e-8))):
        cfg = default_config(name, dofs=[41], t_final=0.1, **kw)
        single = run_single(cfg, 41, seed=0)
        assert single.result.t == pytest.approx(0.1)
        assert set(single.errors) == {"L1", "L2"}
        assert all(r.max_principle_violation == 0.0 for r in single.result.reports)


def test_kpp_problem_is_periodic_and_conservative():
    cfg = default_config("kpp2d", dofs=[400], t_final=0.05)
    single = run_single(cfg, 400, seed=1)
    assert single.errors is None
    m = single.mesh.lumped_mass
    mass0 = m @ single.result.snapshots[0][1]
    assert m @ single.result.U == pytest.approx(mass0, rel=1e-12)


def test_run_experiment_artifacts_are_reproducible(tmp_path):
    cfg = default_config("psystem", dofs=[21, 41], t_final=0.1, seeds=[0, 1], snapshots=3)
    a = run_experiment(cfg, out=tmp_path / "a")
    run_experiment(cfg, out=tmp_path / "b")
    names = sorted(p.relative_to(tmp_path / "a").as_posix() for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert names == ["manifest.txt", "seed_0/field_21.csv", "seed_0/field_41.csv",
                     "seed_0/steps_21.csv", "seed_0/steps_41.csv", "seed_1/field_21.csv",
                     "seed_1/field_41.csv", "seed_1/steps_21.csv", "seed_1/steps_41.csv", "table.csv"]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    rows = a["rows"]
    assert len(rows) == 2 * 2 + 2  # per-seed rows plus medians
    assert np.isfinite(a["by_seed"][0][1]["L1_rate"])
    table = (tmp_path / "a" / "table.csv").read_text().splitlines()
    assert len(table) == 1 + len(rows)
    steps = (tmp_path / "a" / "seed_0" / "steps_21.csv").read_text().splitlines()
    assert steps[0].startswith("step,t,dt,mass")
    assert len(steps) == 1 + a["runs"][0][0].result.steps
    manifest = (tmp_path / "a" / "manifest.txt").read_text()
    assert "experiment = psystem" in manifest


def test_config_is_plain_dataclass():
    cfg = ExperimentConfig(experiment="pwlinear", dofs=[11])
    cfg.validate()
    cfg.cfl = 0.0
    with pytest.raises(ConfigurationError):
        cfg.validate()
