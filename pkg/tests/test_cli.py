# -*- coding: utf-8 -*-
import json

import pandas as pd
import pytest
from click.testing import CliRunner

from src.cli.main_command import cli
from src.core.experiment_config import KINDS

from conftest import CONFIGS, FIXTURES

T6 = str(FIXTURES / "t6.txt")


@pytest.fixture
def invoke(tmp_path):
    runner = CliRunner()
    settings = str(tmp_path / "settings.json")

    def _invoke(*args):
        return runner.invoke(cli, ["--config", settings, *[str(a) for a in args]])

    return _invoke


def _run(invoke, config, output_dir, *extra):
    result = invoke("run", config, "--output-dir", output_dir, *extra)
    assert result.exit_code == 0, result.stderr
    return result.stdout.strip()


def test_run_t6_denasa_inference(invoke, tmp_path):
    main = _run(invoke, CONFIGS / "t6_denasa_inference.json", tmp_path / "out")
    assert main.endswith("t6-denasa-inference.csv")
    frame = pd.read_csv(main)
    assert list(frame.columns) == ["trial", "step", "metric", "value"]
    assert sorted(frame["trial"].unique()) == [0, 1, 2, 3, 4]
    final = frame[(frame["step"] == 40) & (frame["metric"] == "posterior:6")]
    assert len(final) == 5
    assert (final["value"] == 1.0).all()
    prior = frame[(frame["step"] == 0) & (frame["metric"] == "entropy")]
    assert (prior["value"] == 1.0).all()

    meta = json.loads((tmp_path / "out" / "t6-denasa-inference.meta.json").read_text(encoding="utf-8"))
    assert meta["kind"] == "denasa-inference"
    assert meta["seed"] == 42
    assert meta["trials"] == 5
    assert len(meta["config_hash"]) == 64
    leaky = pd.read_csv(tmp_path / "out" / "t6-denasa-inference.leaky.csv")
    assert list(leaky["client"]) == [6, 4]


# 确定性检查只比较字节，试验规模压到最小
SMALL_PARAMS = {
    "n_trials": 2,
    "max_users": 3,
    "n_observations": 10,
    "n_connections": 5,
    "n_matchmakers": 5,
    "n_helpers": 5,
    "n_frequency_samples": 50,
    "n_formations": 2,
    "n_snapshots": 3,
    "n_probes": 10,
}


def _shrunk_config(path, tmp_path):
    data = json.loads(path.read_text(encoding="utf-8"))
    defaults = KINDS[data["kind"]]["params"]
    data["params"] = {
        **data.get("params", {}),
        **{k: v for k, v in SMALL_PARAMS.items() if k in defaults},
    }
    for key, value in data.get("inputs", {}).items():
        if isinstance(value, str):
            data["inputs"][key] = str((path.parent / value).resolve())
        elif isinstance(value, list):
            data["inputs"][key] = [str((path.parent / v).resolve()) for v in value]
    target = tmp_path / path.name
    target.write_text(json.dumps(data), encoding="utf-8")
    return target


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_run_is_byte_deterministic(invoke, tmp_path, path):
    config = _shrunk_config(path, tmp_path)
    _run(invoke, config, tmp_path / "a")
    _run(invoke, config, tmp_path / "b")
    _run(invoke, config, tmp_path / "c", "--workers", 2)
    # meta.json 带生成时间，只比较 CSV
    names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert names
    for name in names:
        text = (tmp_path / "a" / name).read_bytes()
        assert (tmp_path / "b" / name).read_bytes() == text, name
        assert (tmp_path / "c" / name).read_bytes() == text, name


def test_run_t6_hornet_routing(invoke, tmp_path):
    main = _run(invoke, CONFIGS / "t6_hornet_routing.json", tmp_path)
    frame = pd.read_csv(main)
    sizes = frame[frame["metric"] == "set_size"].pivot(index="trial", columns="step", values="value")
    assert sizes.loc[0].tolist() == [2, 1]
    assert sizes.loc[1].tolist() == [1, 1]
    frequency = pd.read_csv(tmp_path / "t6-hornet-routing.frequency.csv")
    assert dict(zip(frequency["asn"], frequency["mean_changes"])) == {11: 1.0, 12: 0.0, 13: 1.0}
    meta = json.loads((tmp_path / "t6-hornet-routing.meta.json").read_text(encoding="utf-8"))
    assert meta["changed_fraction"] == pytest.approx(2 / 3)
    assert meta["n_changes"] == 2
    route_log = pd.read_csv(tmp_path / "t6-hornet-routing.route_log.csv")
    assert list(route_log.columns) == ["probe", "day", "origin_as", "penultimate_as"]
    assert route_log["penultimate_as"].tolist() == [21, 22, 21, 21, 23, 22]


def test_run_t6_hornet_mobility_writes_observations(invoke, tmp_path):
    config = tmp_path / "hornet.json"
    config.write_text(
        json.dumps(
            {
                "kind": "hornet-mobility",
                "seed": 3,
                "name": "t6-hornet",
                "inputs": {
                    "topology": T6,
                    "checkins": str(FIXTURES / "t6_checkins.csv"),
                    "country_map": str(FIXTURES / "t6_country_map.csv"),
                },
                "params": {"dst": 1},
            }
        ),
        encoding="utf-8",
    )
    _run(invoke, config, tmp_path / "out")
    observations = pd.read_csv(tmp_path / "out" / "t6-hornet.observations.csv")
    assert list(observations.columns) == ["trial", "kind", "predecessor", "position", "destination", "timestamp"]
    assert (observations["kind"] == "hornet").all()
    assert (observations["destination"] == 1).all()
    # alice: US, US, DE, DE；AS5 经 AS2、AS6 经 AS3 到达 AS1
    assert observations[observations["trial"] == 0]["predecessor"].tolist() == [2, 2, 3, 3]
    assert len(observations) == 11


def test_run_missing_seed(invoke, tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"kind": "dovetail", "inputs": {"topology": T6}}), encoding="utf-8")
    result = invoke("run", config, "--output-dir", tmp_path / "out")
    assert result.exit_code == 1
    assert "seed" in result.stderr
    assert not (tmp_path / "out").exists()


def test_run_missing_input_file(invoke, tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(
        json.dumps({"kind": "dovetail", "seed": 1, "inputs": {"topology": "nowhere.txt"}}), encoding="utf-8"
    )
    result = invoke("run", config, "--output-dir", tmp_path / "out")
    assert result.exit_code == 1
    assert "inputs.topology" in result.stderr


def test_summarize(invoke, tmp_path):
    main = _run(invoke, CONFIGS / "t6_denasa_inference.json", tmp_path)
    result = invoke("summarize", main, "--group-by", "step")
    assert result.exit_code == 0, result.stderr
    lines = result.stdout.splitlines()
    assert lines[0] == "metric,step,n,q1,median,q3,iqr,band_lo,band_hi"
    assert "map_correct,40,5,1,1,1,0,1,1" in lines

    output = tmp_path / "summary.csv"
    assert invoke("summarize", main, "--output", output).exit_code == 0
    assert output.read_text(encoding="utf-8") == result.stdout


def test_summarize_unknown_column(invoke, tmp_path):
    main = _run(invoke, CONFIGS / "t6_denasa_inference.json", tmp_path)
    result = invoke("summarize", main, "--group-by", "user")
    assert result.exit_code == 1
    assert "group_by" in result.stderr


def test_paths(invoke):
    result = invoke("paths", T6, 6, 5)
    assert result.exit_code == 0
    assert result.stdout.splitlines() == [
        "best: 6 4 2 5",
        "routable: 6 3 1 2 5",
        "routable: 6 4 1 2 5",
        "routable: 6 4 2 5",
    ]
    assert invoke("paths", T6, 6, 5, "--max-peer-links", 0).stdout.splitlines() == [
        "best: 6 4 2 5",
        "routable: 6 4 2 5",
    ]


def test_paths_unknown_as(invoke):
    result = invoke("paths", T6, 6, 99)
    assert result.exit_code == 1
    assert "AS99" in result.stderr


def test_oracle_commands(invoke):
    assert invoke("oracle", "resilience", T6, 6, 4).stdout.strip() == "3/4"
    assert invoke("oracle", "resilience", T6, 5, 6).stdout.strip() == "1/2"
    assert invoke("oracle", "hijack", T6, 5, 3).stdout.strip() == "1 3 4 6"
    assert invoke("oracle", "paths", T6, 6, 5, "--max-len", 4).stdout.splitlines() == ["6 4 2 5"]
    routing = invoke("oracle", "routing", T6, 5).stdout.splitlines()
    assert routing[0] == "1: 1 2 5"
    assert routing[-1] == "6: 6 4 2 5"


def test_oracle_freeze_t6(invoke, tmp_path):
    output = tmp_path / "t6.json"
    result = invoke("oracle", "freeze-t6", T6, "--output", output)
    assert result.exit_code == 0
    expected = json.loads((FIXTURES / "t6_regression.json").read_text(encoding="utf-8"))
    assert json.loads(output.read_text(encoding="utf-8")) == expected


def test_oracle_rejects_large_graph(invoke, tmp_path):
    topo = tmp_path / "chain.txt"
    topo.write_text("".join(f"{i}|{i + 1}|-1\n" for i in range(1, 20)), encoding="utf-8")
    result = invoke("oracle", "routing", topo, 1)
    assert result.exit_code == 1


@pytest.mark.slow
@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_run(invoke, tmp_path, path):
    main = _run(invoke, path, tmp_path)
    frame = pd.read_csv(main)
    assert len(frame) > 0
    assert frame["value"].notna().all()
