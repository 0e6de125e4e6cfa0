import json
from pathlib import Path

import pytest

from aeropipe.cli import main
from aeropipe.ingest import BackgroundServer, IngestService

ROOT = Path(__file__).resolve().parent.parent
BENCH = ROOT / "scenarios" / "bench.toml"


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("AEROPIPE_CONFIG", raising=False)
    monkeypatch.delenv("AEROPIPE_DATA_DIR", raising=False)


def one_device(tmp_path):
    body = 'duration = 10\n[[device]]\nid = "d1"\nseed = 4\n[scenario.mq135]\nknots = [[0, 400.0]]\n[scenario.mq3]\nknots = [[0, 0.4]]\n'
    path = tmp_path / "one.toml"
    path.write_text(body)
    return path


def test_help_and_version(capsys):
    assert main(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out
    assert main(["--version"]) == 0


def test_unknown_flag_is_usage_error(capsys):
    assert main(["analyze", "--frobnicate"]) == 2
    assert main([]) == 2


def test_simulate_zero_duration(tmp_path):
    assert main(["simulate", str(BENCH), "--duration", "0", "--data-dir", str(tmp_path / "d")]) == 0


def test_simulate_against_local_service(tmp_path, capsys):
    svc = IngestService(tmp_path / "srv")
    svc.create_channel("K1", channel_id=1)
    with BackgroundServer(svc) as srv:
        rc = main(["simulate", str(one_device(tmp_path)), "--url", srv.url, "--api-key", "K1"])
    assert rc == 0
    assert len(svc.channel(1).entries) == 10
    assert "delivered=10" in capsys.readouterr().out


def test_simulate_bad_url_exits_one(tmp_path):
    rc = main(["simulate", str(one_device(tmp_path)), "--url", "http://127.0.0.1:9", "--api-key", "K",
               "--duration", "2"])
    assert rc == 1


def test_simulate_missing_scenario(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "nope.toml")]) == 1
    assert "cannot load scenario" in capsys.readouterr().err


def test_simulate_then_export(tmp_path, capsys):
    data = tmp_path / "d"
    assert main(["simulate", str(BENCH), "--data-dir", str(data), "--duration", "5"]) == 0
    capsys.readouterr()
    assert main(["export", "--channel", "1", "--data-dir", str(data)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "created_at,entry_id,field1,field2"
    assert len(lines) == 1 + 5  # both devices share the bench key; the second is rate-limited


def test_export_empty_channel_header_only(tmp_path, capsys):
    IngestService(tmp_path / "d").create_channel("K", channel_id=3)
    out = tmp_path / "feed.csv"
    assert main(["export", "--channel", "3", "--data-dir", str(tmp_path / "d"), "--out", str(out)]) == 0
    assert out.read_text() == "created_at,entry_id,field1,field2\n"
    assert main(["export", "--channel", "4", "--data-dir", str(tmp_path / "d")]) == 1


def test_missing_dataset_message(tmp_path, capsys):
    assert main(["analyze", "--dataset", str(tmp_path / "city_day.csv")]) == 1
    err = capsys.readouterr().err
    assert "city_day.csv" in err and "--dataset synthetic" in err


def test_analyze_synthetic(tmp_path, capsys):
    spec = tmp_path / "spec.toml"
    spec.write_text("[hyperparameters.random_forest]\nn_trees = 10\n")
    rc = main(["analyze", "--dataset", "synthetic", "--task", "classification", "--spec", str(spec),
               "--out-dir", str(tmp_path / "r")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "AQI_Bucket - without SMOTE" in out and "external reference" in out
    lines = (tmp_path / "r" / "classification_report.csv").read_text().splitlines()
    assert lines[0] == "rank,model,smote,accuracy,f1,n_train,n_test,best"
    assert len(lines) == 1 + 10


def test_insights_extremes(tmp_path, capsys):
    assert main(["insights", "extremes", "--dataset", "synthetic", "--out-dir", str(tmp_path / "i")]) == 0
    result = [l for l in capsys.readouterr().out.splitlines() if l.startswith(("max:", "min:"))]
    assert len(result) == 2
    rows = json.loads((tmp_path / "i" / "extremes.json").read_text())
    assert [r["extreme"] for r in rows] == ["max", "min"]


def test_insights_all(tmp_path):
    assert main(["insights", "--dataset", "synthetic", "--out-dir", str(tmp_path / "i")]) == 0
    names = sorted(p.name for p in (tmp_path / "i").iterdir())
    for table in ("correlation", "vehicular", "industrial", "rankings", "trends", "extremes"):
        assert f"{table}.csv" in names and f"{table}.json" in names


def test_insights_unknown_city(tmp_path, capsys):
    assert main(["insights", "trends", "--dataset", "synthetic", "--cities", "Gotham",
                 "--out-dir", str(tmp_path / "i")]) == 1


def test_config_dump_and_precedence(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[serve]\nport = 9999\n[analyze]\nseed = 7\n")
    assert main(["--config", str(cfg), "config-dump"]) == 0
    out = capsys.readouterr().out
    assert "port = 9999" in out and "seed = 7" in out
    monkeypatch.setenv("AEROPIPE_CONFIG", str(cfg))
    assert main(["config-dump"]) == 0
    assert "port = 9999" in capsys.readouterr().out


def test_bad_config_is_usage_error(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[serve\n")
    assert main(["--config", str(cfg), "config-dump"]) == 2
