import csv
import io
import json

from eventq.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_bench_poisson_emits_csv(capsys):
    code, out, _ = run_cli(
        capsys, "bench", "poisson", "--queue", "ring", "--lambda", "400",
        "--delay", "80", "--batch", "4", "--steps", "20000",
        "--reps", "3", "--warmup", "1",
    )
    assert code == 0
    rows = parse_csv(out)
    assert len(rows) == 1
    assert rows[0]["kind"] == "ring"
    assert float(rows[0]["drop_rate"]) == 0.0
    assert float(rows[0]["ns_per_step_per_queue"]) > 0


def test_bench_poisson_donothing_drops_everything(capsys):
    code, out, _ = run_cli(
        capsys, "bench", "poisson", "--queue", "donothing", "--batch", "2",
        "--steps", "20000", "--reps", "3", "--warmup", "1",
    )
    assert code == 0
    rows = parse_csv(out)
    assert float(rows[0]["drop_rate"]) == 1.0


def test_bench_rsnn_bitarray_forward_ad_is_config_error(capsys):
    code, _, err = run_cli(
        capsys, "bench", "rsnn", "--n", "4", "--mode", "forward-ad",
        "--queue", "bitarray32", "--steps", "50", "--reps", "3",
        "--warmup", "1",
    )
    assert code == 2
    assert "gradient" in err


def test_unknown_kind_is_config_error(capsys):
    code, _, err = run_cli(
        capsys, "bench", "poisson", "--queue", "splaytree", "--steps", "100",
    )
    assert code == 2
    assert "unknown queue kind" in err


def test_bgpq_is_config_error(capsys):
    code, _, err = run_cli(
        capsys, "bench", "poisson", "--queue", "bgpq", "--steps", "100",
    )
    assert code == 2
    assert "bgpq" in err


def test_droprate_lossless_ring_all_zero(capsys):
    code, out, _ = run_cli(
        capsys, "droprate", "--queue", "ring", "--lambda", "40",
        "--pressures", "0.1,0.2,0.5", "--steps", "30000",
        "--capacity", "20", "--max-delay", "20",
    )
    assert code == 0
    rows = parse_csv(out)
    assert len(rows) == 3
    assert all(float(r["drop_rate"]) == 0.0 for r in rows)


def test_droprate_csv_is_byte_identical_for_fixed_seed(capsys, tmp_path):
    argv = ["droprate", "--queue", "fiforing", "--capacity", "4",
            "--lambda", "40", "--pressures", "0.5,1.0",
            "--steps", "30000", "--seed", "11"]
    code1, out1, _ = run_cli(capsys, *argv)
    code2, out2, _ = run_cli(capsys, *argv)
    assert code1 == code2 == 0
    assert out1 == out2


def test_droprate_json_format(capsys):
    code, out, _ = run_cli(
        capsys, "droprate", "--queue", "donothing", "--pressures", "0.5",
        "--steps", "5000", "--format", "json", "--lambda", "20",
    )
    assert code == 0
    data = json.loads(out)
    assert data[0]["drop_rate"] == 1.0


def test_out_file_writing(capsys, tmp_path):
    path = tmp_path / "rows.csv"
    code, out, _ = run_cli(
        capsys, "droprate", "--queue", "donothing", "--pressures", "0.5",
        "--steps", "5000", "--lambda", "20", "--out", str(path),
    )
    assert code == 0
    assert out == ""
    assert path.read_text().startswith("workload,")


def test_env_seed_is_recorded(capsys, monkeypatch):
    monkeypatch.setenv("EVENTQ_SEED", "777")
    code, out, _ = run_cli(
        capsys, "droprate", "--queue", "donothing", "--pressures", "0.5",
        "--steps", "5000", "--lambda", "20",
    )
    assert code == 0
    assert parse_csv(out)[0]["seed"] == "777"


def test_verify_small_run_passes(capsys):
    code, out, _ = run_cli(
        capsys, "verify", "--configs", "ring,fiforing", "--runs", "2",
        "--events", "4000",
    )
    assert code == 0
    assert "ring: Equal" in out
    assert "fiforing: Equal" in out


def test_verify_unknown_config_is_config_error(capsys):
    code, _, err = run_cli(capsys, "verify", "--configs", "telepathy")
    assert code == 2
    assert "telepathy" in err


def test_gradcheck_small_network_passes(capsys):
    code, out, _ = run_cli(
        capsys, "gradcheck", "--n", "4", "--steps", "300",
        "--directions", "4", "--seed", "3",
    )
    assert code == 0
    assert "worst relative error" in out


def test_gradcheck_inconclusive_exit_code(capsys, monkeypatch):
    import eventq.cli as cli_mod
    monkeypatch.setattr(cli_mod, "sample_usable_directions",
                        lambda *a, **kw: [])
    code, out, _ = run_cli(
        capsys, "gradcheck", "--n", "4", "--steps", "50", "--directions", "2",
    )
    assert code == 3
    assert "inconclusive" in out


def test_bench_sweep_capacity(capsys):
    code, out, _ = run_cli(
        capsys, "bench", "sweep", "--axis", "capacity", "--grid", "4,8",
        "--queue", "sortedarray", "--lambda", "8", "--delay", "4",
        "--batch", "2", "--steps", "4000", "--reps", "3", "--warmup", "1",
    )
    assert code == 0
    rows = parse_csv(out)
    assert [r["capacity"] for r in rows] == ["4", "8"]
