import json

import numpy as np
import pytest

from hybridlg.cli import main


def read_csv(path):
    metadata = None
    header = None
    rows = []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            metadata = json.loads(line[1:])
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    return metadata, header, rows


def as_dicts(header, rows):
    return [dict(zip(header, row)) for row in rows]


def test_usage_errors_exit_64(tmp_path, capsys):
    assert main(["no-such-command"]) == 64
    assert main(["sweep", "--grid-gamma", "nonsense"]) == 64
    assert main(["k3", "--gamma", "0.5", "--q", "0.5"]) == 64  # no --t
    assert main(["nsit"]) == 64  # neither --t nor --maximize-over-t
    assert main(["evolve", "--gamma", "0.5", "--q", "0.5",
                 "--rho0", "1,0,0"]) == 64


def test_evolve_initial_row_and_metadata(tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["evolve", "--gamma", "0.9905", "--q", "1", "--t-max", "5",
                 "--samples", "11", "--out", str(out)]) == 0
    metadata, header, rows = read_csv(out)
    assert metadata["tool"] == "hybridlg"
    assert metadata["config"]["gamma"] == 0.9905
    assert header[0] == "t"
    first = as_dicts(header, rows)[0]
    assert float(first["t"]) == 0.0
    assert float(first["r"]) == pytest.approx(1.0, abs=1e-15)
    assert float(first["sx"]) == pytest.approx(0.0, abs=1e-12)
    assert float(first["sy"]) == pytest.approx(1.0, abs=1e-12)
    assert float(first["sz"]) == pytest.approx(0.0, abs=1e-12)


def test_evolve_lindblad_keeps_unit_trace(tmp_path):
    out = tmp_path / "traj.csv"
    main(["evolve", "--gamma", "0.9905", "--q", "1", "--t-max", "30",
          "--samples", "61", "--out", str(out)])
    _, header, rows = read_csv(out)
    records = as_dicts(header, rows)
    assert len(records) == 61
    assert all(abs(float(r["r"]) - 1.0) <= 1e-9 for r in records)


def test_evolve_endpoint_distinguishes_conditioning(tmp_path):
    ends = {}
    for q in ("0", "1"):
        out = tmp_path / f"traj{q}.csv"
        main(["evolve", "--gamma", "0.9905", "--q", q, "--t-max", "12",
              "--samples", "25", "--out", str(out)])
        _, header, rows = read_csv(out)
        last = as_dicts(header, rows)[-1]
        ends[q] = np.array([float(last["sy"]), float(last["sz"])])
    assert np.linalg.norm(ends["0"] - ends["1"]) > 0.1


def test_evolve_extinction_flushes_and_exits_2(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code = main(["evolve", "--gamma", "0.9905", "--q", "0", "--t-max", "60",
                 "--samples", "61", "--out", str(out)])
    assert code == 2
    _, header, rows = read_csv(out)
    assert 0 < len(rows) < 61  # partial output flushed
    assert "extinguished" in capsys.readouterr().err


def test_evolve_rk4_engine_matches_exact(tmp_path):
    results = {}
    for engine in ("exact", "rk4"):
        out = tmp_path / f"{engine}.csv"
        main(["evolve", "--gamma", "0.8", "--q", "0.4", "--t-max", "3",
              "--samples", "7", "--engine", engine, "--dt", "1e-4",
              "--out", str(out)])
        _, header, rows = read_csv(out)
        results[engine] = np.array(
            [[float(x) for x in row] for row in rows])
    assert np.max(np.abs(results["exact"] - results["rk4"])) <= 1e-7


def test_evolve_accepts_user_state(tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["evolve", "--gamma", "0.5", "--q", "0.5", "--t-max", "1",
                 "--samples", "3", "--rho0", "1,0,0,0",
                 "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    first = as_dicts(header, rows)[0]
    assert float(first["sz"]) == pytest.approx(1.0, abs=1e-12)


def test_k3_single_point_and_optimize(tmp_path):
    single = tmp_path / "k3.csv"
    assert main(["k3", "--gamma", "0", "--q", "1", "--t",
                 str(np.pi / 3), "--out", str(single)]) == 0
    _, header, rows = read_csv(single)
    record = as_dicts(header, rows)[0]
    assert float(record["k3"]) == pytest.approx(1.5, abs=1e-9)

    optimized = tmp_path / "k3opt.csv"
    assert main(["k3", "--gamma", "0", "--q", "1", "--optimize",
                 "--out", str(optimized)]) == 0
    metadata, header, rows = read_csv(optimized)
    assert float(metadata["k3_max"]) == pytest.approx(1.5, abs=1e-6)
    assert float(metadata["t_star"]) == pytest.approx(np.pi / 3, abs=1e-4)


def test_sweep_csv_contract_and_determinism(tmp_path):
    out = tmp_path / "a.csv"
    args = ["sweep", "--grid-gamma", "0.3:1.2:3", "--grid-q",
            "1e-3:1:3:log", "--resolution", "400", "--out", str(out)]
    assert main(args) == 0
    first_bytes = out.read_text()
    assert main(args) == 0
    assert out.read_text() == first_bytes

    metadata, header, rows = read_csv(out)
    assert header == ["gamma", "q", "k3_max", "t_star", "error"]
    gammas = [float(r[0]) for r in rows]
    qs = [float(r[1]) for r in rows]
    assert gammas == sorted(gammas)  # gamma outer
    assert qs[:3] == sorted(qs[:3])  # q inner


def test_sweep_workers_value_identical(tmp_path):
    base = ["sweep", "--grid-gamma", "0.4:1.0:2", "--grid-q",
            "0.01:1:2:log", "--resolution", "300"]
    serial = tmp_path / "w1.csv"
    parallel = tmp_path / "w2.csv"
    assert main(base + ["--workers", "1", "--out", str(serial)]) == 0
    assert main(base + ["--workers", "2", "--out", str(parallel)]) == 0
    # identical numeric content for any worker count (metadata echoes differ)
    assert serial.read_text().split("\n")[1:] == \
        parallel.read_text().split("\n")[1:]


def test_sweep_degenerate_grid_matches_k3_optimize(tmp_path):
    cell = tmp_path / "cell.csv"
    point = tmp_path / "point.csv"
    assert main(["sweep", "--grid-gamma", "0.8:0.8:1", "--grid-q",
                 "0.2:0.2:1", "--out", str(cell)]) == 0
    assert main(["k3", "--gamma", "0.8", "--q", "0.2", "--optimize",
                 "--out", str(point)]) == 0
    _, header, rows = read_csv(cell)
    record = as_dicts(header, rows)[0]
    metadata, _, _ = read_csv(point)
    assert float(record["k3_max"]) == float(metadata["k3_max"])
    assert float(record["t_star"]) == float(metadata["t_star"])


def test_spectrum_command(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["spectrum", "--gamma", "1", "--q", "1",
                 "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    record = as_dicts(header, rows)[0]
    assert record["has_exact_root"] == "1"
    eigs = [complex(float(record[f"eig{k}_re"]), float(record[f"eig{k}_im"]))
            for k in range(4)]
    assert min(abs(e + 1.0) for e in eigs) <= 1e-10


def test_ep_locus_default_endpoints(tmp_path):
    out = tmp_path / "ep.csv"
    assert main(["ep-locus", "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    records = as_dicts(header, rows)
    assert float(records[0]["q"]) == 0.0
    assert float(records[0]["r_ep"]) == 1.0
    assert float(records[-1]["q"]) == 1.0
    assert float(records[-1]["r_ep"]) == pytest.approx(2.0, abs=1e-12)
    assert all(abs(float(r["residual"])) <= 1e-10 for r in records)


def test_bloch_traj_branches(tmp_path):
    out = tmp_path / "branches.csv"
    assert main(["bloch-traj", "--gamma", "0.9905", "--q", "1e-3",
                 "--t-max", "5", "--samples", "11", "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    records = as_dicts(header, rows)
    assert {r["branch"] for r in records} == {"+", "-"}
    for branch, sy0 in (("+", 1.0), ("-", -1.0)):
        first = next(r for r in records if r["branch"] == branch)
        assert float(first["t"]) == 0.0
        assert float(first["r"]) == pytest.approx(1.0, abs=1e-9)
        assert float(first["sy"]) == pytest.approx(sy0, abs=1e-9)


def test_nsit_command_fixed_interval(tmp_path):
    out = tmp_path / "nsit.csv"
    assert main(["nsit", "--grid-gamma", "1:1:1", "--grid-q", "0.5:0.5:1",
                 "--t", "1", "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    assert header[:7] == ["gamma", "q", "t", "delta_01_2", "delta_12",
                          "delta_02", "aot_defect"]
    record = as_dicts(header, rows)[0]
    assert float(record["delta_01_2"]) > 1e-3
    assert float(record["aot_defect"]) <= 1e-10


def test_nsit_maximize_over_t(tmp_path):
    out = tmp_path / "nsit.csv"
    assert main(["nsit", "--grid-gamma", "0.9905:0.9905:1", "--grid-q",
                 "0.3:0.3:1", "--maximize-over-t", "--resolution", "400",
                 "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    record = as_dicts(header, rows)[0]
    assert float(record["t"]) > 0.0


def test_fit_check_pipeline(tmp_path):
    sweep_csv = tmp_path / "sweep.csv"
    assert main(["sweep", "--grid-gamma", "0.1:0.9:4", "--grid-q",
                 "1e-4:1:6:log", "--resolution", "800",
                 "--out", str(sweep_csv)]) == 0
    out = tmp_path / "resid.csv"
    assert main(["fit-check", "--in", str(sweep_csv), "--log-base", "auto",
                 "--out", str(out)]) == 0
    metadata, header, rows = read_csv(out)
    assert header == ["gamma", "q", "k3_computed", "k3_fit", "residual",
                      "region"]
    assert metadata["log_base"] == "e"
    records = as_dicts(header, rows)
    assert all(r["region"] in ("1", "2", "3") for r in records)
    assert all(float(r["residual"]) <= 0.2 for r in records)


def test_exit_codes_for_domain_failures(tmp_path, capsys):
    # coalescing mode rates: internal numeric failure
    assert main(["bloch-traj", "--gamma", "1", "--q", "0",
                 "--out", str(tmp_path / "x.csv")]) == 70
    # invalid physical input surfaces as usage error
    assert main(["spectrum", "--gamma", "0", "--q", "0.5",
                 "--out", str(tmp_path / "y.csv")]) == 64
    # extinction during a point evaluation
    assert main(["k3", "--gamma", "0.9905", "--q", "0", "--t", "9",
                 "--eps-trace", "1e-6",
                 "--out", str(tmp_path / "z.csv")]) == 2
    capsys.readouterr()


def test_fit_check_allow_extrapolation(tmp_path):
    sweep_csv = tmp_path / "sweep.csv"
    main(["sweep", "--grid-gamma", "1.5:1.5:1", "--grid-q", "0.5:0.5:1",
          "--resolution", "300", "--out", str(sweep_csv)])
    excluded = tmp_path / "excl.csv"
    main(["fit-check", "--in", str(sweep_csv), "--out", str(excluded)])
    _, header, rows = read_csv(excluded)
    assert as_dicts(header, rows)[0]["region"] == "excluded"
    forced = tmp_path / "forced.csv"
    main(["fit-check", "--in", str(sweep_csv), "--allow-extrapolation",
          "--out", str(forced)])
    _, header, rows = read_csv(forced)
    assert as_dicts(header, rows)[0]["region"] in ("1", "2", "3")


def test_evolve_reaches_generator_stationary_state(tmp_path):
    from hybridlg.model import ModelParams, SIGMA_Y
    from hybridlg.spectrum import build_liouvillian

    out = tmp_path / "traj.csv"
    main(["evolve", "--gamma", "0.9905", "--q", "1", "--t-max", "30",
          "--samples", "31", "--out", str(out)])
    _, header, rows = read_csv(out)
    last = as_dicts(header, rows)[-1]

    gen = build_liouvillian(ModelParams(gamma=0.9905, q=1.0))
    eigvals, eigvecs = np.linalg.eig(gen)
    stationary = eigvecs[:, int(np.argmin(np.abs(eigvals)))].reshape(2, 2)
    stationary = stationary / np.trace(stationary)
    sy_fixed = float(np.trace(stationary @ SIGMA_Y).real)
    assert float(last["sy"]) == pytest.approx(sy_fixed, abs=1e-6)


def test_sweep_json_masks_cells_as_null(tmp_path):
    out = tmp_path / "sweep.json"
    assert main(["sweep", "--grid-gamma", "0.9:0.9:1", "--grid-q", "0:0:1",
                 "--eps-trace", "2.0", "--resolution", "200",
                 "--format", "json", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    row = payload["rows"][0]
    k3_index = payload["columns"].index("k3_max")
    error_index = payload["columns"].index("error")
    assert row[k3_index] is None
    assert "extinguished" in row[error_index]


def test_nsit_workers_value_identical(tmp_path):
    base = ["nsit", "--grid-gamma", "0.5:1.5:2", "--grid-q", "0.1:1:2:log",
            "--t", "1"]
    one = tmp_path / "w1.csv"
    two = tmp_path / "w2.csv"
    assert main(base + ["--workers", "1", "--out", str(one)]) == 0
    assert main(base + ["--workers", "2", "--out", str(two)]) == 0
    assert one.read_text().split("\n")[1:] == two.read_text().split("\n")[1:]


def test_json_format(tmp_path):
    out = tmp_path / "ep.json"
    assert main(["ep-locus", "--grid-q", "0:1:3", "--format", "json",
                 "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["metadata"]["tool"] == "hybridlg"
    assert payload["columns"] == ["q", "r_ep", "residual"]
    assert len(payload["rows"]) == 3


def test_csv_floats_have_roundtrip_precision(tmp_path):
    out = tmp_path / "k3.csv"
    main(["k3", "--gamma", "0.7", "--q", "0.3", "--t", "1.234567890123",
          "--out", str(out)])
    _, header, rows = read_csv(out)
    value = rows[0][header.index("k3")]
    assert float(value) == float(f"{float(value):.17g}")
    # 17 significant digits present for non-trivial values
    digits = value.replace("-", "").replace(".", "").split("e")[0].lstrip("0")
    assert len(digits) >= 16