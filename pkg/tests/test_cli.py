import json

import pytest

from config import ConfigError, RunConfig
from main import build_parser, cmd_build, cmd_scan, cmd_spectrum, main
from utils import read_csv


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    small = {
        "n": 3, "K0": -1.0, "b": 10.0, "delta": 0.1, "r_max": 200.0,
        "schedule": {"k_bar_min": 1.0, "k_bar_max": 2.0, "max_level": 1, "growth": 2.0, "width": 0.5,
                     "mode": "locked"},
    }
    out = tmp_path_factory.mktemp("build")
    config = RunConfig.from_dict({**small, "output_dir": str(out)})
    return config, out, cmd_build(config, str(out))


def test_build_writes_outputs(built):
    config, out, report = built
    digest = config.config_hash()
    for name in ("profile.csv", "potential.csv", "trajectory.csv"):
        path = out / name
        assert path.read_text().splitlines()[0] == f"# config_hash={digest}"
    profile = read_csv(str(out / "profile.csv"))
    assert profile["r"].max() <= 200.0
    saved = json.loads((out / "build_report.json").read_text())
    assert saved["config_hash"] == digest
    assert saved["contracts"]["passed"]
    assert report["reconstruction_residual"] <= 1e-6


def test_build_is_reproducible(built, tmp_path):
    config, out, _ = built
    first = {name: (out / name).read_bytes() for name in ("potential.csv", "build_report.json")}
    cmd_build(config, str(out))
    assert {name: (out / name).read_bytes() for name in first} == first


def test_invalid_delta_exits_with_config_error(tmp_path):
    path = write_config(tmp_path, {"delta": 0.6})
    assert main(["build", "--config", path, "--out", str(tmp_path)]) == 2
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"delta": 0.6})


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"colour": "blue"})


def test_verify_reports_envelope_violation(tmp_path, small_config):
    data = json.loads(json.dumps(small_config))
    data["schedule"]["amplitudes"] = [50.0]
    path = write_config(tmp_path, data)
    assert main(["verify", "--config", path, "--out", str(tmp_path)]) == 1
    saved = json.loads((tmp_path / "verify_report.json").read_text())
    assert not saved["passed"]
    assert any(check["name"] == "contract II" and not check["passed"] for check in saved["checks"])


def test_parser_flags():
    args = build_parser().parse_args(["scan", "--grid", "1.5:4:31", "--rmax", "2000", "--seed", "7"])
    assert (args.command, args.grid, args.rmax, args.seed) == ("scan", "1.5:4:31", 2000.0, 7)
    with pytest.raises(SystemExit):
        build_parser().parse_args(["build", "--grid", "1:2:3"])
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_config_hash_tracks_content():
    base = RunConfig()
    assert base.config_hash() == RunConfig().config_hash()
    assert base.config_hash() != RunConfig(seed=1).config_hash()


def test_mode_index_below_bessel_range_is_rejected(tmp_path):
    # n = 3, i = 0 gives nu^2 - 1/4 = 0
    path = write_config(tmp_path, {"n": 3, "mode": 0})
    assert main(["build", "--config", path, "--out", str(tmp_path)]) == 2
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"n": 3, "mode": 0})
    RunConfig.from_dict({"n": 3, "mode": 2})


def test_rmax_flag_overrides_config(tmp_path, small_config):
    path = write_config(tmp_path, small_config)
    config = RunConfig.from_json(path, {"r_max": 1500.0})
    assert config.r_max == 1500.0
    assert config.config_hash() != RunConfig.from_json(path).config_hash()


def test_scan_cannot_outrun_the_potential(tmp_path, small_config):
    # the locked potential is built up to r_max = 200, scans need 1e3
    path = write_config(tmp_path, small_config)
    assert main(["scan", "--config", path, "--out", str(tmp_path), "--grid", "2:3:3"]) == 1
    saved = json.loads((tmp_path / "scan_report.json").read_text())
    assert not saved["passed"]
    assert saved["errors"][0]["stage"] == "scan"


def test_spectrum_writes_measure_and_m_functions(tmp_path, small_config):
    config = RunConfig.from_dict({**small_config, "output_dir": str(tmp_path)})
    report = cmd_spectrum(config, str(tmp_path), "0.5:5.0:90")
    assert report["passed"]
    digest = config.config_hash()
    for name in ("measure.csv", "m_function.csv"):
        assert (tmp_path / name).read_text().splitlines()[0] == f"# config_hash={digest}"
    measure = read_csv(str(tmp_path / "measure.csv"))
    assert len(measure) == 90
    m_functions = read_csv(str(tmp_path / "m_function.csv"))
    assert (m_functions["m_plus_im"] > 0).all()
    assert (m_functions["m_minus_im"] < 0).all()
    bottom = json.loads((tmp_path / "spectrum_report.json").read_text())["band_bottom"]
    assert bottom["band_cells"] > 0
    assert bottom["positive_band_cells"] == bottom["band_cells"]


def test_scan_writes_classification(tmp_path, small_config):
    config = RunConfig.from_dict({**small_config, "r_max": 1000.0, "output_dir": str(tmp_path)})
    report = cmd_scan(config, str(tmp_path), "2.0:4.0:5")
    assert report["passed"]
    frame = read_csv(str(tmp_path / "scan.csv"))
    assert len(frame) == 5
    assert list(frame.columns) == ["lambda", "kbar", "gamma", "osc", "targeted", "class"]
    summary = json.loads((tmp_path / "scan_report.json").read_text())["summary"]
    assert sum(summary["counts"].values()) == 5


@pytest.mark.slow
def test_verify_passes_on_default_schedule(tmp_path, small_config):
    path = write_config(tmp_path, {**small_config, "r_max": 4000.0})
    assert main(["verify", "--config", path, "--out", str(tmp_path)]) == 0
    saved = json.loads((tmp_path / "verify_report.json").read_text())
    names = {check["name"] for check in saved["checks"]}
    assert {"bessel oracle", "contract I", "contract II", "contract III", "pipeline closure", "Herglotz",
            "Weyl disk identities", "measure relations", "norming constant", "Parseval", "band bottom",
            "Wigner-von Neumann exponent", "resonance signatures", "comparison"} <= names
    skipped = [check for check in saved["checks"] if "skipped" in check]
    assert [check["name"] for check in skipped] == ["resonance signatures"]
