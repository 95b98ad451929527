import json
import subprocess
import sys
import time

import pytest

import tennis_dqr.sampler as sampler_mod
from tennis_dqr.cli import main, parse_profile, read_config, UsageError
from tennis_dqr.design import CovariateProfile
from tennis_dqr.ingest import read_observations
from tennis_dqr.sampler import SamplerConfig, TauParams
from tennis_dqr.validation import SCALES, check_coverage

from atp_fixture import write_corpus

TINY_FIT = ["--directions", "6", "--burn-in", "40", "--iters", "200", "--thin", "2", "--seed", "42"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    write_corpus(d / "csv", seed=11)
    assert main(["ingest", str(d / "csv"), "-o", str(d / "obs.csv")]) == 0
    assert main(["fit", str(d / "obs.csv"), "-o", str(d / "fit.json"), *TINY_FIT]) == 0
    return d


def test_ingest_outputs(workdir, capsys):
    out = workdir / "again.csv"
    assert main(["ingest", str(workdir / "csv"), "-o", str(out)]) == 0
    printed = capsys.readouterr().out
    obs = read_observations(out)
    assert f"observations: {len(obs)}" in printed
    report = json.loads((workdir / "again.report.json").read_text())
    assert report["observations"] == len(obs)
    assert sum(report["excluded"].values()) + report["rows_retained"] == report["rows_parsed"]
    manifest = json.loads((workdir / "again.csv.manifest.json").read_text())
    assert manifest["command"] == "ingest" and len(manifest["inputs"]) == 3


def test_ingest_rerun_same_fingerprint(workdir):
    out = workdir / "rerun.csv"
    assert main(["ingest", str(workdir / "csv"), "-o", str(out)]) == 0
    a = json.loads((workdir / "obs.report.json").read_text())["observation_fingerprint"]
    b = json.loads((workdir / "rerun.report.json").read_text())["observation_fingerprint"]
    assert a == b
    assert out.read_bytes() == (workdir / "obs.csv").read_bytes()


def test_ingest_json_output_and_cutoff(workdir):
    out = workdir / "obs_cut.json"
    assert main(["ingest", str(workdir / "csv"), "-o", str(out), "--cutoff-date", "2009-12-31"]) == 0
    obs = read_observations(out)
    full = read_observations(workdir / "obs.csv")
    assert 0 < len(obs) < len(full)
    assert all(o.match_key.startswith("atp_matches_2009") for o in obs)


def test_ingest_empty_dir(tmp_path, capsys):
    assert main(["ingest", str(tmp_path), "-o", str(tmp_path / "o.csv")]) == 1
    assert "no input files" in capsys.readouterr().err


def test_fit_document(workdir):
    doc = json.loads((workdir / "fit.json").read_text())
    assert doc["tau"] == 0.25 and len(doc["directions"]) == 6
    assert len(doc["design_columns"]) == 24
    assert doc["config"]["total_iters"] == 200 and doc["config"]["seed"] == 42
    assert doc["manifest"] == "fit.json.manifest.json"
    man = json.loads((workdir / "fit.json.manifest.json").read_text())
    assert man["settings"]["directions"] == 6 and man["settings"]["jobs"] == 1


def test_fit_seed_twice_identical(workdir):
    (workdir / "second").mkdir()
    out = workdir / "second" / "fit.json"
    assert main(["fit", str(workdir / "obs.csv"), "-o", str(out), *TINY_FIT]) == 0
    assert out.read_bytes() == (workdir / "fit.json").read_bytes()


def test_fit_other_tau_and_config_file(workdir):
    cfg = workdir / "run.cfg"
    cfg.write_text("# tiny run\ntau = 0.7\ndirections = 4\nburn-in = 20\niters = 100\nthin = 2\nseed = 3\n")
    out = workdir / "fit_cfg.json"
    assert main(["fit", str(workdir / "obs.csv"), "-o", str(out), "--config", str(cfg), "--seed", "5"]) == 0
    doc = json.loads(out.read_text())
    assert doc["tau"] == 0.7 and len(doc["directions"]) == 4 and doc["config"]["seed"] == 5


def test_fit_defaults():
    from tennis_dqr.cli import FIT_DEFAULTS
    assert FIT_DEFAULTS["tau"] == 0.25 and FIT_DEFAULTS["directions"] == 180
    assert (FIT_DEFAULTS["burn_in"], FIT_DEFAULTS["iters"], FIT_DEFAULTS["thin"]) == (10_000, 100_000, 100)


def test_fit_chain_dump(workdir):
    out = workdir / "fit_chains.json"
    assert main(["fit", str(workdir / "obs.csv"), "-o", str(out), *TINY_FIT,
                 "--dump-chains", str(workdir / "chains")]) == 0
    files = sorted(p.name for p in (workdir / "chains").iterdir())
    assert files == [f"chain_{j:03d}.csv" for j in range(6)]


@pytest.mark.parametrize("extra", [["--tau", "1.5"], ["--thin", "3"], ["--directions", "2"]])
def test_fit_bad_settings_are_usage_errors(workdir, extra, capsys):
    assert main(["fit", str(workdir / "obs.csv"), "-o", str(workdir / "x.json"), *TINY_FIT, *extra]) == 2
    assert "usage:" in capsys.readouterr().err


def test_fit_missing_input_is_runtime_error(tmp_path):
    assert main(["fit", str(tmp_path / "none.csv"), "-o", str(tmp_path / "f.json")]) == 1


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(UsageError):
        read_config(cfg)


@pytest.mark.parametrize("preset, count", [("surface", 9), ("top20", 6), ("win", 6), ("tournament", 12)])
def test_contour_presets(workdir, preset, count):
    out = workdir / f"c_{preset}.json"
    assert main(["contour", str(workdir / "fit.json"), "-o", str(out), "--preset", preset]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["profiles"]) == count and doc["family"] == preset
    for p in doc["profiles"]:
        assert p["empty"] or len(p["original"]) >= 3


def test_contour_custom_profiles(workdir):
    out = workdir / "c_custom.json"
    assert main(["contour", str(workdir / "fit.json"), "-o", str(out),
                 "--profile", "nadal clay:player=Nadal,surface=Clay",
                 "--profile", "fed slam win:player=Federer,tournament=GrandSlam,win=yes"]) == 0
    doc = json.loads(out.read_text())
    assert [p["name"] for p in doc["profiles"]] == ["nadal clay", "fed slam win"]
    assert doc["profiles"][1]["profile"]["win"] is True


@pytest.mark.parametrize("spec", ["x:player", "x:colour=red", "x:player=Murray", "x:win=maybe"])
def test_malformed_profile_exits_2(workdir, spec, capsys):
    code = main(["contour", str(workdir / "fit.json"), "-o", str(workdir / "bad.json"), "--profile", spec])
    assert code == 2
    assert "usage:" in capsys.readouterr().err


def test_contour_needs_something(workdir):
    assert main(["contour", str(workdir / "fit.json"), "-o", str(workdir / "n.json")]) == 2


def test_unknown_flag_exits_2(workdir):
    with pytest.raises(SystemExit) as exc:
        main(["contour", str(workdir / "fit.json"), "-o", "x", "--colour", "red"])
    assert exc.value.code == 2


def test_parse_profile_defaults():
    name, prof = parse_profile("ref:")
    assert name == "ref" and prof == CovariateProfile()
    name, prof = parse_profile("player=Djokovic,top20=yes")
    assert prof == CovariateProfile(player="Djokovic", top20=True)


def test_plot_outputs_and_determinism(workdir):
    src = workdir / "c_surface.json"
    if not src.exists():
        assert main(["contour", str(workdir / "fit.json"), "-o", str(src), "--preset", "surface"]) == 0
    a, b = workdir / "surface_a.svg", workdir / "surface_b.svg"
    assert main(["plot", str(src), "-o", str(a)]) == 0
    assert main(["plot", str(src), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".csv").read_bytes() == b.with_suffix(".csv").read_bytes()
    text = a.read_text()
    assert "relative points won" in text and ">Clay<" in text


def test_plot_bad_input(tmp_path):
    (tmp_path / "c.json").write_text("{}")
    assert main(["plot", str(tmp_path / "c.json"), "-o", str(tmp_path / "p.svg")]) == 1


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "tennis_dqr.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"


def test_validate_tiny_under_a_minute(capsys):
    t0 = time.perf_counter()
    code = main(["validate", "--scale", "tiny"])
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    assert code == 0, out
    assert elapsed < 60
    assert "FAIL" not in out and "checks passed" in out


def test_wrong_theta_sign_fails_coverage(monkeypatch):
    real = sampler_mod.tau_params

    def flipped(tau):
        tp = real(tau)
        return TauParams(tp.tau, -tp.theta, tp.psi2)

    monkeypatch.setattr(sampler_mod, "tau_params", flipped)
    cfg = SamplerConfig(burn_in=300, total_iters=3000, thin=3, seed=21)
    (result,) = check_coverage(**{**SCALES["tiny"]["coverage"], "cfg": cfg})
    assert not result.passed
    assert result.measured > 0.3
