import csv
import io
import json
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from toeplitz_spectra import cli
from toeplitz_spectra.cli import JobSpec, job_from_dict, main, run
from toeplitz_spectra.errors import ValidationError

HN_R, HN_V, HN_T = 2.5, -0.1 + 0.2j, 0.5 + 1j


def _job_names():
    root = resources.files("toeplitz_spectra") / "fixtures" / "jobs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _run(job):
    out, err = io.StringIO(), io.StringIO()
    code = run(job, out, err)
    return code, out.getvalue(), err.getvalue()


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestArtifacts:
    def test_lambda_hatano_nelson_endpoints(self):
        job = JobSpec("lambda", model="hatano_nelson", window=(-4, 4, -3, 3), resolution=0.02)
        code, text, _ = _run(job)
        assert code == 0
        rows = [r for r in _rows(text) if r["kind"] == "lambda"]
        E = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        t = ((E - HN_V) / np.sqrt(HN_R * HN_T)).real
        ends = (HN_V + 2 * np.sqrt(HN_R * HN_T), HN_V - 2 * np.sqrt(HN_R * HN_T))
        assert abs(E[np.argmax(t)] - ends[0]) <= 0.04
        assert abs(E[np.argmin(t)] - ends[1]) <= 0.04

    def test_chiral_json(self):
        code, text, _ = _run(JobSpec("chiral", model="ssh_chiral", format="json", s=1.172))
        assert code == 0
        doc = json.loads(text)
        c = doc["certificate"]
        assert (c["W_plus"], c["W_minus"]) == (1, -1)
        assert c["interval"][0] < 1.172 < c["interval"][1]
        assert (doc["at_scale"]["W_plus"], doc["at_scale"]["W_minus"]) == (1, -1)

    def test_csv_format(self):
        code, text, _ = _run(JobSpec("sigma", model="laplacian", N=16))
        assert code == 0
        assert "\r" not in text
        lines = text.splitlines()
        assert lines[0] == "re,im,k,band"
        assert len(lines) == 17
        # 17 significant digits round-trip exactly
        x = float(lines[3].split(",")[0])
        assert x == pytest.approx(2 * np.cos(-np.pi + 2 * np.pi * 2 / 16), abs=1e-15)

    def test_finite_columns(self):
        code, text, _ = _run(JobSpec("finite", model="hatano_nelson", N=20))
        rows = _rows(text)
        assert code == 0 and len(rows) == 20
        assert set(rows[0]) == {"re", "im", "left_mass", "participation"}

    def test_gamma_selfadjoint(self):
        job = JobSpec("gamma", model="selfadjoint", window=(-1.5, 1.5, -0.2, 0.2))
        code, text, _ = _run(job)
        rows = _rows(text)
        assert code == 0
        assert [r["side"] for r in rows] == ["right", "left"]

    def test_quasimode_energy(self):
        code, text, _ = _run(JobSpec("quasimode", model="laplacian", N=64, energy=0.5 + 0j))
        r = _rows(text)[0]
        assert code == 0 and float(r["residual"]) < 2 / 8

    def test_hypotheses(self):
        job = JobSpec("hypotheses", model="hatano_nelson", window=(-4, 4, -3, 3), resolution=0.1)
        code, text, _ = _run(job)
        d = {r["key"]: r["value"] for r in _rows(text)}
        assert code == 0 and d["all_pass"] == "1"

    def test_output_file(self, tmp_path):
        job = JobSpec("sigma", model="hatano_nelson", N=16, output="sub/out.csv", base_dir=tmp_path)
        code, text, _ = _run(job)
        assert code == 0 and text == ""
        assert (tmp_path / "sub" / "out.csv").read_text().startswith("re,im")


class TestDeterminism:
    @pytest.mark.parametrize("job", [
        JobSpec("lambda", model="ssh_chiral", window=(-1, 1, -1, 1), resolution=0.05),
        JobSpec("finite", model="ssh_chiral", N=30, format="json"),
        JobSpec("widom-check", seed=11, cases=5),
    ])
    def test_byte_identical(self, job):
        a = _run(job)[1]
        b = _run(job)[1]
        assert a == b and a

    def test_threads_do_not_change_output(self, monkeypatch):
        job = JobSpec("lambda", model="ssh_chiral", window=(-1, 1, -1, 1), resolution=0.01)
        one = _run(job)[1]
        monkeypatch.setenv("TOEPLITZ_SPECTRA_THREADS", "4")
        assert _run(job)[1] == one
        job.threads = 3
        assert _run(job)[1] == one


class TestExitCodes:
    def test_widom_check_passes(self):
        code, text, _ = _run(JobSpec("widom-check", seed=7, cases=100))
        assert code == 0
        assert len(_rows(text)) == 100

    def test_widom_check_failure(self, monkeypatch):
        from toeplitz_spectra import widom

        real = widom.widom_crosscheck

        def broken(seed, cases):
            res = real(seed, cases)
            bad = res[2]
            res[2] = type(bad)(bad.case, bad.L, bad.N, bad.E, bad.direct, bad.values, 1.0, False)
            return res

        monkeypatch.setattr(widom, "widom_crosscheck", broken)
        code, _, err = _run(JobSpec("widom-check", seed=5, cases=4))
        assert code == 3
        assert "seed=5" in err and "case=2" in err

    def test_validation_error(self):
        code, _, err = _run(JobSpec("lambda", model="ssh_chiral", window=(1, 0, 0, 1)))
        assert code == 1
        assert json.loads(err)["error"]

    def test_missing_model(self):
        code, _, err = _run(JobSpec("sigma", model="no_such_model"))
        assert code == 1

    def test_energy_off_lambda(self):
        # a quasimode needs E on Λ; 0.5 + 0.5i is not on the Laplacian's [-2, 2]
        code, _, err = _run(JobSpec("quasimode", model="laplacian", N=64, energy=0.5 + 0.5j))
        assert code == 1
        doc = json.loads(err)
        assert doc["error"] and "message" in doc

    def test_numerical_failure_is_two(self):
        code, _, err = _run(JobSpec("chiral", model="ssh_chiral", s=1.1296407873534056))
        assert code == 2
        assert json.loads(err)["error"]

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["lambda", "--window", "1", "2"])
        assert exc.value.code == 1


class TestJobs:
    @pytest.mark.parametrize("name", _job_names())
    def test_fixture_parses(self, name):
        p = cli.fixture_path("jobs", name)
        d = json.loads(p.read_text())
        assert d["description"]
        job = job_from_dict(d, p.parent)
        job.validate()
        cli.resolve_model(job.model, job.base_dir)

    def test_figure_coverage(self):
        names = _job_names()
        for fig in ("fig_hn", "fig_ser2_", "fig_ser2intro", "fig_ser4"):
            assert any(n.startswith(fig) for n in names)

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ValidationError):
            job_from_dict({"command": "sigma", "model": "laplacian", "colour": 1}, tmp_path)

    def test_job_subcommand(self, tmp_path):
        out = tmp_path / "chiral.json"
        assert main(["job", "fig_ser2_chiral", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["certificate"]["W_plus"] == 1

    def test_job_file_relative_model(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps(
            {"L": 1, "R": [[[1, 0]]], "V": [[[0, 0]]], "T": [[[1, 0]]]}))
        (tmp_path / "j.json").write_text(json.dumps(
            {"command": "finite", "model": "m.json", "N": 5, "output": "o.csv"}))
        assert main(["job", str(tmp_path / "j.json")]) == 0
        assert len((tmp_path / "o.csv").read_text().splitlines()) == 6


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "toeplitz_spectra.cli", "sigma", "--model",
                        "laplacian", "--n", "16"], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.splitlines()[0] == "re,im,k,band"
