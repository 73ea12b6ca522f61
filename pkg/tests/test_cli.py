"""Tests for the CLI utility."""

import json

from typer.testing import CliRunner

import kacbench
import kacbench.cli
import kacbench.config as c
from kacbench.cli import app
from kacbench.errors import InternalConsistencyError
from kacbench.experiment import EXPERIMENT_SCHEMA_FILE, Command, example_file
from kacbench.util import ExitCode

runner = CliRunner()


def test_helpers(testutils, test_config):
    """Check the trivial stuff."""
    save_conf = test_config  # the commands load their own settings

    res = runner.invoke(app, ["version"]).stdout.strip()
    assert res == kacbench.__version__

    file = open(c.DEF_CONFIG_FILE, "r").read()
    assert runner.invoke(app, "default-conf").stdout == file

    schema = json.loads(runner.invoke(app, "schema").stdout)
    assert schema == json.load(open(kacbench.pkg_res(EXPERIMENT_SCHEMA_FILE)))

    res = runner.invoke(app, ["example", "census"])
    assert res.exit_code == 0
    assert res.stdout == open(example_file(Command.CENSUS)).read()
    assert runner.invoke(app, ["example", "nonsense"]).exit_code != 0

    c._conf = save_conf


def test_run_exit_codes(testutils, test_config, tmp_path):
    save_conf = test_config
    testutils.reset_conf()
    settings = ["--settings", str(c.DEF_CONFIG_FILE), "--quiet"]

    out = tmp_path / "out"
    args = ["run", "--config", str(example_file(Command.KAC_FUNCTION)), "--out", str(out)]
    res = runner.invoke(app, args + settings)
    assert res.exit_code == 0
    assert "pass: " in res.stdout
    report = json.loads((out / "kac-function.json").read_text())
    assert report["body"]["status"] == "pass"
    assert report["header"]["version"] == kacbench.__version__

    abstain = tmp_path / "abstain.toml"
    abstain.write_text('command = "voronoi-cells"\n[params]\nhits = [[2, 0], [0, 2]]\n')
    res = runner.invoke(app, ["run", "--config", str(abstain), "--out", str(out)] + settings)
    assert res.exit_code == 3
    assert "abstain: " in res.stdout

    fail = tmp_path / "fail.toml"
    fail.write_text(
        'command = "relation-check"\n[params]\n'
        'classes = [[0, 1]]\nmasses = ["1/3", "2/3"]\ntau = [0, 1]\n'
    )
    res = runner.invoke(app, ["run", "--config", str(fail), "--out", str(out)] + settings)
    assert res.exit_code == 1

    invalid = tmp_path / "invalid.toml"
    invalid.write_text('command = "census"\n[system]\nkind = "finite"\ncyclic = 0\n')
    res = runner.invoke(app, ["run", "--config", str(invalid), "--out", str(out)] + settings)
    assert res.exit_code == 2

    missing = tmp_path / "missing.toml"
    res = runner.invoke(app, ["run", "--config", str(missing)] + settings)
    assert res.exit_code == 2

    # a target outside of the system is rejected while running
    bad_target = tmp_path / "bad_target.toml"
    bad_target.write_text(
        'command = "verify-kac"\n[system]\nkind = "finite"\ncyclic = 3\n[params]\ntarget = [7]\n'
    )
    res = runner.invoke(app, ["run", "--config", str(bad_target), "--out", str(out)] + settings)
    assert res.exit_code == 2

    args = ["run", "--config", str(example_file(Command.VERIFY_KAC)), "--out", str(out)]
    res = runner.invoke(app, args + ["--samples", "1"] + settings)
    assert res.exit_code == 2

    testutils.reset_conf()
    c._conf = save_conf


def test_run_internal_error_exit_code(testutils, test_config, tmp_path, monkeypatch):
    """A broken internal invariant is not reported as a failed verdict."""
    save_conf = test_config

    def broken(*args, **kwargs):
        raise InternalConsistencyError("tau(0) is not reachable from 0")

    monkeypatch.setattr(kacbench.cli, "run_experiment", broken)
    args = ["run", "--config", str(example_file(Command.RELATION_CHECK))]
    args += ["--out", str(tmp_path), "--settings", str(c.DEF_CONFIG_FILE), "--quiet"]
    res = runner.invoke(app, args)
    assert res.exit_code == ExitCode.INTERNAL == 4
    assert res.exit_code not in (ExitCode.PASS, ExitCode.FAIL, ExitCode.ABSTAIN)

    testutils.reset_conf()
    c._conf = save_conf
