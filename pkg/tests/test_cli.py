import pytest
from typer.testing import CliRunner

from kmoment import __version__
from kmoment.cli.main import app

from conftest import certificate_from

runner = CliRunner()


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """Keep a stray kmoment.json or KMOMENT_* variable out of the run."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("KMOMENT_VERBOSE", raising=False)
    monkeypatch.delenv("KMOMENT_DEPTH", raising=False)


def invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


def test_version():
    result = invoke("--version")
    assert result.exit_code == 0
    assert __version__ in result.output


class TestCheck:
    def test_consistency_violation(self, examples_dir):
        result = invoke("check", examples_dir / "inconsistent_hankel.json")
        assert result.exit_code == 2
        document = certificate_from(result.output)
        assert document["command"] == "check"
        assert document["result"]["passed"] is False
        assert document["result"]["consistency"]["consistent"] is False

    def test_flat_data_passes(self, examples_dir):
        result = invoke("check", examples_dir / "two_atoms.json")
        assert result.exit_code == 0
        assert certificate_from(result.output)["result"]["passed"] is True


class TestSolve:
    def test_three_atoms(self, examples_dir):
        result = invoke("solve", examples_dir / "three_atoms_2d.json")
        assert result.exit_code == 0
        document = certificate_from(result.output)
        assert document["exit_code"] == 0
        assert document["result"]["verdict"] == "Representable"
        assert len(document["result"]["atoms"]) == 3

    def test_partial_data_is_extended(self, examples_dir):
        result = invoke("solve", examples_dir / "two_atoms_partial.json")
        assert result.exit_code == 0
        document = certificate_from(result.output)
        assert document["options"]["depth"] == 2
        assert sorted(x for (x,) in document["result"]["atoms"]) == pytest.approx([0.0, 1.0], abs=1e-6)

    def test_consistency_failure(self, examples_dir):
        result = invoke("solve", examples_dir / "inconsistent_hankel.json")
        assert result.exit_code == 2
        assert certificate_from(result.output)["result"]["verdict"] == "ConsistencyFailure"

    def test_localizing_failure(self, examples_dir):
        result = invoke("solve", examples_dir / "delta2_outside.json")
        assert result.exit_code == 2
        assert certificate_from(result.output)["result"]["verdict"] == "LocalizingFailure"

    def test_cli_flag_beats_file_option(self, examples_dir):
        result = invoke("solve", examples_dir / "two_atoms_partial.json", "--depth", "3", "--seed", "5")
        options = certificate_from(result.output)["options"]
        assert options["depth"] == 3
        assert options["seed"] == 5

    def test_atoms_csv(self, examples_dir, tmp_path):
        target = tmp_path / "atoms.csv"
        result = invoke("solve", examples_dir / "two_atoms.json", "--atoms-csv", target)
        assert result.exit_code == 0
        lines = target.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0].endswith("weight")
        assert len(lines) == 3

    def test_malformed_file(self, write_json):
        path = write_json(
            "bad.json",
            '{\n  "nvars": 1,\n  "moments": [\n    {"index": [0], "value": 1.0},\n'
            '    {"index": [-1], "value": 0.5}\n  ]\n}\n',
        )
        result = invoke("solve", path)
        assert result.exit_code == 1
        assert "line 5" in result.output

    def test_missing_file(self, tmp_path):
        result = invoke("solve", tmp_path / "absent.json")
        assert result.exit_code == 1


def test_extract(examples_dir):
    result = invoke("extract", examples_dir / "two_atoms.json")
    assert result.exit_code == 0
    document = certificate_from(result.output)
    assert document["result"]["extracted"] is True
    assert document["result"]["weights"] == pytest.approx([0.5, 0.5], abs=1e-8)


class TestDominate:
    def test_odd_monomial(self):
        result = invoke("dominate", "3")
        assert result.exit_code == 0
        document = certificate_from(result.output)
        assert document["result"]["polynomial"] == "1 + 2*X^2 + X^4"
        assert document["result"]["dominated"] is True

    def test_space(self):
        result = invoke("dominate", "--space", "2", "-n", "2", "--grid", "-3,3,31")
        assert result.exit_code == 0
        assert certificate_from(result.output)["result"]["dominated"] is True

    def test_alpha_and_space_conflict(self):
        result = invoke("dominate", "2", "--space", "2")
        assert result.exit_code == 1

    def test_bad_grid(self):
        result = invoke("dominate", "2", "--grid", "1,2")
        assert result.exit_code == 1


class TestScp:
    def test_unit_weights(self, examples_dir):
        result = invoke("scp", examples_dir / "scp_ones.json")
        assert result.exit_code == 0
        document = certificate_from(result.output)
        assert document["result"]["refusal"] is None
        assert document["result"]["mismatches"] == []

    def test_square(self, examples_dir):
        result = invoke("scp", examples_dir / "scp_omega1.json")
        assert result.exit_code == 0
        assert certificate_from(result.output)["result"]["certificate"]["verdict"] == "Representable"

    def test_refused(self, write_json):
        r = 0.5 ** 0.5
        weights = [
            {"direction": "alpha", "k1": 0, "k2": 0, "weight": 0.5},
            {"direction": "beta", "k1": 0, "k2": 0, "weight": 0.5},
            {"direction": "alpha", "k1": 1, "k2": 0, "weight": r},
            {"direction": "beta", "k1": 1, "k2": 0, "weight": r},
            {"direction": "alpha", "k1": 0, "k2": 1, "weight": 0.4},
            {"direction": "beta", "k1": 0, "k2": 1, "weight": r},
        ]
        result = invoke("scp", write_json("w.json", {"weights": weights}))
        assert result.exit_code == 2
        assert certificate_from(result.output)["result"]["refusal"]["reason"] == "commutativity"


def test_frame(examples_dir):
    result = invoke("frame", examples_dir / "frame_half.json")
    assert result.exit_code == 0
    document = certificate_from(result.output)
    assert document["result"]["all_solvable"] is True
    assert document["result"]["shared_moment_max_discrepancy"] < 1e-6
