import math

import pytest

from kmoment.core.errors import ProblemFileError
from kmoment.core.parser import load_frame, load_problem, load_scp, locate_lines, parse_alpha

MALFORMED = """{
  "nvars": 1,
  "moments": [
    {"index": [0], "value": 1.0},
    {"index": [-1], "value": 0.5}
  ]
}
"""


class TestShippedExamples:
    def test_partial_problem(self, examples_dir):
        problem = load_problem(examples_dir / "two_atoms_partial.json")
        assert len(problem.gamma) == 4
        assert problem.gamma[(3,)] == 0.5
        assert problem.monomials == problem.gamma.support
        assert problem.options == {"depth": 2}
        assert problem.constraints == []

    def test_constraints(self, examples_dir):
        problem = load_problem(examples_dir / "delta2_outside.json")
        (g,) = problem.constraints
        assert g.name == "1-X"
        assert g.g((0.25,)) == pytest.approx(0.75)

    def test_two_variable_problem(self, examples_dir):
        problem = load_problem(examples_dir / "three_atoms_2d.json")
        assert problem.gamma.nvars == 2
        assert len(problem.constraints) == 4

    def test_weight_diagram(self, examples_dir):
        problem = load_scp(examples_dir / "scp_omega1.json")
        assert problem.kmax == 2
        assert problem.weights.alpha[(0, 0)] == 0.5
        assert problem.weights.beta[(0, 1)] == pytest.approx(math.sqrt(0.5))

    def test_frame(self, examples_dir):
        problem = load_frame(examples_dir / "frame_half.json")
        assert [len(level) for level in problem.levels] == [3, 5, 7]


class TestLocatedErrors:
    def test_locate_lines(self):
        lines = locate_lines(MALFORMED)
        assert lines[("nvars",)] == 2
        assert lines[("moments", 1, "index")] == 5
        assert lines[("moments", 1, "value")] == 5

    def test_negative_exponent(self, write_json):
        with pytest.raises(ProblemFileError) as info:
            load_problem(write_json("bad.json", MALFORMED))
        assert info.value.line == 5
        assert info.value.field == "moments.1.index"
        assert "line 5" in str(info.value)

    def test_wrong_arity(self, write_json):
        path = write_json("bad.json", MALFORMED.replace("[-1]", "[1, 0]"))
        with pytest.raises(ProblemFileError) as info:
            load_problem(path)
        assert info.value.line == 5
        assert "expected 1" in str(info.value)

    def test_duplicate_moment(self, write_json):
        path = write_json("dup.json", MALFORMED.replace("[-1]", "[0]"))
        with pytest.raises(ProblemFileError) as info:
            load_problem(path)
        assert info.value.field == "moments.1.index"
        assert "duplicate" in str(info.value)

    def test_missing_total_mass(self, write_json):
        path = write_json("nomass.json", {"nvars": 1, "moments": [{"index": [1], "value": 0.5}]})
        with pytest.raises(ProblemFileError) as info:
            load_problem(path)
        assert info.value.field == "moments"

    def test_unknown_option(self, write_json):
        path = write_json(
            "opt.json",
            {"nvars": 1, "moments": [{"index": [0], "value": 1.0}], "options": {"colour": "red"}},
        )
        with pytest.raises(ProblemFileError) as info:
            load_problem(path)
        assert info.value.field == "options.colour"

    def test_invalid_option_value(self, write_json):
        path = write_json(
            "opt.json",
            {"nvars": 1, "moments": [{"index": [0], "value": 1.0}], "options": {"depth": -1}},
        )
        with pytest.raises(ProblemFileError) as info:
            load_problem(path)
        assert info.value.field == "options.depth"

    def test_unknown_top_level_key(self, write_json):
        path = write_json("extra.json", {"nvars": 1, "moments": [{"index": [0], "value": 1.0}], "sigma": 1})
        with pytest.raises(ProblemFileError) as info:
            load_problem(path)
        assert info.value.field == "sigma"

    def test_monomials_without_moments(self, write_json):
        path = write_json(
            "mono.json",
            {"nvars": 1, "moments": [{"index": [0], "value": 1.0}], "monomials": [[0], [1]]},
        )
        with pytest.raises(ProblemFileError) as info:
            load_problem(path)
        assert info.value.field == "monomials"

    def test_invalid_json(self, write_json):
        path = write_json("broken.json", '{\n  "nvars": 1,\n  "moments": [1,,]\n}\n')
        with pytest.raises(ProblemFileError) as info:
            load_problem(path)
        assert info.value.line == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ProblemFileError):
            load_problem(tmp_path / "absent.json")

    def test_duplicate_weight(self, write_json):
        record = {"direction": "alpha", "k1": 0, "k2": 0, "weight": 0.5}
        path = write_json("w.json", {"weights": [record, record]})
        with pytest.raises(ProblemFileError) as info:
            load_scp(path)
        assert info.value.field == "weights.1"

    def test_weight_out_of_range(self, write_json):
        path = write_json("w.json", {"weights": [{"direction": "alpha", "k1": 0, "k2": 0, "weight": 1.5}]})
        with pytest.raises(ProblemFileError) as info:
            load_scp(path)
        assert info.value.field == "weights.0.weight"


class TestParseAlpha:
    @pytest.mark.parametrize("text, expected", [("3", (3,)), ("1,1", (1, 1)), (" 2, 0 ", (2, 0))])
    def test_valid(self, text, expected):
        assert parse_alpha(text) == expected

    @pytest.mark.parametrize("text", ["", "a", "1,-1", "1.5"])
    def test_invalid(self, text):
        with pytest.raises(ProblemFileError):
            parse_alpha(text)
