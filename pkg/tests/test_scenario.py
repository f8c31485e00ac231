import pytest

from obstreg.errors import ParseError, ValidationError
from obstreg.scenario import apply_overrides, parse_scenario, parse_scenario_text

MINIMAL = """\
[problem]
a = 0
b = 1
A = 0
B = 1

[lagrangian]
L = v^2
mu = 2

[obstacles]
f = -10
g = 10
"""


def test_minimal(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(MINIMAL, encoding="utf-8")
    sc = parse_scenario(p)
    assert (sc.a, sc.b, sc.A, sc.B, sc.L, sc.f, sc.g) == (0, 1, 0, 1, "v^2", "-10", "10")
    assert sc.n == 2001 and sc.seed == 0
    assert len(sc.sha256) == 64
    assert sc.problem().n == 2001


def test_missing_boundary_value():
    with pytest.raises(ValidationError) as info:
        parse_scenario_text(MINIMAL.replace("B = 1\n", ""))
    assert info.value.field == "B"


def test_unknown_identifier_has_position():
    with pytest.raises(ParseError, match="unknown identifier 't'") as info:
        parse_scenario_text(MINIMAL.replace("L = v^2", "L = v^2 + t"))
    assert (info.value.line, info.value.column) == (8, 11)


def test_obstacle_may_not_use_u():
    with pytest.raises(ParseError):
        parse_scenario_text(MINIMAL.replace("f = -10", "f = u"))


def test_case_sensitive_keys():
    sc = parse_scenario_text(MINIMAL.replace("A = 0", "A = 0.25").replace("[obstacles]\nf = -10", "[obstacles]\nf = -10"))
    assert sc.A == 0.25 and sc.a == 0


@pytest.mark.parametrize("old, new, field", [
    ("mu = 2", "mu = 0", "mu"),
    ("b = 1", "b = 0", "b"),
    ("mu = 2", "mu = two", "mu"),
    ("g = 10", "g = 10\n[solver]\nn = 2", "n"),
    ("g = 10", "g = 10\n[solver]\ntol = -1", "tol"),
    ("g = 10", "g = 10\n[checks]\nladder = 11, 21", "ladder"),
    ("g = 10", "g = 10\n[checks]\ngrowth_factor = 1", "growth_factor"),
    ("g = 10", "g = 10\n[checks]\neps_ladder = 1e-3, 1e-2", "eps_ladder"),
    ("g = 10", "g = 10\n[mystery]\nx = 1", "mystery"),
    ("g = 10", "g = 10\nh = 3", "h"),
    ("g = 10", "g = 10\n[sweep]\nsolver = 1, 2", "solver"),
])
def test_validation_names_field(old, new, field):
    with pytest.raises(ValidationError) as info:
        parse_scenario_text(MINIMAL.replace(old, new))
    assert info.value.field == field


@pytest.mark.parametrize("text, line", [
    ("a = 1\n" + MINIMAL, 1),
    (MINIMAL + "not a pair\n", 14),
    (MINIMAL + "[problem]\n", 14),
])
def test_syntax_errors_have_lines(text, line):
    with pytest.raises(ParseError) as info:
        parse_scenario_text(text)
    assert info.value.line == line


def test_comments_and_checks():
    sc = parse_scenario_text(MINIMAL + """
# comment line
[checks]
a3_pairs = 50   # inline comment
thetas = 0.1, 0.2
k_grid = 0, 1, 2
a3_beyond = yes
""")
    assert sc.a3_pairs == 50 and sc.thetas == (0.1, 0.2) and sc.k_grid == (0, 1, 2) and sc.a3_beyond
    opts = sc.report_options(perturbation=0.1, jobs=2)
    assert opts.a3_pairs == 50 and opts.perturbation == 0.1 and opts.jobs == 2


def test_sweep_grid_and_overrides():
    sc = parse_scenario_text(MINIMAL + "[sweep]\ncommand = verify\nlagrangian.mu = 1, 2\nproblem.n = 11, 21, 41\n")
    assert sc.sweep_command == "verify"
    assert sc.sweep[("problem", "n")] == ["11", "21", "41"]
    changed = apply_overrides(sc, {("problem", "n"): "21", ("lagrangian", "L"): "2*v^2"})
    assert changed.n == 21 and changed.L == "2*v^2" and sc.n == 2001
    with pytest.raises(ValidationError):
        apply_overrides(sc, {("lagrangian", "mu"): "-1"})
