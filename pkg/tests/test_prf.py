import pytest

from taubisim.kernel import RelLiteral, Step
from taubisim.prf import load_script, parse_script
from taubisim.streams import ParseError

from conftest import data


def test_parse_full_script():
    s = parse_script('system "x.strm"\nassume eutt r r\'\ntheorem eutt a b\ntheorem eutt c d\n'
                     'let X = { (a,b) , (c,d) }\nproof\n  init gpaco D   # comment\n'
                     '  closure tauL { (a,b) }\n  acc X\nqed\n')
    assert s.system_path == "x.strm"
    assert s.assumptions == [("r", "r'")]
    assert s.theorem == RelLiteral((("a", "b"), ("c", "d")))
    assert s.lets["X"] == RelLiteral((("a", "b"), ("c", "d")))
    assert s.steps == [Step("init", ("gpaco", "D"), 7), Step("closure", ("tauL", RelLiteral((("a", "b"),))), 8),
                       Step("acc", ("X",), 9)]


@pytest.mark.parametrize("name", ["fig2", "fig5", "fig9", "fig10", "sec53"])
def test_packaged_scripts_parse(name):
    s = load_script(data(f"{name}.prf"))
    assert s.relation == "eutt" and s.steps


@pytest.mark.parametrize("text, line", [
    ("theorem eutt a\nproof\nqed", 1),
    ("theorem weird a b\nproof\nqed", 1),
    ("theorem eutt a b\ntheorem strong c d\nproof\nqed", 2),
    ("assume strong a b\ntheorem eutt a b\nproof\nqed", 1),
    ("theorem eutt a b\nlet X = { (a,b) }\nlet X = { (a,b) }\nproof\nqed", 3),
    ("theorem eutt a b\nlet X = { (a,b) junk }\nproof\nqed", 2),
    ("theorem eutt a b\nproof\n  init\nqed\nstep", 5),
    ("theorem eutt a b\nproof\n  init", 3),
    ("proof\nqed", 1),
    ("theorem eutt a b\nlemma foo\nproof\nqed", 2),
    ("theorem eutt a b\nproof\n  acc @\nqed", 3),
    ("system shifted\ntheorem eutt a b\nproof\nqed", 1),
])
def test_parse_errors(text, line):
    with pytest.raises(ParseError) as exc:
        parse_script(text)
    assert exc.value.line == line
