import pytest

from subsym import FormatError, ParseError, corpus, is_zero, load_path, loads, to_text
from subsym.corpus import UnknownEntry

IDS = corpus.list_ids()


@pytest.mark.parametrize("id_", IDS)
def test_entry_reverifies(id_):
    bad = [f"{o.expectation} | got {o.actual}" for o in corpus.verify_entry(id_) if not o.ok]
    assert not bad


@pytest.mark.parametrize("id_", IDS)
def test_entry_has_expectations(id_):
    e = corpus.load(id_)
    assert e.id == id_ and e.expectations


@pytest.mark.parametrize("id_", IDS)
def test_printed_equations_reparse(id_):
    e = corpus.load(id_)
    for eq in e.system.equations:
        assert is_zero(e.ctx.parse(to_text(eq)) - eq)
    for fluxes in e.laws.values():
        for F in fluxes:
            assert is_zero(e.ctx.parse(to_text(F)) - F)


def test_unknown_id():
    with pytest.raises(UnknownEntry):
        corpus.text("no-such-system")


def test_load_path(tmp_path):
    p = tmp_path / "heat.subsym"
    p.write_text(corpus.text("heat"))
    e = load_path(p)
    assert e.id == "heat" and len(e.system) == 2


MINIMAL = """format subsym/1
[system]
id = tiny
[vars]
x t
[deps]
u
[equations]
D1 = u_t - u*u_x
[fields]
X = point xi=[1, 0] eta=[0]
[expect]
symmetry X -> holds
"""


def test_minimal_file():
    e = loads(MINIMAL)
    assert [o.ok for o in corpus.verify_entry(e)] == [True]


@pytest.mark.parametrize("text,fragment", [
    (MINIMAL.replace("subsym/1", "subsym/9"), "unsupported format"),
    (MINIMAL.replace("[fields]", "[bogus]"), "unknown section"),
    (MINIMAL.replace("[vars]\nx t\n", ""), "required"),
    (MINIMAL.replace("D1 = u_t - u*u_x", "D1 = u_t - (u"), "equation D1"),
    (MINIMAL.replace("D1 = u_t - u*u_x", "D1 = u_t - w"), "equation D1"),
    (MINIMAL.replace("symmetry X -> holds", "symmetry X holds"), "kind args -> verdict"),
    ("x = 1\n" + MINIMAL, "before the first section"),
])
def test_format_errors(text, fragment):
    with pytest.raises(FormatError) as exc:
        loads(text, source="t.subsym")
    assert fragment in str(exc.value)
    assert isinstance(exc.value, ParseError)


def test_error_carries_line():
    with pytest.raises(FormatError) as exc:
        loads(MINIMAL.replace("D1 = u_t - u*u_x", "D1 = u_t - (u"), source="t.subsym")
    assert exc.value.line == 9 and str(exc.value).startswith("t.subsym:9:")
