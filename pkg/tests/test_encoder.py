import dataclasses

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from zebra_smt.encoder import (
    NoStructuredClues,
    UnsupportedClue,
    check_uniqueness,
    constant_names,
    decode_model,
    encode,
    value_code,
)
from zebra_smt.grader import grade
from zebra_smt.puzzle import Before, Category, EitherOr, Is, IsNot, Neighbor, Offset, puzzle_from_dict
from zebra_smt.smt import DefineFun, SolverOutcome, parse_lookup_table, parse_outcome, run_solver

import oracle
from conftest import fixture_text, requires_z3


def test_constant_names_follow_entity_category(ostriches):
    names = constant_names(ostriches)
    assert names[("Kermit", "Place")] == "Kermit_Place"
    assert len(set(names.values())) == len(names) == 8


def test_constant_name_collisions_get_suffixes():
    p = puzzle_from_dict(
        {
            "id": "clash",
            "categories": [
                {"name": "Who", "kind": "nominal", "values": ["x y", "x?y"]},
                {"name": "Pos", "kind": "ordinal", "values": ["1", "2"]},
            ],
            "clues": ["none"],
            "structured_clues": [],
            "solution": {"anchor": "Who", "rows": {"x y": {"Pos": "1"}, "x?y": {"Pos": "2"}}},
        }
    )
    names = constant_names(p)
    assert names[("x y", "Pos")] == "x_y_Pos"
    assert names[("x?y", "Pos")] == "x_y_Pos_2"


def test_encode_is_deterministic_and_in_house_style(ostriches):
    a, b = encode(ostriches), encode(ostriches)
    assert a.text == b.text
    assert a.provenance == "reference-encoder"
    assert a.text.startswith("(set-logic QF_LIA)")
    assert "(declare-const Bridget_Place Int)" in a.text
    assert a.text.count("(assert (distinct") == 2
    assert a.text.rstrip().endswith("(check-sat)\n(get-model)")


def test_every_nominal_category_has_a_lookup_line(dataset):
    for p in dataset:
        table_lines = [l for l in encode(p).text.splitlines() if l.startswith("; ") and " is " in l and ":" in l]
        nominal = [c for c in p.attributes if c.kind == "nominal"]
        assert len(table_lines) == len(nominal), p.id


def test_clue_shapes(houses):
    text = encode(houses).text
    # offset, neighbor and before use the documented forms
    assert "(- " in text and "(+ " in text
    assert "(or (= " in text
    assert "(xor " in text
    assert "(< " in text


def test_no_structured_clues(pets):
    bare = dataclasses.replace(pets, structured_clues=None)
    with pytest.raises(NoStructuredClues):
        encode(bare)


def test_unknown_value_is_unsupported(pets):
    bad = dataclasses.replace(pets, structured_clues=(Is("Ann", "zebra"),))
    with pytest.raises(UnsupportedClue):
        encode(bad)


def test_value_codes():
    pos = Category("Place", "ordinal", ("first", "second"))
    num = Category("Number", "nominal", ("105", "118"))
    pet = Category("Pet", "nominal", ("cat", "dog"))
    assert [value_code(pos, i) for i in range(2)] == [1, 2]
    assert [value_code(num, i) for i in range(2)] == [105, 118]
    assert [value_code(pet, i) for i in range(2)] == [1, 2]


# -- decoding ----------------------------------------------------------------


def test_decode_ostrich_model(ostriches):
    out = parse_outcome(fixture_text("ostrich_second_output.txt"))
    decoded = decode_model(out, ostriches)
    assert len(decoded) == 8 and decoded.issues == []
    got = {(a.entity, a.category): a for a in decoded}
    assert got[("Kermit", "Place")].position == 1
    assert got[("Kermit", "Number")].value == "118"


def test_decode_reports_unmapped_code(ostriches):
    out = parse_outcome(fixture_text("ostrich_second_output.txt"))
    out.model = [DefineFun(f.name, f.sort, 999) if f.name == "Kermit_Number" else f for f in out.model]
    decoded = decode_model(out, ostriches)
    assert len(decoded) == 7
    assert [(i.name, i.kind) for i in decoded.issues] == [("Kermit_Number", "unmapped-code")]


def test_decode_reports_unknown_name(ostriches):
    out = SolverOutcome("sat", model=[DefineFun("mystery", "Int", 1), DefineFun("Kermit_Place", "Int", 1)])
    decoded = decode_model(out, ostriches)
    assert len(decoded) == 1
    assert decoded.issues[0].kind == "unknown-name"


def test_decode_empty_model(ostriches):
    assert len(decode_model(SolverOutcome("sat"), ostriches)) == 0


def test_decode_houses_sample_uses_lookup_and_abbreviations(houses):
    raw = fixture_text("houses_sample_model.txt")
    out = parse_outcome("sat\n(\n" + raw + ")\n")
    out.lookup_comments = [l for l in raw.splitlines() if l.startswith(";")]
    assert parse_lookup_table(raw) == {1: "Brazilian", 2: "German", 3: "American"}
    got = {(a.entity, a.category): a.value for a in decode_model(out, houses)}
    assert got[("House 2", "Nationality")] == "American"
    assert got[("House 1", "Animal")] == "Cats"


# -- solving -----------------------------------------------------------------


def _zero_clue_puzzle():
    return puzzle_from_dict(
        {
            "id": "free",
            "categories": [
                {"name": "Who", "kind": "nominal", "values": ["p", "q"]},
                {"name": "Pos", "kind": "ordinal", "values": ["1", "2"]},
            ],
            "clues": ["nothing is known"],
            "structured_clues": [],
            "solution": {"anchor": "Who", "rows": {"p": {"Pos": "1"}, "q": {"Pos": "2"}}},
        }
    )


@requires_z3
def test_ostrich_encoding_solves_to_printed_answer(ostriches):
    out = run_solver(encode(ostriches))
    model = {f.name: f.value for f in out.model}
    assert [model[f"{n}_Place"] for n in ("Kermit", "Ophelia", "Stretch", "Bridget")] == [1, 2, 3, 4]
    assert [model[f"{n}_Number"] for n in ("Kermit", "Ophelia", "Stretch", "Bridget")] == [118, 128, 126, 105]


@requires_z3
@pytest.mark.parametrize("pid", ["three-houses", "ostrich-race", "synthetic-pets"])
def test_fixture_round_trip_scores_one(dataset, pid):
    p = next(q for q in dataset if q.id == pid)
    script = encode(p)
    out = run_solver(script)
    assert out.status == "sat" and not out.errors
    assert decode_model(out, p, script.text).issues == []
    assert grade(out, script, p).partial_score == 1
    assert check_uniqueness(p, out) == "unique"


@requires_z3
def test_zero_clue_puzzle_is_sat_but_not_unique():
    p = _zero_clue_puzzle()
    out = run_solver(encode(p))
    assert out.status == "sat" and len(out.model) == 2
    assert check_uniqueness(p, out) == "not-unique"


@requires_z3
def test_fully_pinned_puzzle_is_unique():
    p = dataclasses.replace(_zero_clue_puzzle(), structured_clues=(Is("p", "1"),))
    out = run_solver(encode(p))
    assert check_uniqueness(p, out) == "unique"


# -- random puzzles against the brute-force oracle ---------------------------


@st.composite
def clued_puzzles(draw):
    n = draw(st.integers(2, 4))
    n_attrs = draw(st.integers(1, 3 if n <= 3 else 2))
    anchor_ordinal = draw(st.booleans())
    cats = [
        {"name": "Spot" if anchor_ordinal else "Person", "kind": "ordinal" if anchor_ordinal else "nominal",
         "values": [f"s{i + 1}" if anchor_ordinal else f"P{i}" for i in range(n)]},
    ]
    if not anchor_ordinal:
        cats.append({"name": "Rank", "kind": "ordinal", "values": [str(i + 1) for i in range(n)]})
    while len(cats) < n_attrs + 1:
        c = len(cats)
        numeric = draw(st.booleans())
        vals = [str(100 + 7 * i + c) for i in range(n)] if numeric else [f"c{c}v{i}" for i in range(n)]
        cats.append({"name": f"Cat{c}", "kind": "nominal", "values": vals})
    ordinal = cats[0] if anchor_ordinal else cats[1]
    perms = {c["name"]: draw(st.permutations(range(n))) for c in cats[1:]}
    rows = {
        cats[0]["values"][e]: {c["name"]: c["values"][perms[c["name"]][e]] for c in cats[1:]} for e in range(n)
    }
    raw = {"id": "rand", "categories": cats, "clues": ["generated"], "structured_clues": [],
           "solution": {"anchor": cats[0]["name"], "rows": rows}}
    base = puzzle_from_dict(raw)
    grid = {c.name: [c.index(rows[e][c.name]) for e in base.anchor.values] for c in base.attributes}

    values = [v for c in cats for v in c["values"]]
    ordinal_name = ordinal["name"]
    clue_st = st.one_of(
        st.builds(Is, st.sampled_from(values), st.sampled_from(values)),
        st.builds(IsNot, st.sampled_from(values), st.sampled_from(values)),
        st.builds(EitherOr, st.sampled_from(values), st.sampled_from(values), st.sampled_from(values)),
        st.builds(Offset, st.sampled_from(values), st.sampled_from(values), st.just(ordinal_name),
                  st.integers(-(n - 1), n - 1).filter(bool)),
        st.builds(Neighbor, st.sampled_from(values), st.sampled_from(values), st.just(ordinal_name)),
        st.builds(Before, st.sampled_from(values), st.sampled_from(values), st.just(ordinal_name)),
    )
    clues = []
    for candidate in draw(st.lists(clue_st, max_size=8)):
        try:
            trial = dataclasses.replace(base, structured_clues=(candidate,))
            refs = [trial.resolve_value(r) for r in _refs(candidate)]
        except KeyError:
            continue
        if len({(c.name, i) for c, i in refs}) != len(refs):
            continue
        if oracle._holds(trial, grid, candidate):
            clues.append(candidate)
    return dataclasses.replace(base, structured_clues=tuple(clues))


def _refs(clue):
    return [clue.a, clue.b, clue.c] if isinstance(clue, EitherOr) else [clue.a, clue.b]


@requires_z3
@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(clued_puzzles())
def test_encoder_agrees_with_brute_force(p):
    solutions = oracle.brute_force_solutions(p)
    assert solutions, "generated clues hold under the key, so it is a solution"
    script = encode(p)
    out = run_solver(script)
    assert out.status == "sat" and not out.errors
    decoded = decode_model(out, p, script.text)
    assert decoded.issues == []
    found = {}
    for a in decoded:
        found.setdefault(a.entity, {})[a.category] = a.value
    assert found in solutions
    expected = "unique" if len(solutions) == 1 else "not-unique"
    assert check_uniqueness(p, out) == expected
