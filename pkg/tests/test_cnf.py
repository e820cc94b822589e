import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trunc_ising import (
    CnfFormula,
    DimacsError,
    Literal,
    as_spin_vector,
    empty_formula,
    flippable_mask,
    flippable_set,
    formula_stats,
    is_flippable,
    parse_dimacs,
    restrict,
    satisfies,
    serialize_dimacs,
)
from trunc_ising.cnf import clause_variables, flippable_matrix, satisfies_batch


# ---------------------------------------------------------------- oracles
# straight-from-the-definition reimplementations, kept independent of the
# package internals on purpose

def clause_satisfied(clause, spins):
    return any(spins[v] == (-1 if neg else 1) for v, neg in clause)


def formula_satisfied(clauses, spins):
    return all(clause_satisfied(c, spins) for c in clauses)


def brute_flippable(clauses, spins, i):
    flipped = list(spins)
    flipped[i] = -flipped[i]
    return formula_satisfied(clauses, flipped)


def random_clauses(rng, n, num_clauses, max_width):
    clauses = []
    for _ in range(num_clauses):
        width = int(rng.integers(1, max_width + 1))
        vars_ = rng.choice(n, size=width, replace=False)
        clauses.append([(int(v), bool(rng.integers(0, 2))) for v in vars_])
    return clauses


def all_configs(n):
    return [np.array(c, dtype=np.int8) for c in itertools.product((-1, 1), repeat=n)]


# ---------------------------------------------------------------- basics

def test_literal_sign():
    assert Literal(0, False).sign == 1
    assert Literal(0, True).sign == -1


def test_as_spin_vector_validates():
    out = as_spin_vector([1, -1, 1])
    assert out.dtype == np.int8
    with pytest.raises(ValueError):
        as_spin_vector([1, 0, -1])
    with pytest.raises(ValueError):
        as_spin_vector([1, -1], num_vars=3)
    with pytest.raises(ValueError):
        as_spin_vector([[1, -1]])


def test_constructor_rejects_bad_clauses():
    with pytest.raises(ValueError, match="out of range"):
        CnfFormula(2, [[(2, False)]])
    with pytest.raises(ValueError, match="duplicate"):
        CnfFormula(2, [[(0, False), (0, True)]])
    with pytest.raises(ValueError):
        CnfFormula(-1)


def test_formula_metadata():
    f = CnfFormula(4, [[(0, False), (1, True)], [(1, False), (2, False), (3, True)]])
    assert f.num_vars == 4
    assert f.num_clauses == 2
    assert f.width_k == 3
    assert f.degree_d == 2  # variable 1 appears in both clauses
    assert f.var_to_clauses[1] == (0, 1)
    assert clause_variables(f, 1) == (1, 2, 3)
    assert formula_stats(f) == (2, 3, 2)
    assert formula_stats(empty_formula(5)) == (0, 0, 0)


def test_formula_equality_and_hash():
    a = CnfFormula(3, [[(0, False), (2, True)]])
    b = CnfFormula(3, [[(0, False), (2, True)]])
    c = CnfFormula(3, [[(0, True), (2, True)]])
    assert a == b and hash(a) == hash(b)
    assert a != c


# ---------------------------------------------------------------- dimacs

def test_parse_simple():
    f = parse_dimacs("p cnf 3 2\n1 -2 0\n2 3 0\n")
    assert f.num_vars == 3
    assert f.clauses == (
        (Literal(0, False), Literal(1, True)),
        (Literal(1, False), Literal(2, False)),
    )


def test_parse_tolerates_comments_blanks_and_multiline_clauses():
    text = "c a comment\n\np cnf 4 2\nc interior comment\n1 2\n-3 0\n4 0\n"
    f = parse_dimacs(text)
    assert f.num_clauses == 2
    assert f.clauses[0] == (Literal(0, False), Literal(1, False), Literal(2, True))


@pytest.mark.parametrize(
    "text,line,msg",
    [
        ("p cnf x 2\n1 0\n", 1, "malformed header"),
        ("p dnf 2 1\n1 0\n", 1, "malformed header"),
        ("p cnf 2 1\np cnf 2 1\n1 0\n", 2, "duplicate header"),
        ("1 0\np cnf 2 1\n", 1, "before"),
        ("p cnf 2 1\n3 0\n", 2, "out of range"),
        ("p cnf 2 1\n1 -1 0\n", 2, "duplicate variable"),
        ("p cnf 2 1\n1 0\n2 0\n", 3, "clause count mismatch"),
        ("p cnf 2 3\n1 0\n2 0\n", 3, "clause count mismatch"),
        ("p cnf 2 1\n1 2\n", 2, "unterminated"),
        ("p cnf 2 1\n1 a 0\n", 2, "invalid token"),
        ("", 1, "missing"),
        ("c only a comment\n", 1, "missing"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, msg):
    with pytest.raises(DimacsError) as exc:
        parse_dimacs(text)
    assert exc.value.line == line
    assert msg in str(exc.value)


def test_serialize_empty_formula_exact():
    assert serialize_dimacs(empty_formula(3)) == "p cnf 3 0\n"


def test_round_trip_random():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        clauses = random_clauses(rng, n, int(rng.integers(0, 6)), min(n, 4))
        f = CnfFormula(n, clauses)
        assert parse_dimacs(serialize_dimacs(f)) == f


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_round_trip_hypothesis(data):
    n = data.draw(st.integers(min_value=1, max_value=6))
    num_clauses = data.draw(st.integers(min_value=0, max_value=5))
    clauses = []
    for _ in range(num_clauses):
        width = data.draw(st.integers(min_value=1, max_value=n))
        vars_ = data.draw(
            st.lists(
                st.integers(min_value=0, max_value=n - 1),
                min_size=width, max_size=width, unique=True,
            )
        )
        clause = [(v, data.draw(st.booleans())) for v in vars_]
        clauses.append(clause)
    f = CnfFormula(n, clauses)
    assert parse_dimacs(serialize_dimacs(f)) == f


# ---------------------------------------------------------------- satisfies

def test_satisfies_matches_bruteforce():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(1, 7))
        clauses = random_clauses(rng, n, int(rng.integers(0, 6)), min(n, 3))
        f = CnfFormula(n, clauses)
        for spins in all_configs(n):
            assert satisfies(f, spins) == formula_satisfied(clauses, spins)


def test_satisfies_batch_matches_scalar():
    rng = np.random.default_rng(2)
    n = 6
    clauses = random_clauses(rng, n, 5, 3)
    f = CnfFormula(n, clauses)
    mat = np.stack(all_configs(n))
    batch = satisfies_batch(f, mat)
    for row, expected in zip(mat, batch):
        assert satisfies(f, row) == bool(expected)


def test_empty_clause_never_satisfied():
    f = CnfFormula(2, [[], [(0, False)]])
    for spins in all_configs(2):
        assert not satisfies(f, spins)
    assert not satisfies_batch(f, np.stack(all_configs(2))).any()


def test_empty_formula_always_satisfied():
    f = empty_formula(3)
    for spins in all_configs(3):
        assert satisfies(f, spins)


# ---------------------------------------------------------------- flippable

def test_is_flippable_matches_whole_formula_recheck():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(1, 7))
        clauses = random_clauses(rng, n, int(rng.integers(1, 6)), min(n, 3))
        f = CnfFormula(n, clauses)
        for spins in all_configs(n):
            if not formula_satisfied(clauses, spins):
                continue
            for i in range(n):
                assert is_flippable(f, spins, i) == brute_flippable(clauses, spins, i)


def test_is_flippable_contract_errors():
    f = CnfFormula(2, [[(0, False)], [(1, False)]])
    sat = np.array([1, 1], dtype=np.int8)
    with pytest.raises(ValueError):
        is_flippable(f, [-1, 1], 0)  # not satisfying
    with pytest.raises(IndexError):
        is_flippable(f, sat, 5)


def test_flippable_mask_set_and_matrix_agree():
    rng = np.random.default_rng(4)
    n = 6
    clauses = random_clauses(rng, n, 5, 3)
    f = CnfFormula(n, clauses)
    sat_rows = [s for s in all_configs(n) if formula_satisfied(clauses, s)]
    assert sat_rows, "fixture formula became unsatisfiable; reseed"
    mat = np.stack(sat_rows)
    fm = flippable_matrix(f, mat)
    for r, spins in enumerate(sat_rows):
        mask = flippable_mask(f, spins)
        assert (fm[r] == mask).all()
        assert flippable_set(f, spins) == set(np.flatnonzero(mask).tolist())
        for i in range(n):
            assert mask[i] == brute_flippable(clauses, spins, i)


def test_flippable_set_rejects_nonsatisfying():
    f = CnfFormula(1, [[(0, False)]])
    with pytest.raises(ValueError):
        flippable_set(f, [-1])


# ---------------------------------------------------------------- restrict

def test_restrict_matches_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(2, 7))
        clauses = random_clauses(rng, n, int(rng.integers(1, 6)), min(n, 3))
        f = CnfFormula(n, clauses)
        num_pin = int(rng.integers(1, n))
        pin_vars = rng.choice(n, size=num_pin, replace=False)
        pinned = {int(v): int(rng.choice([-1, 1])) for v in pin_vars}
        g = restrict(f, pinned)
        free = [v for v in range(n) if v not in pinned]
        assert g.num_vars == len(free)
        for sub in all_configs(len(free)):
            full = np.zeros(n, dtype=np.int8)
            for j, v in enumerate(free):
                full[v] = sub[j]
            for v, s in pinned.items():
                full[v] = s
            assert satisfies(g, sub) == satisfies(f, full)


def test_restrict_keeps_emptied_clauses():
    f = CnfFormula(2, [[(0, False), (1, False)]])
    g = restrict(f, {0: -1, 1: -1})
    assert g.num_vars == 0
    assert g.num_clauses == 1
    assert g.clauses[0] == ()


def test_restrict_validation():
    f = empty_formula(2)
    with pytest.raises(IndexError):
        restrict(f, {5: 1})
    with pytest.raises(ValueError):
        restrict(f, {0: 0})
