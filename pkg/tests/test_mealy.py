import itertools
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridlearn.mealy import (
    AlphabetMismatchError,
    MealyMachine,
    UnknownSymbolError,
    equivalent,
    export_dot,
    from_text,
    path_to_label,
    path_to_state,
    random_machine,
    run,
    to_text,
)

TOGGLE = MealyMachine(("a",), ("0", "1"), [[1], [0]], [["0"], ["1"]])
CONST0 = MealyMachine(("a",), ("0", "1"), [[0]], [["0"]])


def naive_outputs(m, word):
    # independent interpreter over a dict encoding of the tables
    table = {(q, a): (m.delta[q][k], m.lam[q][k]) for q in range(m.n_states) for k, a in enumerate(m.inputs)}
    q, out = m.initial, []
    for a in word:
        q, o = table[(q, a)]
        out.append(o)
    return out


def words(alphabet, max_len):
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


@st.composite
def machines(draw, max_states=8, n_in=3, n_out=3):
    n = draw(st.integers(1, max_states))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_machine(np.random.default_rng(seed), n, "abc"[:n_in], "xyz"[:n_out])


def test_toggle_run():
    assert run(TOGGLE, ["a", "a", "a"]).output_seq == ("0", "1", "0")


def test_empty_run():
    obs = run(TOGGLE, [])
    assert obs.input_seq == () and obs.output_seq == ()


def test_unknown_symbol():
    with pytest.raises(UnknownSymbolError):
        run(TOGGLE, ["b"])


def test_machine_totality_enforced():
    with pytest.raises(ValueError):
        MealyMachine(("a", "b"), ("0",), [[0]], [["0"]])
    with pytest.raises(ValueError):
        MealyMachine(("a",), ("0",), [[3]], [["0"]])
    with pytest.raises(ValueError):
        MealyMachine(("a",), ("0",), [[0]], [["zzz"]])


def test_random_machine_matches_naive_interpreter():
    rng = np.random.default_rng(11)
    m = random_machine(rng, 10, "abc", "xyz")
    for _ in range(20):
        word = [str(s) for s in rng.choice(list("abc"), size=20)]
        assert list(run(m, word).output_seq) == naive_outputs(m, word)


@settings(max_examples=60, deadline=None)
@given(machines(), st.lists(st.sampled_from("abc"), max_size=12), st.lists(st.sampled_from("abc"), max_size=12))
def test_length_and_prefix_closure(m, x, y):
    xy = run(m, x + y).output_seq
    assert len(xy) == len(x) + len(y)
    q = m.state_after(x)
    assert xy == run(m, x).output_seq + m.outputs_from(q, y)


def test_path_to_state_trivial():
    assert path_to_state(TOGGLE, 0, 0) == []
    assert path_to_state(TOGGLE, 0, 1) == ["a"]


def test_path_to_state_unreachable():
    m = MealyMachine(("a",), ("x",), [[0], [1]], [["x"], ["x"]])
    assert path_to_state(m, 0, 1) is None


def brute_force_path(m, source, goal, max_len):
    # first hit in length-then-alphabet order
    for w in words(m.inputs, max_len):
        if w and goal(m.state_after(w[:-1], source), w):
            return list(w)
    return None


@pytest.mark.parametrize("seed", range(10))
def test_path_to_state_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    m = random_machine(rng, 15, "abc", "xyz")
    for target in range(m.n_states):
        got = path_to_state(m, 0, target)
        if target == 0:
            assert got == []
            continue
        want = brute_force_path(m, 0, lambda q, w: m.state_after(w, 0) == target, 6)
        if want is None:
            assert got is None or len(got) > 6
        else:
            assert got == want
            assert m.state_after(got, 0) == target


@pytest.mark.parametrize("seed", range(10))
def test_path_to_label_matches_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    m = random_machine(rng, 12, "abc", "xyzw")
    for source in range(m.n_states):
        for label in m.outputs:
            got = path_to_label(m, source, label)
            want = brute_force_path(m, source, lambda q, w: m.outputs_from(source, w)[-1] == label, 5)
            if want is None:
                assert got is None or len(got) > 5
            else:
                assert got == want
                assert m.outputs_from(source, got)[-1] == label


def test_path_to_label_immediate_and_absent():
    m = MealyMachine(("a", "b"), ("x", "y", "z"), [[0, 0]], [["y", "x"]])
    assert path_to_label(m, 0, "y") == ["a"]
    assert path_to_label(m, 0, "x") == ["b"]
    assert path_to_label(m, 0, "z") is None


def test_tie_break_by_alphabet_order():
    # both inputs reach state 1 in one step; the first declared input wins
    m = MealyMachine(("b", "a"), ("x",), [[1, 1], [1, 1]], [["x", "x"], ["x", "x"]])
    assert path_to_state(m, 0, 1) == ["b"]


def test_equivalent_examples():
    assert equivalent(TOGGLE, TOGGLE) is None
    assert equivalent(TOGGLE, CONST0) == ["a", "a"]


def test_equivalent_alphabet_mismatch():
    other = MealyMachine(("b",), ("0",), [[0]], [["0"]])
    with pytest.raises(AlphabetMismatchError):
        equivalent(TOGGLE, other)


@pytest.mark.parametrize("seed", range(8))
def test_equivalent_matches_bounded_enumeration(seed):
    rng = np.random.default_rng(500 + seed)
    m1 = random_machine(rng, 3, "ab", "xy")
    # a copy with one output flipped, possibly unreachable
    lam = [list(r) for r in m1.lam]
    q, k = int(rng.integers(3)), int(rng.integers(2))
    lam[q][k] = "y" if lam[q][k] == "x" else "x"
    m2 = MealyMachine(m1.inputs, m1.outputs, m1.delta, lam)
    bound = m1.n_states * m2.n_states
    want = next((list(w) for w in words("ab", bound) if run(m1, w) != run(m2, w)), None)
    got = equivalent(m1, m2)
    assert (got is None) == (want is None)
    if got is not None:
        assert len(got) == len(want)


@settings(max_examples=60, deadline=None)
@given(machines(max_states=6), machines(max_states=6))
def test_equivalent_symmetric_and_separating(m1, m2):
    a, b = equivalent(m1, m2), equivalent(m2, m1)
    assert (a is None) == (b is None)
    if a is not None:
        assert len(a) == len(b)
        assert run(m1, a).output_seq != run(m2, a).output_seq


def parse_dot(text, inputs, outputs):
    edges = re.findall(r'q(\d+) -> q(\d+) \[label="([^"/]*)/([^"]*)"\]', text)
    init = int(re.search(r"__start -> q(\d+)", text).group(1))
    n = 1 + max(max(int(s), int(t)) for s, t, _, _ in edges)
    delta = [[None] * len(inputs) for _ in range(n)]
    lam = [[None] * len(inputs) for _ in range(n)]
    for s, t, a, o in edges:
        delta[int(s)][inputs.index(a)] = int(t)
        lam[int(s)][inputs.index(a)] = o
    return MealyMachine(inputs, outputs, delta, lam, init)


def test_dot_single_state():
    m = MealyMachine(("a",), ("x",), [[0]], [["x"]])
    assert 'q0 -> q0 [label="a/x"]' in export_dot(m)


def test_dot_toggle_structure():
    text = export_dot(TOGGLE)
    assert len(re.findall(r"^\s*q\d+ \[shape=circle\];", text, re.M)) == 2
    assert len(re.findall(r"q\d+ -> q\d+", text)) == 2


@settings(max_examples=30, deadline=None)
@given(machines())
def test_dot_round_trip(m):
    assert equivalent(parse_dot(export_dot(m), m.inputs, m.outputs), m) is None
    assert export_dot(m) == export_dot(m)


@settings(max_examples=30, deadline=None)
@given(machines())
def test_text_round_trip(m):
    text = to_text(m)
    assert text.splitlines()[0] == f"mealy {m.n_states} 3 3 {m.initial}"
    assert from_text(text) == m
