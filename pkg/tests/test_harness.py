import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridlearn import harness, plant
from hybridlearn.mealy import UnknownSymbolError

CFG = plant.PlantConfig.default()
AB = harness.AbstractAlphabet.default()
PINNED_CRASH = ["fast-acc", "fast-acc", "wait", "wait"]
LONG_CRASH = ["fast-acc"] * 6 + ["hard-brake"] * 6 + ["wait"]


def rec(v_l, d):
    return plant.SampleRecord(0, 0.0, 0.0, v_l, 0.0, d)


def test_shipped_alphabet():
    assert AB.inputs == ("fast-acc", "slow-acc", "const", "wait", "brake", "hard-brake")
    assert dict(AB.conc) == {
        "fast-acc": (1.5, 2), "slow-acc": (0.7, 2), "const": (0.0, 2),
        "wait": (0.0, 8), "brake": (-0.7, 2), "hard-brake": (-1.5, 2),
    }
    assert AB.outputs == ("reverse", "crash", "danger", "very-close", "close", "nominal", "far", "very-far")
    assert AB.violations == {"reverse", "crash"}
    assert AB.crash_threshold == 0.43


def test_abstraction_examples():
    assert harness.abstract_output(rec(-0.01, 5.0), AB, harness.MapperState()) == "reverse"
    assert harness.abstract_output(rec(0.5, 0.40), AB, harness.MapperState()) == "crash"
    latched = harness.MapperState("crash")
    assert harness.abstract_output(rec(1.0, 2.0), AB, latched) == "crash"


def test_distance_ranges():
    edges = (-1.0,) + AB.distance_bounds + (10.0,)
    for i, out in enumerate(AB.distance_outputs):
        mid = 0.5 * (edges[i] + edges[i + 1])
        assert AB.classify_distance(mid) == out
    assert AB.classify_distance(0.4299999) == "crash"
    assert AB.classify_distance(0.43) == "danger"


def test_latching_happens_only_for_violations():
    state = harness.MapperState()
    assert harness.abstract_output(rec(0.1, 0.5), AB, state) == "danger"
    assert state.latched_violation is None
    harness.abstract_output(rec(-0.1, 0.5), AB, state)
    assert state.latched_violation == "reverse"


def test_empty_query():
    assert harness.execute_abstract([], CFG, AB) == ()


def test_const_from_reset_is_d0_class():
    assert harness.execute_abstract(["const"], CFG, AB) == (AB.classify_distance(CFG.initial_distance),)
    nominal = plant.with_overrides(CFG, initial_distance=1.4)
    assert harness.execute_abstract(["const"], nominal, AB) == ("nominal",)


@pytest.mark.parametrize("seq", [PINNED_CRASH, LONG_CRASH])
def test_pinned_crash_sequences(seq):
    out = harness.execute_abstract(seq, CFG, AB)
    assert "crash" in out
    first = out.index("crash")
    assert all(o == "crash" for o in out[first:])
    assert out[-1] == "crash"


def test_every_output_reachable():
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(3000):
        seq = [AB.inputs[k] for k in rng.integers(0, 6, size=int(rng.integers(1, 9)))]
        seen.update(harness.execute_abstract(seq, CFG, AB))
    assert seen == set(AB.outputs)


def test_unknown_symbol():
    with pytest.raises(UnknownSymbolError):
        harness.execute_abstract(["fly"], CFG, AB)


abstract_words = st.lists(st.sampled_from(AB.inputs), max_size=10)


@settings(max_examples=60, deadline=None)
@given(abstract_words, abstract_words)
def test_prefix_consistency_and_trap(s, t):
    a = harness.execute_abstract(s, CFG, AB)
    b = harness.execute_abstract(s + t, CFG, AB)
    assert len(b) == len(s) + len(t)
    assert b[: len(s)] == a
    for i, o in enumerate(b):
        if o in AB.violations:
            assert set(b[i:]) == {o}


def test_cache_transparency_and_accounting():
    rng = np.random.default_rng(3)
    queries = [[AB.inputs[k] for k in rng.integers(0, 6, size=int(rng.integers(0, 7)))] for _ in range(300)]
    queries += queries[:50]
    cached = harness.PlatoonSUL(CFG, AB, use_cache=True)
    plain = harness.PlatoonSUL(CFG, AB, use_cache=False)
    for q in queries:
        assert cached.query(q) == plain.query(q)
    assert plain.executions == len(queries)
    assert cached.executions + cached.cache_hits == len(queries)
    assert cached.cache_hits >= 50


def test_cache_whole_query_only():
    cache = harness.QueryCache()
    cache.insert(("a", "b"), ("x", "y"))
    assert cache.lookup(("a",)) == ("x",)
    assert cache.lookup(("a", "b")) == ("x", "y")
    assert cache.lookup(("a", "b", "c")) is None
    assert cache.lookup(()) == ()
    with pytest.raises(harness.NondeterminismError):
        cache.insert(("a", "c", "d"), ("z", "y", "y"))


def test_full_trace_keeps_running_after_latch():
    tr = harness.run_concrete(["brake", "wait"], CFG, AB, full=True)
    assert tr.outputs == ("reverse", "reverse")
    assert tr.steps == 2 + 8
    short = harness.run_concrete(["brake", "wait"], CFG, AB, full=False)
    assert short.outputs == tr.outputs and short.steps == 2


def test_trace_log(tmp_path):
    traces = [harness.run_concrete(s, CFG, AB) for s in (["const"], ["fast-acc", "wait"])]
    path = tmp_path / "traces.csv"
    harness.write_trace_log(path, traces)
    lines = path.read_text().splitlines()
    assert lines[0] == "test_id,t_ms,acc,delta,v_l,v_f,d,abstract_in,abstract_out"
    assert len(lines) == 1 + 2 + 10
    assert lines[-1].split(",")[-2:] == ["wait", traces[1].outputs[1]]
