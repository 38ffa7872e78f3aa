"""Mapper and test driver: the platoon seen as a Mealy machine over an
abstract alphabet.

Abstract inputs are concretized to a held leader acceleration and a duration
in sampling periods.  Each sampled valuation is abstracted to a distance
range label, or to the reverse label when the leader drives backwards.
Violation labels latch until the next reset.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass, field
from types import MappingProxyType

from . import plant
from .config import ConfigError, read_kv, shipped_path, take
from .mealy import UnknownSymbolError


class NondeterminismError(RuntimeError):
    """The system answered the same query in two different ways."""


@dataclass(frozen=True)
class AbstractAlphabet:
    inputs: tuple
    conc: MappingProxyType
    reverse_output: str
    distance_outputs: tuple
    distance_bounds: tuple
    violations: frozenset

    def __post_init__(self):
        object.__setattr__(self, "conc", MappingProxyType(dict(self.conc)))
        if set(self.conc) != set(self.inputs):
            raise ConfigError("conc must define exactly the abstract inputs")
        for sym, (_, steps) in self.conc.items():
            if steps < 1:
                raise ConfigError(f"conc.{sym}: duration must be >= 1")
        if len(self.distance_bounds) != len(self.distance_outputs) - 1:
            raise ConfigError("need one distance bound fewer than distance outputs")
        if list(self.distance_bounds) != sorted(self.distance_bounds):
            raise ConfigError("distance bounds must ascend")
        if not self.violations <= set(self.outputs):
            raise ConfigError("violations must be abstract outputs")
        if len(set(self.outputs)) != len(self.outputs):
            raise ConfigError("duplicate abstract outputs")

    @property
    def outputs(self) -> tuple:
        return (self.reverse_output,) + tuple(self.distance_outputs)

    @property
    def crash_output(self) -> str:
        return self.distance_outputs[0]

    @property
    def crash_threshold(self) -> float:
        return self.distance_bounds[0]

    def classify_distance(self, d: float) -> str:
        return self.distance_outputs[bisect_right(self.distance_bounds, d)]

    @classmethod
    def from_file(cls, path) -> "AbstractAlphabet":
        values = read_kv(path)
        src = str(path)
        inputs = tuple(take(values, "inputs", str, src).split())
        conc = {}
        for sym in inputs:
            parts = take(values, f"conc.{sym}", str, src).split()
            if len(parts) != 2:
                raise ConfigError(f"{src}: conc.{sym} needs '<acc> <steps>'")
            conc[sym] = (float(parts[0]), int(parts[1]))
        alphabet = cls(
            inputs=inputs,
            conc=conc,
            reverse_output=take(values, "reverse_output", str, src),
            distance_outputs=tuple(take(values, "distance_outputs", str, src).split()),
            distance_bounds=tuple(float(x) for x in take(values, "distance_bounds", str, src).split()),
            violations=frozenset(take(values, "violations", str, src).split()),
        )
        if values:
            raise ConfigError(f"{src}: unknown keys {sorted(values)}")
        return alphabet

    @classmethod
    def default(cls) -> "AbstractAlphabet":
        return cls.from_file(shipped_path("alphabet.cfg"))


@dataclass
class MapperState:
    latched_violation: str | None = None


def abstract_output(sample: plant.SampleRecord, alphabet: AbstractAlphabet, state: MapperState) -> str:
    if state.latched_violation is not None:
        return state.latched_violation
    if sample.v_l < 0:
        out = alphabet.reverse_output
    else:
        out = alphabet.classify_distance(sample.d)
    if out in alphabet.violations:
        state.latched_violation = out
    return out


class QueryCache:
    """Prefix tree of abstract queries.

    A query is answered only when its whole input sequence is stored.
    Inserting an answer that contradicts a stored one raises
    :class:`NondeterminismError`.
    """

    def __init__(self):
        self._root: dict = {}
        self.size = 0

    def lookup(self, seq):
        node = self._root
        out = []
        for a in seq:
            entry = node.get(a)
            if entry is None:
                return None
            out.append(entry[0])
            node = entry[1]
        return tuple(out)

    def insert(self, seq, outputs) -> None:
        node = self._root
        for k, (a, o) in enumerate(zip(seq, outputs)):
            entry = node.get(a)
            if entry is None:
                entry = node[a] = [o, {}]
                self.size += 1
            elif entry[0] != o:
                raise NondeterminismError(
                    f"query {list(seq[:k + 1])} answered {entry[0]!r} before, now {o!r}"
                )
            node = entry[1]


@dataclass
class ConcreteTrace:
    inputs: tuple
    outputs: tuple
    records: list
    # index into ``inputs`` of the abstract symbol governing each record
    symbol_of_record: list
    final_state: plant.PlantState
    curve_seed: int = 0

    @property
    def steps(self) -> int:
        return len(self.records)


def _check_symbols(seq, alphabet: AbstractAlphabet) -> None:
    for a in seq:
        if a not in alphabet.conc:
            raise UnknownSymbolError(f"unknown abstract input {a!r}")


def run_concrete(seq, cfg: plant.PlantConfig, alphabet: AbstractAlphabet, full: bool = True) -> ConcreteTrace:
    """Reset and replay ``seq`` on the plant, sampling every period.

    With ``full=False`` the plant stops once a violation latches; the
    remaining abstract outputs are forced by the latch anyway.
    """
    seq = tuple(seq)
    _check_symbols(seq, alphabet)
    seed = plant.curve_seed_for(cfg, " ".join(seq))
    state = plant.reset(cfg, seed)
    mapper = MapperState()
    records, owner, outputs = [], [], []
    for k, a in enumerate(seq):
        if not full and mapper.latched_violation is not None:
            outputs.append(mapper.latched_violation)
            continue
        acc, steps = alphabet.conc[a]
        for _ in range(steps):
            state, rec = plant.step_control(state, cfg, acc, 1)
            records.append(rec)
            owner.append(k)
        outputs.append(abstract_output(records[-1], alphabet, mapper))
    return ConcreteTrace(seq, tuple(outputs), records, owner, state, seed)


def execute_abstract(seq, cfg: plant.PlantConfig, alphabet: AbstractAlphabet, cache: QueryCache | None = None) -> tuple:
    """Abstract output sequence of the platoon for ``seq``."""
    seq = tuple(seq)
    _check_symbols(seq, alphabet)
    if cache is not None:
        hit = cache.lookup(seq)
        if hit is not None:
            return hit
    outputs = run_concrete(seq, cfg, alphabet, full=False).outputs
    if cache is not None:
        cache.insert(seq, outputs)
    return outputs


@dataclass
class PlatoonSUL:
    """The platoon behind its mapper, answering abstract queries.

    ``executions`` counts queries that actually ran the plant; cache hits
    are counted separately in ``cache_hits``.
    """

    cfg: plant.PlantConfig
    alphabet: AbstractAlphabet
    use_cache: bool = True
    executions: int = 0
    cache_hits: int = 0
    cache: QueryCache | None = field(default=None)

    def __post_init__(self):
        if self.use_cache and self.cache is None:
            self.cache = QueryCache()

    @property
    def inputs(self) -> tuple:
        return self.alphabet.inputs

    @property
    def outputs(self) -> tuple:
        return self.alphabet.outputs

    @property
    def violations(self) -> frozenset:
        return self.alphabet.violations

    def is_cached(self, seq) -> bool:
        return self.cache is not None and self.cache.lookup(tuple(seq)) is not None

    def query(self, seq) -> tuple:
        seq = tuple(seq)
        _check_symbols(seq, self.alphabet)
        if self.cache is not None:
            hit = self.cache.lookup(seq)
            if hit is not None:
                self.cache_hits += 1
                return hit
        self.executions += 1
        return execute_abstract(seq, self.cfg, self.alphabet, self.cache)

    def trace(self, seq) -> ConcreteTrace:
        return run_concrete(seq, self.cfg, self.alphabet, full=True)


TRACE_LOG_HEADER = ("test_id",) + plant.TRACE_HEADER + ("abstract_in", "abstract_out")


def write_trace_log(path, traces) -> None:
    """All traces in one CSV; each row also names its abstract input/output."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_LOG_HEADER)
        for tid, tr in enumerate(traces):
            for rec, k in zip(tr.records, tr.symbol_of_record):
                w.writerow([tid, rec.t, repr(rec.acc_cmd), repr(rec.delta), repr(rec.v_l),
                            repr(rec.v_f), repr(rec.d), tr.inputs[k], tr.outputs[k]])
