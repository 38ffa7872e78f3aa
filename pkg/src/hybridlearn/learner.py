"""Active learning of Mealy machines with a discrimination tree.

Kearns-Vazirani style learner: hypothesis states are the leaves of a
discrimination tree whose inner nodes hold distinguishing input suffixes and
whose edges are labelled by the output a word produces on that suffix.
Counterexamples are decomposed by binary search (Rivest-Schapire) into a
single new state and discriminator.

When the system declares violation outputs (trap labels that repeat
forever once emitted), the top of the tree tests every single input in
turn below such labels.  Words that emit a violation on every input end up
in one trap leaf, so hypotheses always map violating transitions into a
matching trap state, even when learning stops on budget.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .harness import NondeterminismError, QueryCache
from .mealy import MealyMachine, equivalent


class BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class LearnerBudget:
    max_total_tests: int
    eq_tests_per_round: int = 200
    seed: int = 0
    # keep running equivalence rounds until every test is spent
    exhaust: bool = False
    generation_batch: int = 500
    # exhaust mode gives up after this many rounds that execute nothing new
    max_idle_rounds: int = 20

    def __post_init__(self):
        if self.max_total_tests <= 0:
            raise ValueError("max_total_tests must be positive")
        if self.eq_tests_per_round <= 0:
            raise ValueError("eq_tests_per_round must be positive")


class MealySUL:
    """A known machine posing as a black box (no cache, every query runs)."""

    def __init__(self, machine: MealyMachine, violations=()):
        self.machine = machine
        self.violations = frozenset(violations)
        self.executions = 0

    @property
    def inputs(self):
        return self.machine.inputs

    @property
    def outputs(self):
        return self.machine.outputs

    def is_cached(self, seq) -> bool:
        return False

    def query(self, seq) -> tuple:
        self.executions += 1
        return self.machine.outputs_from(self.machine.initial, seq)


class QueryCounter:
    """Charges executed tests against the budget and records them in order.

    Queries answered by the system's cache are free.  Every answer is also
    checked against earlier answers for consistency.
    """

    def __init__(self, sul, limit: int, collision_labels=()):
        self.sul = sul
        self.limit = limit
        self.used = 0
        self.collisions = 0
        self.violations_seen = 0
        self.queries: list[tuple[tuple, tuple]] = []
        self._collision_labels = frozenset(collision_labels)
        self._violations = frozenset(getattr(sul, "violations", ()))
        self._seen = QueryCache()

    def query(self, seq) -> tuple:
        seq = tuple(seq)
        if self.sul.is_cached(seq):
            return self.sul.query(seq)
        if self.used >= self.limit:
            raise BudgetExhausted
        out = tuple(self.sul.query(seq))
        self.used += 1
        if len(out) != len(seq):
            raise NondeterminismError(f"answer length {len(out)} for query of length {len(seq)}")
        self._seen.insert(seq, out)
        self.queries.append((seq, out))
        if self._collision_labels.intersection(out):
            self.collisions += 1
        if self._violations.intersection(out):
            self.violations_seen += 1
        return out


class ExactOracle:
    """Equivalence by product-machine search against a known target."""

    def __init__(self, target: MealyMachine):
        self.target = target

    def __call__(self, hyp: MealyMachine, counter: QueryCounter, rng):
        return equivalent(hyp, self.target)


class TransitionCoverageOracle:
    """Approximate equivalence: run transition-coverage tests generated on
    the hypothesis and report the first one the system answers differently."""

    def __init__(self, per_round: int, generation_batch: int = 500):
        self.per_round = per_round
        self.generation_batch = generation_batch

    def __call__(self, hyp: MealyMachine, counter: QueryCounter, rng):
        from .testgen import StrategyConfig, gen_transition_coverage

        cfg = StrategyConfig(
            "transition-coverage",
            n_train=self.per_round,
            generation_batch=self.generation_batch,
            seed=int(rng.integers(2**63)),
        )
        for seq in gen_transition_coverage(cfg, hyp):
            out = counter.query(seq)
            expected = hyp.outputs_from(hyp.initial, seq)
            for k, (o, e) in enumerate(zip(out, expected)):
                if o != e:
                    return list(seq[: k + 1])
        return None


@dataclass
class Teacher:
    sul: object
    oracle: object
    collision_labels: frozenset = frozenset()

    @classmethod
    def exact(cls, target: MealyMachine) -> "Teacher":
        return cls(MealySUL(target), ExactOracle(target))

    @classmethod
    def testing(cls, sul, collision_labels=()) -> "Teacher":
        # per-round size is filled in from the budget by learn()
        return cls(sul, None, frozenset(collision_labels))


@dataclass
class LearnLog:
    rounds: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    total_tests: int = 0
    collisions: int = 0
    violations: int = 0
    counterexamples: int = 0
    converged: bool = False

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "states", "total_tests", "collisions"])
            for row in self.rounds:
                w.writerow(row)


class _Inner:
    __slots__ = ("suffix", "children", "parent", "chain")

    def __init__(self, suffix, parent, chain=None):
        self.suffix = tuple(suffix)
        self.children = {}
        self.parent = parent
        self.chain = chain


class _Leaf:
    __slots__ = ("access", "state", "parent")

    def __init__(self, access, state, parent):
        self.access = tuple(access)
        self.state = state
        self.parent = parent


class KVLearner:
    def __init__(self, inputs, query, violations=(), outputs=()):
        self.inputs = tuple(inputs)
        self.declared_outputs = tuple(outputs)
        self.query = query
        self.violations = frozenset(violations)
        self.root = _Inner((self.inputs[0],), None, chain=0)
        self.leaves: list[_Leaf] = []
        self.delta: list[list] = []
        self.lam: list[list] = []

    # -- tree ---------------------------------------------------------------
    def _key(self, word, suffix):
        return self.query(word + suffix)[-len(suffix):]

    def _child_for_new_key(self, node: _Inner, key, word):
        if (
            node.chain is not None
            and key[0] in self.violations
            and node.chain + 1 < len(self.inputs)
        ):
            child = _Inner((self.inputs[node.chain + 1],), node, chain=node.chain + 1)
        else:
            child = _Leaf(word, len(self.leaves), node)
            self.leaves.append(child)
            self.delta.append([None] * len(self.inputs))
            self.lam.append([None] * len(self.inputs))
        node.children[key] = child
        return child

    def sift(self, word, start=None) -> _Leaf:
        word = tuple(word)
        node = self.root if start is None else start
        while isinstance(node, _Inner):
            key = self._key(word, node.suffix)
            child = node.children.get(key)
            if child is None:
                child = self._child_for_new_key(node, key, word)
            node = child
        return node

    # -- hypothesis ---------------------------------------------------------
    def close(self, work=()) -> None:
        """Fill the transitions listed in ``work`` as ``(state, input index,
        sift start node)``, plus all transitions of leaves created meanwhile."""
        work = deque(work)
        n_seen = len(self.leaves)
        while work:
            q, k, start = work.popleft()
            word = self.leaves[q].access + (self.inputs[k],)
            if self.lam[q][k] is None:
                self.lam[q][k] = self.query(word)[-1]
            self.delta[q][k] = self.sift(word, start).state
            while n_seen < len(self.leaves):
                work.extend((n_seen, j, None) for j in range(len(self.inputs)))
                n_seen += 1

    def initialize(self) -> None:
        self.sift(())
        self.close((q, k, None) for q in range(len(self.leaves)) for k in range(len(self.inputs)))

    def hypothesis(self) -> MealyMachine:
        outputs = list(self.declared_outputs)
        for row in self.lam:
            for o in row:
                if o not in outputs:
                    outputs.append(o)
        return MealyMachine(self.inputs, tuple(outputs), self.delta, self.lam, 0)

    # -- counterexamples ----------------------------------------------------
    def process_counterexample(self, hyp: MealyMachine, ce) -> bool:
        """Add one state from ``ce``; returns False if ``ce`` agrees with ``hyp``."""
        ce = tuple(ce)
        sys_out = self.query(ce)
        hyp_out = hyp.outputs_from(hyp.initial, ce)
        mismatch = next((k for k, (a, b) in enumerate(zip(sys_out, hyp_out)) if a != b), None)
        if mismatch is None:
            return False
        w = ce[: mismatch + 1]
        states = [hyp.initial]
        for a in w:
            states.append(hyp.delta[states[-1]][hyp.input_index(a)])

        def agrees(i):
            if i == len(w):
                return True
            tail = w[i:]
            got = self.query(self.leaves[states[i]].access + tail)[-len(tail):]
            return got == hyp.outputs_from(states[i], tail)

        lo, hi = 0, len(w)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if agrees(mid):
                hi = mid
            else:
                lo = mid
        q, a = states[lo], w[lo]
        v = w[lo + 1:]
        if not v:
            raise NondeterminismError("counterexample decomposition found an output mismatch on a known transition")
        old = self.leaves[hyp.delta[q][hyp.input_index(a)]]
        new_word = self.leaves[q].access + (a,)
        self._split(old, new_word, v)
        return True

    def _split(self, old: _Leaf, new_word, suffix) -> None:
        parent = old.parent
        node = _Inner(suffix, parent)
        for key, child in parent.children.items():
            if child is old:
                parent.children[key] = node
                break
        old_key = self._key(old.access, node.suffix)
        new_key = self._key(new_word, node.suffix)
        if old_key == new_key:
            raise NondeterminismError("discriminator does not separate the split states")
        old.parent = node
        node.children[old_key] = old
        fresh = _Leaf(new_word, len(self.leaves), node)
        node.children[new_key] = fresh
        self.leaves.append(fresh)
        self.delta.append([None] * len(self.inputs))
        self.lam.append([None] * len(self.inputs))
        work = [(fresh.state, k, None) for k in range(len(self.inputs))]
        for q, row in enumerate(self.delta):
            for k, target in enumerate(row):
                if target == old.state:
                    row[k] = None
                    work.append((q, k, node))
        self.close(work)


def learn(budget: LearnerBudget, teacher: Teacher):
    """Learn a hypothesis of ``teacher.sul``.

    Returns ``(hypothesis, LearnLog)``.  Stops when the equivalence oracle
    finds no counterexample (unless ``budget.exhaust``) or when the test
    budget runs out; the hypothesis is the last one completed, or ``None``
    if the budget ran out before the first.
    """
    counter = QueryCounter(teacher.sul, budget.max_total_tests, teacher.collision_labels)
    oracle = teacher.oracle or TransitionCoverageOracle(budget.eq_tests_per_round, budget.generation_batch)
    rng = np.random.default_rng(budget.seed)
    kv = KVLearner(
        teacher.sul.inputs,
        counter.query,
        getattr(teacher.sul, "violations", ()),
        getattr(teacher.sul, "outputs", ()),
    )
    log = LearnLog()
    hyp = None

    def find_counterexample(hyp):
        idle = 0
        while True:
            before = counter.used
            ce = oracle(hyp, counter, rng)
            if ce is not None or not budget.exhaust:
                return ce
            idle = idle + 1 if counter.used == before else 0
            if idle >= budget.max_idle_rounds:
                return None

    try:
        kv.initialize()
        hyp = kv.hypothesis()
        while True:
            log.rounds.append((len(log.rounds) + 1, hyp.n_states, counter.used, counter.collisions))
            ce = find_counterexample(hyp)
            if ce is None:
                log.converged = not budget.exhaust
                break
            log.counterexamples += 1
            # one counterexample may expose several missing states
            while kv.process_counterexample(hyp, ce):
                hyp = kv.hypothesis()
    except BudgetExhausted:
        pass
    log.queries = counter.queries
    log.total_tests = counter.used
    log.collisions = counter.collisions
    log.violations = counter.violations_seen
    return hyp, log


def output_query(counter: QueryCounter, seq) -> tuple:
    return counter.query(seq)
