"""Abstract test-suite generators.

All generators are pure functions of their config (seed included) and,
where relevant, the model they walk on.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .mealy import MealyMachine, path_to_label, path_to_state

STRATEGIES = ("random", "learning-based", "transition-coverage", "output-directed")


class UnreachableLabelError(ValueError):
    pass


@dataclass(frozen=True)
class StrategyConfig:
    strategy: str
    n_train: int
    l_max: int = 8
    target_label: str = "crash"
    generation_batch: int = 500
    seed: int = 0
    # random walks continue with this probability after every step and stop
    # at walk_cap_factor * |Q| steps
    continue_prob: float = 0.95
    walk_cap_factor: int = 4

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.n_train <= 0:
            raise ValueError("n_train must be positive")
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")
        if self.generation_batch < 1:
            raise ValueError("generation_batch must be >= 1")


def gen_random(cfg: StrategyConfig, inputs) -> list[list]:
    rng = np.random.default_rng(cfg.seed)
    inputs = list(inputs)
    suite = []
    for _ in range(cfg.n_train):
        length = int(rng.integers(1, cfg.l_max + 1))
        suite.append([inputs[k] for k in rng.integers(0, len(inputs), size=length)])
    return suite


def random_walk(model: MealyMachine, rng, continue_prob: float, cap: int):
    """Walk from the initial state; returns (inputs, covered transitions)."""
    q = model.initial
    n_in = len(model.inputs)
    seq, covered = [], set()
    while True:
        k = int(rng.integers(n_in))
        seq.append(model.inputs[k])
        covered.add((q, k))
        q = model.delta[q][k]
        if len(seq) >= cap or rng.random() >= continue_prob:
            return seq, covered


def select_round(candidates, covered=None):
    """Greedy max-new-coverage ordering of one generated batch.

    ``candidates`` is a list of ``(seq, transitions)``.  Candidates are
    picked by largest number of newly covered transitions, ties going to
    the earlier one; once nothing adds coverage the rest follow in
    generation order.  Returns every index, in pick order.
    """
    covered = set() if covered is None else set(covered)
    heap = [(-len(tr), i) for i, (_, tr) in enumerate(candidates)]
    heapq.heapify(heap)
    picks = []
    # gains only shrink as coverage grows, so stale heap keys are upper bounds
    while heap and heap[0][0] < 0:
        neg_stale, i = heapq.heappop(heap)
        gain = len(candidates[i][1] - covered)
        if gain == -neg_stale:
            picks.append(i)
            covered |= candidates[i][1]
        else:
            heapq.heappush(heap, (-gain, i))
    chosen = set(picks)
    picks.extend(i for i in range(len(candidates)) if i not in chosen)
    return picks


def gen_transition_coverage(cfg: StrategyConfig, model: MealyMachine) -> list[list]:
    rng = np.random.default_rng(cfg.seed)
    cap = max(1, cfg.walk_cap_factor * model.n_states)
    suite: list[list] = []
    while len(suite) < cfg.n_train:
        batch = [random_walk(model, rng, cfg.continue_prob, cap) for _ in range(cfg.generation_batch)]
        for i in select_round(batch):
            suite.append(batch[i][0])
            if len(suite) == cfg.n_train:
                break
    return suite


def gen_output_directed(cfg: StrategyConfig, model: MealyMachine) -> list[list]:
    """Random prefix, shortest path to a random state, shortest path to a
    transition emitting ``cfg.target_label``."""
    label = cfg.target_label
    if label not in model.outputs:
        raise UnreachableLabelError(f"{label!r} is not an output of the model")
    if path_to_label(model, model.initial, label) is None:
        raise UnreachableLabelError(f"no reachable transition emits {label!r}")
    rng = np.random.default_rng(cfg.seed)
    inputs = model.inputs
    suite = []
    while len(suite) < cfg.n_train:
        rand_len = int(rng.integers(0, cfg.l_max + 1))
        prefix = [inputs[k] for k in rng.integers(0, len(inputs), size=rand_len)]
        q_r = model.state_after(prefix)
        q_target = int(rng.integers(model.n_states))
        interfix = path_to_state(model, q_r, q_target)
        if interfix is None:
            continue
        suffix = path_to_label(model, q_target, label)
        if suffix is None:
            continue
        suite.append(prefix + interfix + suffix)
    return suite


def gen_learning_based(cfg: StrategyConfig, sul, eq_tests_per_round: int = 200, collision_labels=()):
    """Every test executed while learning ``sul`` with a budget of ``n_train``.

    Returns ``(suite, learn_log)``.
    """
    from .learner import LearnerBudget, Teacher, learn

    budget = LearnerBudget(
        max_total_tests=cfg.n_train,
        eq_tests_per_round=eq_tests_per_round,
        seed=cfg.seed,
        exhaust=True,
        generation_batch=cfg.generation_batch,
    )
    teacher = Teacher.testing(sul, collision_labels=collision_labels)
    _, log = learn(budget, teacher)
    return [list(seq) for seq, _ in log.queries], log


def coverage(model: MealyMachine, suite) -> set:
    covered = set()
    for seq in suite:
        q = model.initial
        for a in seq:
            k = model.input_index(a)
            covered.add((q, k))
            q = model.delta[q][k]
    return covered


def read_suite(path) -> list[list]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh if line.strip()]


def write_suite(path, suite) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in suite:
            fh.write(" ".join(seq) + "\n")
