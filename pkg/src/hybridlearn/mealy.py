"""Deterministic Mealy machines: execution, path search, equivalence, I/O."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

Symbol = Hashable


class UnknownSymbolError(ValueError):
    pass


class AlphabetMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Observation:
    input_seq: tuple
    output_seq: tuple

    def __post_init__(self):
        if len(self.input_seq) != len(self.output_seq):
            raise ValueError("observation input and output lengths differ")


@dataclass(frozen=True)
class MealyMachine:
    """Mealy machine over dense state indices ``0..n_states-1``.

    ``delta[q][k]`` and ``lam[q][k]`` give the successor state and the
    output symbol for state ``q`` and input ``inputs[k]``.
    """

    inputs: tuple
    outputs: tuple
    delta: tuple
    lam: tuple
    initial: int = 0

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "delta", tuple(tuple(row) for row in self.delta))
        object.__setattr__(self, "lam", tuple(tuple(row) for row in self.lam))
        if len(set(self.inputs)) != len(self.inputs):
            raise ValueError("duplicate input symbols")
        if len(set(self.outputs)) != len(self.outputs):
            raise ValueError("duplicate output symbols")
        n = len(self.delta)
        if n == 0 or len(self.lam) != n:
            raise ValueError("delta and lam must cover the same nonempty state set")
        if not 0 <= self.initial < n:
            raise ValueError(f"initial state {self.initial} out of range")
        known = set(self.outputs)
        for q in range(n):
            if len(self.delta[q]) != len(self.inputs) or len(self.lam[q]) != len(self.inputs):
                raise ValueError(f"state {q}: transition table is not total")
            for target in self.delta[q]:
                if not 0 <= target < n:
                    raise ValueError(f"state {q}: target {target} out of range")
            for o in self.lam[q]:
                if o not in known:
                    raise ValueError(f"state {q}: output {o!r} not in output alphabet")
        object.__setattr__(self, "_index", {a: k for k, a in enumerate(self.inputs)})

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def input_index(self, symbol) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise UnknownSymbolError(f"unknown input symbol {symbol!r}") from None

    def step(self, state: int, symbol) -> tuple[int, Symbol]:
        k = self.input_index(symbol)
        return self.delta[state][k], self.lam[state][k]

    def state_after(self, seq: Sequence, start: Optional[int] = None) -> int:
        q = self.initial if start is None else start
        for a in seq:
            q = self.delta[q][self.input_index(a)]
        return q

    def outputs_from(self, start: int, seq: Sequence) -> tuple:
        q = start
        out = []
        for a in seq:
            k = self.input_index(a)
            out.append(self.lam[q][k])
            q = self.delta[q][k]
        return tuple(out)

    def transitions(self):
        """Yield ``(q, input, target, output)`` in state-major, alphabet order."""
        for q in range(self.n_states):
            for k, a in enumerate(self.inputs):
                yield q, a, self.delta[q][k], self.lam[q][k]


def run(m: MealyMachine, pi_i: Sequence) -> Observation:
    pi_i = tuple(pi_i)
    return Observation(pi_i, m.outputs_from(m.initial, pi_i))


def _bfs(m: MealyMachine, start: int, is_goal_edge) -> Optional[list]:
    # Parent pointers give the shortest path; alphabet order in the inner
    # loop makes the first one found the tie-break winner.
    parent = {start: None}
    queue = deque([start])
    while queue:
        q = queue.popleft()
        for k, a in enumerate(m.inputs):
            target = m.delta[q][k]
            if is_goal_edge(q, k, target):
                path = [a]
                node = q
                while parent[node] is not None:
                    node, sym = parent[node]
                    path.append(sym)
                path.reverse()
                return path
            if target not in parent:
                parent[target] = (q, a)
                queue.append(target)
    return None


def path_to_state(m: MealyMachine, source: int, target: int) -> Optional[list]:
    """Shortest input sequence driving ``m`` from ``source`` to ``target``.

    Returns ``None`` when ``target`` is unreachable.
    """
    if source == target:
        return []
    return _bfs(m, source, lambda q, k, t: t == target)


def path_to_label(m: MealyMachine, source: int, label) -> Optional[list]:
    """Shortest input sequence from ``source`` whose last output is ``label``."""
    return _bfs(m, source, lambda q, k, t: m.lam[q][k] == label)


def equivalent(m1: MealyMachine, m2: MealyMachine) -> Optional[list]:
    """Return ``None`` if the machines are observation equivalent, otherwise a
    shortest separating input sequence (product-machine BFS)."""
    if m1.inputs != m2.inputs:
        raise AlphabetMismatchError("machines have different input alphabets")
    start = (m1.initial, m2.initial)
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        p, q = node
        for k, a in enumerate(m1.inputs):
            if m1.lam[p][k] != m2.lam[q][k]:
                path = [a]
                cur = node
                while parent[cur] is not None:
                    cur, sym = parent[cur]
                    path.append(sym)
                path.reverse()
                return path
            nxt = (m1.delta[p][k], m2.delta[q][k])
            if nxt not in parent:
                parent[nxt] = (node, a)
                queue.append(nxt)
    return None


def reachable_states(m: MealyMachine, start: Optional[int] = None) -> set:
    start = m.initial if start is None else start
    seen = {start}
    queue = deque([start])
    while queue:
        q = queue.popleft()
        for t in m.delta[q]:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def random_machine(rng, n_states: int, inputs: Sequence, outputs: Sequence) -> MealyMachine:
    """Uniformly random total machine; ``rng`` is a numpy Generator."""
    n_i, n_o = len(inputs), len(outputs)
    delta = rng.integers(0, n_states, size=(n_states, n_i)).tolist()
    lam = [[outputs[j] for j in row] for row in rng.integers(0, n_o, size=(n_states, n_i)).tolist()]
    return MealyMachine(tuple(inputs), tuple(outputs), delta, lam, 0)


def _quote(s) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(m: MealyMachine, name: str = "mealy") -> str:
    lines = [f"digraph {name} {{", "  __start [shape=point];"]
    for q in range(m.n_states):
        lines.append(f"  q{q} [shape=circle];")
    lines.append(f"  __start -> q{m.initial};")
    for q, a, t, o in m.transitions():
        lines.append(f"  q{q} -> q{t} [label={_quote(f'{a}/{o}')}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_text(m: MealyMachine) -> str:
    """Line-oriented serialization: ``mealy |Q| |I| |O| q0``, the two
    alphabets, then one ``q i target output`` line per transition (indices)."""
    out_idx = {o: j for j, o in enumerate(m.outputs)}
    lines = [
        f"mealy {m.n_states} {len(m.inputs)} {len(m.outputs)} {m.initial}",
        "inputs " + " ".join(str(a) for a in m.inputs),
        "outputs " + " ".join(str(o) for o in m.outputs),
    ]
    for q in range(m.n_states):
        for k in range(len(m.inputs)):
            lines.append(f"{q} {k} {m.delta[q][k]} {out_idx[m.lam[q][k]]}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> MealyMachine:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0][0] != "mealy" or len(rows[0]) != 5:
        raise ValueError("missing 'mealy |Q| |I| |O| q0' header")
    n_q, n_i, n_o, q0 = (int(x) for x in rows[0][1:])
    if rows[1][0] != "inputs" or rows[2][0] != "outputs":
        raise ValueError("expected 'inputs' and 'outputs' lines after the header")
    inputs, outputs = tuple(rows[1][1:]), tuple(rows[2][1:])
    if len(inputs) != n_i or len(outputs) != n_o:
        raise ValueError("alphabet sizes disagree with header")
    delta = [[None] * n_i for _ in range(n_q)]
    lam = [[None] * n_i for _ in range(n_q)]
    body = rows[3:]
    if len(body) != n_q * n_i:
        raise ValueError(f"expected {n_q * n_i} transition lines, got {len(body)}")
    for row in body:
        q, k, t, o = (int(x) for x in row)
        delta[q][k] = t
        lam[q][k] = outputs[o]
    return MealyMachine(inputs, outputs, delta, lam, q0)
