"""Fixed-length training sequences built from executed concrete traces.

Each sample step becomes an input ``(acc, delta')`` with ``delta'`` the
change of heading since the previous step, and a target ``(v_l, v_f, d)``.
Short traces are extended by letting the plant run on with zero leader
acceleration.  A trace in which the leader starts reversing is cut before
that step and shifted right, the gap filled with copies of the rest state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import plant
from .config import read_kv, write_kv

DATASET_HEADER = ("pair_id", "step", "acc", "dprime", "v_l", "v_f", "d", "label_crash", "crash_time")
STD_FLOOR = 1e-8


class TraceTooLongError(ValueError):
    pass


@dataclass
class RawSequencePair:
    X: np.ndarray          # (T, 2): acc, delta'
    targets: np.ndarray    # (T, 3): v_l, v_f, d
    label_crash: bool
    crash_time: int | None

    def __post_init__(self):
        if len(self.X) != len(self.targets):
            raise ValueError("inputs and targets differ in length")
        if self.label_crash != (self.crash_time is not None):
            raise ValueError("label_crash must agree with crash_time")


def _first_below(values, threshold):
    for i, v in enumerate(values):
        if v < threshold:
            return i
    return None


def build_pair(trace, T: int, cfg: plant.PlantConfig, threshold: float | None = None) -> RawSequencePair:
    threshold = cfg.truck_length if threshold is None else threshold
    records = list(trace.records)
    cut = _first_below((r.v_l for r in records), 0.0)
    if cut is not None:
        if cut > T:
            raise TraceTooLongError(f"{cut} steps before the leader reverses, T is {T}")
        rest = plant.reset(cfg, trace.curve_seed)
        pad = plant.SampleRecord(0, 0.0, rest.delta, rest.v_l, rest.v_f, rest.d)
        records = [pad] * (T - cut) + records[:cut]
    else:
        if len(records) > T:
            raise TraceTooLongError(f"trace has {len(records)} steps, T is {T}")
        state = trace.final_state
        while len(records) < T:
            state, rec = plant.step_control(state, cfg, 0.0, 1)
            records.append(rec)
    X = np.empty((T, 2))
    Y = np.empty((T, 3))
    prev_delta = records[0].delta if records else 0.0
    for i, r in enumerate(records):
        X[i, 0] = r.acc_cmd
        X[i, 1] = r.delta - prev_delta
        prev_delta = r.delta
        Y[i] = (r.v_l, r.v_f, r.d)
    t_crash = _first_below(Y[:, 2], threshold)
    return RawSequencePair(X, Y, t_crash is not None, t_crash)


def build_pairs(traces, T: int, cfg: plant.PlantConfig, threshold: float | None = None) -> list[RawSequencePair]:
    return [build_pair(tr, T, cfg, threshold) for tr in traces]


def stack(pairs):
    """``(X, targets, labels, crash_times)`` arrays for a list of pairs."""
    if not pairs:
        return np.zeros((0, 0, 2)), np.zeros((0, 0, 3)), np.zeros(0, dtype=bool), []
    X = np.stack([p.X for p in pairs])
    Y = np.stack([p.targets for p in pairs])
    labels = np.array([p.label_crash for p in pairs], dtype=bool)
    return X, Y, labels, [p.crash_time for p in pairs]


@dataclass(frozen=True)
class NormalizationStats:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    def apply_inputs(self, X):
        return (np.asarray(X) - self.x_mean) / self.x_std

    def apply_outputs(self, Y):
        return (np.asarray(Y) - self.y_mean) / self.y_std

    def invert(self, Y):
        return np.asarray(Y) * self.y_std + self.y_mean

    def to_dict(self) -> dict:
        fmt = lambda a: " ".join(repr(float(v)) for v in a)  # noqa: E731
        return {"x_mean": fmt(self.x_mean), "x_std": fmt(self.x_std),
                "y_mean": fmt(self.y_mean), "y_std": fmt(self.y_std)}

    def save(self, path) -> None:
        write_kv(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "NormalizationStats":
        v = read_kv(path)
        arr = lambda k: np.array([float(x) for x in v[k].split()])  # noqa: E731
        return cls(arr("x_mean"), arr("x_std"), arr("y_mean"), arr("y_std"))


def _mean_std(A):
    flat = A.reshape(-1, A.shape[-1])
    # sorting each column makes the sums independent of pair order
    flat = np.sort(flat, axis=0)
    mean = flat.sum(axis=0) / len(flat)
    std = np.sqrt(np.sort((flat - mean) ** 2, axis=0).sum(axis=0) / len(flat))
    return mean, np.maximum(std, STD_FLOOR)


def fit_normalize(pairs) -> NormalizationStats:
    if not pairs:
        raise ValueError("cannot fit normalization on an empty training set")
    X, Y, _, _ = stack(pairs)
    xm, xs = _mean_std(X)
    ym, ys = _mean_std(Y)
    return NormalizationStats(xm, xs, ym, ys)


def apply_normalize(pairs, stats: NormalizationStats):
    """Normalized ``(X, targets)`` arrays."""
    X, Y, _, _ = stack(pairs)
    return stats.apply_inputs(X), stats.apply_outputs(Y)


def invert(outputs, stats: NormalizationStats):
    return stats.invert(outputs)


def write_dataset(path, pairs) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(DATASET_HEADER)
        for pid, p in enumerate(pairs):
            ct = "" if p.crash_time is None else p.crash_time
            for i in range(len(p.X)):
                w.writerow([pid, i, repr(float(p.X[i, 0])), repr(float(p.X[i, 1])),
                            *(repr(float(v)) for v in p.targets[i]), int(p.label_crash), ct])


def read_dataset(path) -> list[RawSequencePair]:
    rows: dict[int, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != DATASET_HEADER:
            raise ValueError(f"{path}: unexpected dataset header {header}")
        for row in reader:
            rows.setdefault(int(row[0]), []).append(row)
    pairs = []
    for pid in sorted(rows):
        block = sorted(rows[pid], key=lambda r: int(r[1]))
        X = np.array([[float(r[2]), float(r[3])] for r in block])
        Y = np.array([[float(r[4]), float(r[5]), float(r[6])] for r in block])
        ct = block[0][8]
        pairs.append(RawSequencePair(X, Y, block[0][7] == "1", int(ct) if ct else None))
    return pairs
