"""Reference two-vehicle platoon used as the black-box system under test.

The leader follows a commanded acceleration.  The follower runs a
constant-time-headway policy (desired gap ``r + h * v_f``) with a PD law on
gap error and relative speed, filtered through a first-order actuator lag.
The leader orientation is an environment signal made of piecewise-constant
yaw-rate segments; it does not feed back into the longitudinal dynamics.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, fields, replace
from functools import lru_cache

import numpy as np

from .config import ConfigError, read_kv, shipped_path, take


class AccelerationRangeError(ValueError):
    pass


@dataclass(frozen=True)
class PlantConfig:
    sample_period_ms: int
    internal_dt_ms: int
    accel_min: float
    accel_max: float
    truck_length: float
    standstill_gap: float
    headway: float
    kp: float
    kd: float
    follower_lag: float
    initial_distance: float
    curve_segment_ms: int
    curve_max_yaw_rate: float
    curve_straight_prob: float
    curve_seed: int

    def __post_init__(self):
        if not self.accel_min < 0 < self.accel_max:
            raise ConfigError("need accel_min < 0 < accel_max")
        if self.internal_dt_ms <= 0 or self.sample_period_ms <= 0:
            raise ConfigError("time steps must be positive")
        # the sample sits half a period before the next input, so the half
        # period must be a whole number of integration steps
        if self.sample_period_ms % (2 * self.internal_dt_ms):
            raise ConfigError("2 * internal_dt_ms must divide sample_period_ms")
        if self.initial_distance <= self.truck_length:
            raise ConfigError("initial_distance must exceed truck_length")
        if self.follower_lag <= 0:
            raise ConfigError("follower_lag must be positive")
        if self.headway < 0:
            raise ConfigError("headway must be non-negative")
        if self.curve_segment_ms <= 0:
            raise ConfigError("curve_segment_ms must be positive")
        if not 0.0 <= self.curve_straight_prob <= 1.0:
            raise ConfigError("curve_straight_prob must lie in [0, 1]")

    @property
    def substeps(self) -> int:
        return self.sample_period_ms // self.internal_dt_ms

    @classmethod
    def from_file(cls, path) -> "PlantConfig":
        values = read_kv(path)
        kwargs = {}
        for f in fields(cls):
            conv = int if f.type == "int" else float
            kwargs[f.name] = take(values, f.name, conv, str(path))
        if values:
            raise ConfigError(f"{path}: unknown keys {sorted(values)}")
        return cls(**kwargs)

    @classmethod
    def default(cls) -> "PlantConfig":
        return cls.from_file(shipped_path("plant.cfg"))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class PlantState:
    v_l: float
    v_f: float
    d: float
    a_f_actual: float
    delta: float
    t: int
    curve_seed: int


@dataclass(frozen=True)
class SampleRecord:
    t: int
    acc_cmd: float
    delta: float
    v_l: float
    v_f: float
    d: float


TRACE_HEADER = ("t_ms", "acc", "delta", "v_l", "v_f", "d")


def curve_seed_for(cfg: PlantConfig, test_key: str) -> int:
    """Orientation-profile seed for one test, stable across runs and processes."""
    return (cfg.curve_seed * 1_000_003 + zlib.crc32(test_key.encode("utf-8"))) % (2**63)


@lru_cache(maxsize=65536)
def _segment_yaw(seed: int, k: int, max_rate: float, straight_prob: float) -> float:
    rng = np.random.default_rng([seed, k])
    if rng.random() < straight_prob:
        return 0.0
    return float(rng.uniform(-max_rate, max_rate))


def yaw_rate(cfg: PlantConfig, seed: int, t_ms: int) -> float:
    k = t_ms // cfg.curve_segment_ms
    return _segment_yaw(seed, k, cfg.curve_max_yaw_rate, cfg.curve_straight_prob)


def reset(cfg: PlantConfig, curve_seed: int | None = None) -> PlantState:
    seed = cfg.curve_seed if curve_seed is None else curve_seed
    return PlantState(0.0, 0.0, cfg.initial_distance, 0.0, 0.0, 0, seed)


def step_control(state: PlantState, cfg: PlantConfig, acc_cmd: float, steps: int):
    """Hold ``acc_cmd`` for ``steps`` sampling periods.

    Returns the new state and the record sampled half a period before the
    end of the interval.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not cfg.accel_min <= acc_cmd <= cfg.accel_max:
        raise AccelerationRangeError(
            f"acceleration {acc_cmd} outside [{cfg.accel_min}, {cfg.accel_max}]"
        )
    dt_ms = cfg.internal_dt_ms
    dt = dt_ms / 1000.0
    n_total = steps * cfg.substeps
    n_sample = n_total - cfg.substeps // 2
    lo, hi = cfg.accel_min, cfg.accel_max
    r, h, kp, kd = cfg.standstill_gap, cfg.headway, cfg.kp, cfg.kd
    lag = dt / cfg.follower_lag

    v_l, v_f, d, a_f, delta, t = state.v_l, state.v_f, state.d, state.a_f_actual, state.delta, state.t
    seed = state.curve_seed
    record = None
    for n in range(1, n_total + 1):
        yaw = yaw_rate(cfg, seed, t)
        v_l = v_l + acc_cmd * dt
        e = d - (r + h * v_f)
        a_cmd_f = kp * e + kd * (v_l - v_f)
        if a_cmd_f < lo:
            a_cmd_f = lo
        elif a_cmd_f > hi:
            a_cmd_f = hi
        a_f = a_f + lag * (a_cmd_f - a_f)
        v_f = v_f + a_f * dt
        d = d + (v_l - v_f) * dt
        delta = delta + yaw * dt
        t += dt_ms
        if n == n_sample:
            record = SampleRecord(t, acc_cmd, delta, v_l, v_f, d)
    return PlantState(v_l, v_f, d, a_f, delta, t, seed), record


def simulate(cfg: PlantConfig, schedule, curve_seed: int | None = None):
    """Apply ``(acc, steps)`` pairs from reset; one record per sampling period."""
    state = reset(cfg, curve_seed)
    records = []
    for acc, steps in schedule:
        for _ in range(steps):
            state, rec = step_control(state, cfg, acc, 1)
            records.append(rec)
    return state, records


def write_trace_csv(path, records, extra_header=(), extra_rows=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER + tuple(extra_header))
        for i, rec in enumerate(records):
            row = [rec.t, repr(rec.acc_cmd), repr(rec.delta), repr(rec.v_l), repr(rec.v_f), repr(rec.d)]
            if extra_rows is not None:
                row.extend(extra_rows[i])
            w.writerow(row)


def with_overrides(cfg: PlantConfig, **kw) -> PlantConfig:
    return replace(cfg, **kw)
