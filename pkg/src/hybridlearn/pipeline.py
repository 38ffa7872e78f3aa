"""Stage functions behind the command line.

Every stage reads its inputs from files and writes plain text or CSV, so
stages can be rerun independently.  Stage seeds come from the master seed
through :func:`derive_seed`:

* learning: ``derive_seed(master, "learn")``
* a training suite: ``derive_seed(master, "generate", strategy, n_train)``
* the validation suite: ``derive_seed(master, "validation")``
* training run ``k`` (shared by all strategies): ``derive_seed(master, "train", k)``
"""

from __future__ import annotations

import csv
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import dataset, evalkit, harness, learner, mealy, plant, rnn, testgen
from .config import ConfigError, read_kv, shipped_path, take, write_kv


def derive_seed(master: int, *labels) -> int:
    key = tuple(zlib.crc32(str(label).encode("utf-8")) for label in labels)
    return int(np.random.SeedSequence(master, spawn_key=key).generate_state(1, np.uint64)[0])


def _ints(s):
    return tuple(int(x) for x in s.split())


def _words(s):
    return tuple(s.split())


@dataclass(frozen=True)
class PipelineConfig:
    plant_config: str
    alphabet: str
    seed: int = 0
    learner_budget: int = 5000
    eq_tests_per_round: int = 200
    generation_batch: int = 500
    l_max: int = 8
    target_label: str = "crash"
    strategies: tuple = ("random", "output-directed")
    n_train: tuple = (100, 500)
    validation_size: int = 1000
    T: int = 64
    hidden: int = 32
    epochs: int = 100
    mode: str = "lstm"
    learning_rate: float = 1e-3
    train_runs: int = 5

    _CONV = {
        "seed": int, "learner_budget": int, "eq_tests_per_round": int, "generation_batch": int,
        "l_max": int, "target_label": str, "strategies": _words, "n_train": _ints,
        "validation_size": int, "T": int, "hidden": int, "epochs": int, "mode": str,
        "learning_rate": float, "train_runs": int,
    }

    def __post_init__(self):
        for s in self.strategies:
            if s not in testgen.STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}")
        if self.mode not in rnn.MODES:
            raise ConfigError(f"mode must be one of {rnn.MODES}")
        if self.T < 1 or self.train_runs < 1 or self.epochs < 1:
            raise ConfigError("T, train_runs and epochs must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @classmethod
    def from_file(cls, path=None) -> "PipelineConfig":
        path = shipped_path("pipeline.cfg") if path is None else os.fspath(path)
        values = read_kv(path)
        base = os.path.dirname(os.path.abspath(path))

        def resolve(p):
            if p.startswith("shipped:"):
                return shipped_path(p[len("shipped:"):])
            return p if os.path.isabs(p) else os.path.join(base, p)

        kwargs = {
            "plant_config": resolve(take(values, "plant_config", str, path)),
            "alphabet": resolve(take(values, "alphabet", str, path)),
        }
        for key, conv in cls._CONV.items():
            if key in values:
                kwargs[key] = take(values, key, conv, path)
        if values:
            raise ConfigError(f"{path}: unknown keys {sorted(values)}")
        for p in (kwargs["plant_config"], kwargs["alphabet"]):
            if not os.path.exists(p):
                raise ConfigError(f"config file not found: {p}")
        return cls(**kwargs)

    def with_seed(self, seed) -> "PipelineConfig":
        return self if seed is None else replace(self, seed=seed)

    def plant(self) -> plant.PlantConfig:
        return plant.PlantConfig.from_file(self.plant_config)

    def alphabet_def(self) -> harness.AbstractAlphabet:
        return harness.AbstractAlphabet.from_file(self.alphabet)

    def train_config(self, run: int) -> rnn.TrainConfig:
        return rnn.TrainConfig(
            learning_rate=self.learning_rate, epochs=self.epochs, hidden=self.hidden,
            mode=self.mode, seed=derive_seed(self.seed, "train", run),
        )


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- learn ------------------------------------------------------------------

def stage_learn(cfg: PipelineConfig, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    sul = harness.PlatoonSUL(cfg.plant(), cfg.alphabet_def())
    budget = learner.LearnerBudget(
        max_total_tests=cfg.learner_budget, eq_tests_per_round=cfg.eq_tests_per_round,
        seed=derive_seed(cfg.seed, "learn"), generation_batch=cfg.generation_batch,
    )
    hyp, log = learner.learn(budget, learner.Teacher.testing(sul, {cfg.target_label}))
    if hyp is None:
        raise RuntimeError("learning budget ran out before the first hypothesis")
    with open(os.path.join(out_dir, "hypothesis.txt"), "w", encoding="utf-8") as fh:
        fh.write(mealy.to_text(hyp))
    with open(os.path.join(out_dir, "hypothesis.dot"), "w", encoding="utf-8") as fh:
        fh.write(mealy.export_dot(hyp))
    log.write_csv(os.path.join(out_dir, "learnlog.csv"))
    write_kv(os.path.join(out_dir, "learn_manifest.txt"), {
        "states": hyp.n_states, "rounds": len(log.rounds), "total_tests": log.total_tests,
        "collisions": log.collisions, "violations": log.violations,
        "counterexamples": log.counterexamples, "plant_executions": sul.executions,
        "cache_hits": getattr(sul, "cache_hits", 0),
    })
    return hyp, log


def load_model(path) -> mealy.MealyMachine:
    with open(path, encoding="utf-8") as fh:
        return mealy.from_text(fh.read())


# -- generate ---------------------------------------------------------------

def generate_suite(cfg: PipelineConfig, strategy: str, n_train: int, model=None, seed=None):
    seed = derive_seed(cfg.seed, "generate", strategy, n_train) if seed is None else seed
    scfg = testgen.StrategyConfig(strategy, n_train, l_max=cfg.l_max, target_label=cfg.target_label,
                                  generation_batch=cfg.generation_batch, seed=seed)
    alphabet = cfg.alphabet_def()
    if strategy == "random":
        return testgen.gen_random(scfg, alphabet.inputs), seed
    if strategy == "learning-based":
        sul = harness.PlatoonSUL(cfg.plant(), alphabet)
        suite, _ = testgen.gen_learning_based(scfg, sul, cfg.eq_tests_per_round, {cfg.target_label})
        return suite, seed
    if model is None:
        raise ConfigError(f"strategy {strategy!r} needs a model (run 'learn' first)")
    if strategy == "transition-coverage":
        return testgen.gen_transition_coverage(scfg, model), seed
    return testgen.gen_output_directed(scfg, model), seed


def generate_validation(cfg: PipelineConfig, model, exclude=()):
    """Output-directed suite, minus any test already used for training."""
    seed = derive_seed(cfg.seed, "validation")
    suite, _ = generate_suite(cfg, "output-directed", cfg.validation_size, model, seed)
    used = {tuple(t) for t in exclude}
    kept, seen = [], set()
    for t in suite:
        key = tuple(t)
        if key in used or key in seen:
            continue
        seen.add(key)
        kept.append(t)
    return kept, seed, len(suite) - len(kept)


def suite_name(strategy: str, n_train: int) -> str:
    return f"suite_{strategy}_{n_train}.txt"


def write_suite_with_manifest(path, suite, **manifest) -> None:
    testgen.write_suite(path, suite)
    write_kv(os.path.splitext(path)[0] + ".manifest", manifest)


# -- run suite --------------------------------------------------------------

@dataclass(frozen=True)
class _RunJob:
    plant_cfg: plant.PlantConfig
    alphabet: harness.AbstractAlphabet
    test: tuple


def _run_one(job: _RunJob):
    return harness.run_concrete(job.test, job.plant_cfg, job.alphabet, full=True)


def run_suite(cfg: PipelineConfig, suite, out_dir, stem="dataset", workers=1, write_traces=True):
    """Execute every test and build the dataset; tests that do not fit in
    ``T`` steps are skipped and counted."""
    os.makedirs(out_dir, exist_ok=True)
    pcfg, alphabet = cfg.plant(), cfg.alphabet_def()
    for t in suite:
        for a in t:
            if a not in alphabet.conc:
                raise mealy.UnknownSymbolError(f"unknown abstract input {a!r} in suite")
    traces = _map(_run_one, [_RunJob(pcfg, alphabet, tuple(t)) for t in suite], workers)
    pairs, skipped = [], 0
    for tr in traces:
        try:
            pairs.append(dataset.build_pair(tr, cfg.T, pcfg, alphabet.crash_threshold))
        except dataset.TraceTooLongError:
            skipped += 1
    if write_traces:
        harness.write_trace_log(os.path.join(out_dir, f"{stem}_traces.csv"), traces)
    dataset.write_dataset(os.path.join(out_dir, f"{stem}.csv"), pairs)
    write_kv(os.path.join(out_dir, f"{stem}.manifest"), {
        "tests": len(suite), "pairs": len(pairs), "skipped_too_long": skipped,
        "crash_labels": sum(p.label_crash for p in pairs),
        "abstract_crash_tests": sum(alphabet.crash_output in tr.outputs for tr in traces),
        "T": cfg.T,
    })
    return pairs, skipped


# -- train / evaluate -------------------------------------------------------

@dataclass(frozen=True)
class _TrainJob:
    X: np.ndarray
    Y: np.ndarray
    Xv: np.ndarray
    tcfg: rnn.TrainConfig
    stats: dataset.NormalizationStats
    threshold: float


def _train_one(job: _TrainJob):
    params, curve = rnn.train(job.X, job.Y, job.tcfg)
    preds = rnn.predict_crashes(params, job.Xv, job.stats, job.threshold)
    return params, curve, preds


def train_eval(cfg: PipelineConfig, train_pairs, val_pairs, out_dir, strategy="custom",
               n_train=None, workers=1):
    """Train ``cfg.train_runs`` models and score each on the validation pairs.

    Returns ``(results rows, cdf rows, summary rows)``.
    """
    os.makedirs(out_dir, exist_ok=True)
    if not train_pairs:
        raise ValueError("no training pairs")
    if not val_pairs:
        raise ValueError("no validation pairs")
    n_train = len(train_pairs) if n_train is None else n_train
    threshold = cfg.alphabet_def().crash_threshold
    stats = dataset.fit_normalize(train_pairs)
    stats.save(os.path.join(out_dir, f"stats_{strategy}_{n_train}.txt"))
    X, Y = dataset.apply_normalize(train_pairs, stats)
    Xv, _ = dataset.apply_normalize(val_pairs, stats)
    truth = [p.label_crash for p in val_pairs]
    truth_t = [p.crash_time for p in val_pairs]
    jobs = [_TrainJob(X, Y, Xv, cfg.train_config(k), stats, threshold) for k in range(cfg.train_runs)]
    results, errors = [], []
    metrics = {"ce": [], "tpr": [], "ppv": [], "f1": []}
    for k, (params, curve, preds) in enumerate(_map(_train_one, jobs, workers)):
        tag = f"{strategy}_{n_train}_run{k}"
        rnn.save_weights(os.path.join(out_dir, f"weights_{tag}.txt"), params)
        rnn.write_loss_curve(os.path.join(out_dir, f"loss_{tag}.csv"), curve)
        s = evalkit.score(evalkit.confusion(truth, [p for p, _ in preds]))
        results.append(evalkit.results_row(strategy, n_train, k, s))
        for name in metrics:
            metrics[name].append(getattr(s, name))
        errors.extend(evalkit.crash_time_errors(
            [t if lab else None for t, lab in zip(truth_t, truth)],
            [t if pos else None for pos, t in preds],
        ))
    cdf = evalkit.cdf_rows(strategy, n_train, evalkit.cdf(errors))
    summary = []
    for name, vals in metrics.items():
        vals = [v for v in vals if v is not None]
        mean = repr(float(np.mean(vals))) if vals else ""
        std = repr(float(np.std(vals))) if vals else ""
        summary.append([strategy, n_train, name, len(vals), mean, std])
    return results, cdf, summary


SUMMARY_HEADER = ("strategy", "n_train", "metric", "runs", "mean", "std")


def write_summary(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        w.writerows(rows)


# -- report -----------------------------------------------------------------

REPORT_HEADER = ("strategy", "n_train", "runs", "ce_mean", "ce_std", "tpr_mean", "ppv_mean", "f1_mean", "f1_std")


def report(result_rows) -> list:
    """One row per (strategy, n_train) with mean and std over runs."""
    groups: dict = {}
    for row in result_rows:
        groups.setdefault((row["strategy"], int(row["n_train"])), []).append(row)

    def stat(rows, key, fn):
        vals = [float(r[key]) for r in rows if r[key] != ""]
        return f"{fn(vals):.6g}" if vals else ""

    table = []
    for (strategy, n), rows in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        table.append([strategy, n, len(rows),
                      stat(rows, "ce", np.mean), stat(rows, "ce", np.std),
                      stat(rows, "tpr", np.mean), stat(rows, "ppv", np.mean),
                      stat(rows, "f1", np.mean), stat(rows, "f1", np.std)])
    return table


def format_table(header, rows) -> str:
    cells = [list(map(str, header))] + [list(map(str, r)) for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells)


# -- everything ---------------------------------------------------------------

def run_pipeline(cfg: PipelineConfig, out_dir, workers=1, log=print):
    os.makedirs(out_dir, exist_ok=True)
    write_kv(os.path.join(out_dir, "pipeline_manifest.txt"), {
        "seed": cfg.seed, "strategies": " ".join(cfg.strategies),
        "n_train": " ".join(map(str, cfg.n_train)), "T": cfg.T, "epochs": cfg.epochs,
        "hidden": cfg.hidden, "mode": cfg.mode, "train_runs": cfg.train_runs,
        "learner_budget": cfg.learner_budget, "backend": rnn.kernels.BACKEND,
    })
    hyp, llog = stage_learn(cfg, os.path.join(out_dir, "learn"))
    log(f"learned {hyp.n_states} states in {len(llog.rounds)} rounds, {llog.total_tests} tests")

    gen_dir = os.path.join(out_dir, "suites")
    os.makedirs(gen_dir, exist_ok=True)
    suites = {}
    for strategy in cfg.strategies:
        for n in cfg.n_train:
            suite, seed = generate_suite(cfg, strategy, n, hyp)
            suites[strategy, n] = suite
            write_suite_with_manifest(os.path.join(gen_dir, suite_name(strategy, n)), suite,
                                      strategy=strategy, seed=seed, n_train=n, tests=len(suite))
    val_suite, val_seed, dropped = generate_validation(cfg, hyp, [t for s in suites.values() for t in s])
    write_suite_with_manifest(os.path.join(gen_dir, "suite_validation.txt"), val_suite,
                              strategy="output-directed", seed=val_seed, n_train=cfg.validation_size,
                              tests=len(val_suite), dropped_overlap=dropped)

    data_dir = os.path.join(out_dir, "data")
    val_pairs, _ = run_suite(cfg, val_suite, data_dir, "validation", workers)
    log(f"validation: {len(val_pairs)} pairs, {sum(p.label_crash for p in val_pairs)} crash labels")

    results, cdf, summary = [], [], []
    model_dir = os.path.join(out_dir, "models")
    for strategy in cfg.strategies:
        for n in cfg.n_train:
            pairs, _ = run_suite(cfg, suites[strategy, n], data_dir, f"train_{strategy}_{n}", workers)
            r, c, s = train_eval(cfg, pairs, val_pairs, model_dir, strategy, n, workers)
            results += r
            cdf += c
            summary += s
            log(f"{strategy} n_train={n}: {len(pairs)} pairs; " + "; ".join(
                f"{row[2]} mean {row[4]}" for row in s if row[2] in ("ce", "f1")))
    evalkit.write_results(os.path.join(out_dir, "results.csv"), results)
    evalkit.write_cdf(os.path.join(out_dir, "cdf.csv"), cdf)
    write_summary(os.path.join(out_dir, "summary.csv"), summary)
    table = report(evalkit.read_results(os.path.join(out_dir, "results.csv")))
    with open(os.path.join(out_dir, "report.csv"), "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows([REPORT_HEADER] + table)
    return table
