import pytest

TOY = {
    "plant_config": "shipped:plant.cfg",
    "alphabet": "shipped:alphabet.cfg",
    "seed": 3,
    "learner_budget": 1500,
    "eq_tests_per_round": 50,
    "generation_batch": 100,
    "strategies": "random output-directed",
    "n_train": 20,
    "validation_size": 30,
    "T": 64,
    "hidden": 4,
    "epochs": 2,
    "train_runs": 2,
}


@pytest.fixture
def toy_config(tmp_path):
    """Writes a small pipeline config and returns its path; keyword
    overrides replace or add keys."""

    def make(**overrides):
        values = {**TOY, **overrides}
        path = tmp_path / "toy.cfg"
        path.write_text("".join(f"{k} = {v}\n" for k, v in values.items()))
        return str(path)

    return make


ACCEPTANCE = {}
CRITERIA = {
    1: "learner exactness",
    2: "gradient fidelity",
    3: "strategy ordering",
    4: "crash enrichment",
    5: "output-directed construction",
    6: "mapper trap and length invariants",
    7: "metric oracle",
    8: "pipeline determinism",
}


@pytest.fixture
def verdict():
    """Records one acceptance line and fails the test when ``ok`` is false."""

    def record(n, ok, detail):
        ACCEPTANCE[n] = (bool(ok), detail)
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n} ({CRITERIA[n]}): {detail}"
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n} ({name}): {detail}")
        else:
            terminalreporter.write_line(f"[FAIL] criterion {n} ({name}): not reached")
