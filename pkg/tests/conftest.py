import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary -------------------------------------------------------------

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def report(request):
    """Record one pass/fail line for an acceptance criterion, print it, and return the verdict."""
    def _report(number: int, name: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2} {name}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return _report


# -- default campaign, built once per session ----------------------------------------

# whole-run limit for simulation plus OneTNet training, and the slice kept back for evaluation
RUN_BUDGET_S = 30 * 60
EVAL_RESERVE_S = 120


class Campaign:
    """Default-config campaign: labeled returns, samples, split, and the trained OneTNet.

    Training stops at 100 epochs, on early stopping, or when the wall-clock
    budget left after building the data runs out, whichever comes first.
    """

    def __init__(self):
        import time

        from radarseg import pipeline

        t0 = time.perf_counter()
        self.cfg = cfg = pipeline.load_config()
        sim = pipeline.run_simulation(cfg)
        self.labeled, self.stats = pipeline.label_stream(
            pipeline.manual_labels(sim.returns), pipeline.sensor_tracks(sim), pipeline.target_tracks(sim),
            sim.corridors, pipeline.error_model(cfg))
        self.n_raw = len(sim.returns)
        self.X, self.y, self.starts = pipeline.encode(self.labeled, cfg)
        self.prep = pipeline.prepare(self.X, self.y, cfg)
        self.data_seconds = time.perf_counter() - t0
        self._model = self._forest = None
        self.train_seconds = None

    @property
    def model(self):
        if self._model is None:
            import time

            from radarseg import pipeline

            t0 = time.perf_counter()
            budget = RUN_BUDGET_S - EVAL_RESERVE_S - self.data_seconds
            self._model = pipeline.train_network(self.prep, self.cfg, max_seconds=budget)
            self.train_seconds = time.perf_counter() - t0
        return self._model

    @property
    def forest(self):
        if self._forest is None:
            from radarseg import pipeline

            self._forest = pipeline.train_forest(self.prep, self.cfg)
        return self._forest

    def scaled(self, X):
        return self.prep.scaler.transform(X)


@pytest.fixture(scope="session")
def campaign():
    return Campaign()
