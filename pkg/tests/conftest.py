import numpy as np
import pandas as pd
import pytest

from endomed.simulation import SimulationDesign, generate_replication, replication_stream

ACCEPTANCE_LINES: list[str] = []


def pytest_addoption(parser):
    parser.addoption(
        "--star-csv",
        default=None,
        help="CSV extract of the class-size experiment (enables the empirical acceptance check)",
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def star_csv(request):
    path = request.config.getoption("--star-csv")
    if path is None:
        pytest.skip("no --star-csv supplied")
    return path


def sim_draw(outcome="continuous", mediator="endogenous", n=4000, seed=123, index=0):
    design = SimulationDesign(outcome, mediator, n=n, reps=1, seed=seed)
    return generate_replication(design, replication_stream(seed, index))


@pytest.fixture
def endo_draw():
    return sim_draw()


def fake_scores_frame(n=800, seed=0) -> pd.DataFrame:
    """Synthetic pupil-level table in the default column layout."""
    rng = np.random.default_rng(seed)
    small = (rng.random(n) < 0.33).astype(int)
    blk = (rng.random(n) < 0.23).astype(int)
    boy = (rng.random(n) < 0.5).astype(int)
    lunch = (rng.random(n) < 0.35 + 0.2 * blk).astype(int)
    expi = rng.integers(0, 39, n)
    ability = rng.standard_normal(n)
    y1 = np.round(1088 + 60 * ability - 30 * lunch - 25 * blk + 15 * small + 50 * rng.standard_normal(n))
    y2 = np.round(1195 + 0.6 * (y1 - 1088) + 30 * ability + 12 * small + 45 * rng.standard_normal(n))
    y3 = np.round(1255 + 0.5 * (y2 - 1195) + 20 * ability + 10 * small + 0.5 * expi + 40 * rng.standard_normal(n))
    return pd.DataFrame(
        {"y3": y3, "y2": y2, "y1": y1, "small": small, "blk": blk, "boy": boy, "expi": expi, "lunch": lunch}
    )


@pytest.fixture
def scores_csv(tmp_path):
    path = tmp_path / "scores.csv"
    fake_scores_frame().to_csv(path, index=False)
    return path
