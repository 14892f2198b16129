"""Monte Carlo harness: potential-outcome DGP, true effects, replication loop, reports.

Every replication slot ``r`` draws from its own stream
``SeedSequence(seed, spawn_key=(r, attempt))``, so a report depends only on
``(design, seed)`` and never on how replications are spread over workers.
A replication whose estimators hit a singular matrix (or a failed probit) is
discarded and redrawn with ``attempt + 1``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .core import probit_fit
from .decomposition import ALL_METHODS, EFFECTS, Method, decompose
from .designs import Dataset
from .errors import DataError, EstimationError, ExcessiveRedraws

CONTINUOUS, BINARY = "continuous", "binary"
EXOGENOUS, ENDOGENOUS = "exogenous", "endogenous"

_ALIASES = {
    "cont": CONTINUOUS, "continuous": CONTINUOUS, "bin": BINARY, "binary": BINARY,
    "exo": EXOGENOUS, "exogenous": EXOGENOUS, "endo": ENDOGENOUS, "endogenous": ENDOGENOUS,
}

# widest design: 4 blocks of (1, s, s^2, s^3)
_MAX_COLUMNS = 16


@dataclass(frozen=True)
class SimulationDesign:
    outcome_form: str = CONTINUOUS
    mediator_mode: str = ENDOGENOUS
    n: int = 4000
    reps: int = 1000
    seed: int = 0
    # instrument equation
    theta_1: float = 0.0
    theta_x: float = 1.0
    # mediator equation
    alpha_1: float = 0.0
    alpha_d: float = 1.0
    alpha_z: float = 1.0
    alpha_x: float = 1.0
    # outcome equation
    beta_0: float = 0.0
    beta_d: float = 0.5
    beta_m: float = 1.0
    beta_dm: float = 0.5
    beta_x: float = 1.0
    p_treat: float = 0.5
    methods: tuple[Method, ...] = ALL_METHODS

    def __post_init__(self):
        object.__setattr__(self, "outcome_form", _ALIASES.get(self.outcome_form, self.outcome_form))
        object.__setattr__(self, "mediator_mode", _ALIASES.get(self.mediator_mode, self.mediator_mode))
        object.__setattr__(self, "methods", tuple(Method.parse(m) for m in self.methods))
        if self.outcome_form not in (CONTINUOUS, BINARY):
            raise ValueError(f"outcome_form must be continuous or binary, got {self.outcome_form!r}")
        if self.mediator_mode not in (EXOGENOUS, ENDOGENOUS):
            raise ValueError(f"mediator_mode must be exogenous or endogenous, got {self.mediator_mode!r}")
        if self.n < 4 * _MAX_COLUMNS:
            raise ValueError(f"n must be at least {4 * _MAX_COLUMNS}, got {self.n}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not 0.0 < self.p_treat < 1.0:
            raise ValueError("p_treat must lie in (0, 1)")
        if not self.methods:
            raise ValueError("at least one method is required")

    @property
    def title(self) -> str:
        return (
            f"{self.outcome_form.capitalize()} Y, {self.mediator_mode} M, "
            f"N={self.n}, reps={self.reps}, seed={self.seed}"
        )


@dataclass(frozen=True)
class PotentialTables:
    """Per-unit potential mediators ``M^{dz}`` and potential outcomes ``Y^{dm}``."""

    m00: np.ndarray
    m01: np.ndarray
    m10: np.ndarray
    m11: np.ndarray
    y00: np.ndarray
    y01: np.ndarray
    y10: np.ndarray
    y11: np.ndarray

    @property
    def dy(self) -> np.ndarray:
        return self.y11 - self.y01 - self.y10 + self.y00

    @property
    def dm(self) -> np.ndarray:
        return self.m11 - self.m01 - self.m10 + self.m00

    def mediator(self, d, z) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        z = np.asarray(z, dtype=float)
        return (
            (1 - d) * (1 - z) * self.m00 + (1 - d) * z * self.m01
            + d * (1 - z) * self.m10 + d * z * self.m11
        )

    def outcome(self, d, m) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        m = np.asarray(m, dtype=float)
        return (
            (1 - d) * (1 - m) * self.y00 + (1 - d) * m * self.y01
            + d * (1 - m) * self.y10 + d * m * self.y11
        )


@dataclass(frozen=True)
class TrueEffects:
    total: float
    direct: float
    indirect: float

    def __getitem__(self, effect: str) -> float:
        return getattr(self, effect)


def realize(design: SimulationDesign, x0, e, eps, v, d) -> tuple[Dataset, PotentialTables]:
    """Build a replication from given primitive shocks.

    ``x0, e, eps, v`` are the covariate, instrument error, mediator error and
    the outcome noise; ``d`` is the treatment.  In endogenous mode the outcome
    error is ``(v + eps) / sqrt(2)``.
    """
    x0, e, eps, v = (np.asarray(a, dtype=float) for a in (x0, e, eps, v))
    d = np.asarray(d, dtype=float)
    z = (0.0 < design.theta_1 + design.theta_x * x0 + e).astype(float)

    m_index = design.alpha_1 + design.alpha_x * x0 + eps

    def pot_m(dv, zv):
        return (0.5 < m_index + design.alpha_d * dv + design.alpha_z * zv).astype(float)

    if design.mediator_mode == ENDOGENOUS:
        u = (v + eps) / math.sqrt(2.0)
    else:
        u = v
    y_index = design.beta_0 + design.beta_x * x0 + u

    def pot_y(dv, mv):
        ystar = y_index + design.beta_d * dv + design.beta_m * mv + design.beta_dm * dv * mv
        if design.outcome_form == BINARY:
            return (0.5 < ystar).astype(float)
        return ystar

    pot = PotentialTables(
        m00=pot_m(0, 0), m01=pot_m(0, 1), m10=pot_m(1, 0), m11=pot_m(1, 1),
        y00=pot_y(0, 0), y01=pot_y(0, 1), y10=pot_y(1, 0), y11=pot_y(1, 1),
    )
    m = pot.mediator(d, z)
    y = pot.outcome(d, m)
    x = np.column_stack([np.ones_like(x0), x0])
    return Dataset(y=y, d=d, m=m, z=z, x=x, x_names=("const", "x0")), pot


def generate_replication(
    design: SimulationDesign, rng: np.random.Generator
) -> tuple[Dataset, PotentialTables]:
    n = design.n
    x0 = rng.standard_normal(n)
    e = rng.standard_normal(n)
    eps = rng.standard_normal(n)
    v = rng.standard_normal(n)
    d = (rng.random(n) < design.p_treat).astype(float)
    return realize(design, x0, e, eps, v, d)


def true_effects(pot: PotentialTables, z) -> TrueEffects:
    """Sample-mean true effects of one replication.

    The total effect averages the Z-collected form of the decomposition; the
    direct effect averages the same expression without the two mediator
    channels; the indirect effect is the difference.
    """
    z = np.asarray(z, dtype=float)
    base = pot.y10 - pot.y00
    my = pot.y01 - pot.y00
    dy = pot.dy
    total = base + my * (pot.m10 - pot.m00) + dy * pot.m10 + z * (dy * (pot.m11 - pot.m10) + my * pot.dm)
    direct = (1 - z) * (base + dy * pot.m10) + z * (base + dy * pot.m11)
    t, dr = float(total.mean()), float(direct.mean())
    return TrueEffects(t, dr, t - dr)


def replication_stream(seed: int, index: int, attempt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, attempt)))


@dataclass(frozen=True)
class ReplicationResult:
    index: int
    attempts: int
    truth: TrueEffects
    estimates: np.ndarray  # (methods, effects)
    ses: np.ndarray


def estimate_all(data: Dataset, methods: Iterable[Method]) -> tuple[np.ndarray, np.ndarray]:
    """Point estimates and SEs of every method; the probit is fitted once."""
    methods = tuple(methods)
    theta = None
    if any(m.uses_score for m in methods):
        theta = probit_fit(data.x, data.z).theta
    est = np.empty((len(methods), len(EFFECTS)))
    ses = np.empty_like(est)
    for i, method in enumerate(methods):
        res = decompose(data, method, theta=theta if method.uses_score else None)
        for k, name in enumerate(EFFECTS):
            est[i, k] = res[name].estimate
            ses[i, k] = res[name].se
    return est, ses


def run_replication(design: SimulationDesign, index: int, max_attempts: int | None = None) -> ReplicationResult:
    """Run replication slot ``index``, redrawing on estimation failures."""
    limit = max_attempts if max_attempts is not None else 10 * design.reps + 1
    for attempt in range(limit):
        data, pot = generate_replication(design, replication_stream(design.seed, index, attempt))
        try:
            est, ses = estimate_all(data, design.methods)
        except (EstimationError, DataError):
            continue
        if not (np.all(np.isfinite(est)) and np.all(np.isfinite(ses))):
            continue
        return ReplicationResult(index, attempt + 1, true_effects(pot, data.z), est, ses)
    raise ExcessiveRedraws(f"replication {index} failed {limit} times in a row")


@dataclass(frozen=True)
class Cell:
    bias: float
    simsd: float
    rmse: float
    asysd: float
    effect: float

    def _ratio(self, v: float) -> float:
        return v / abs(self.effect) if self.effect != 0 else math.inf

    @property
    def abs_bias_ratio(self) -> float:
        return self._ratio(abs(self.bias))

    @property
    def simsd_ratio(self) -> float:
        return self._ratio(self.simsd)

    @property
    def rmse_ratio(self) -> float:
        return self._ratio(self.rmse)

    @property
    def asysd_ratio(self) -> float:
        return self._ratio(self.asysd)


@dataclass(frozen=True)
class SimulationReport:
    design: SimulationDesign
    cells: dict[tuple[Method, str], Cell]
    redraw_count: int
    true_means: dict[str, float]
    estimates: np.ndarray = field(repr=False)  # (reps, methods, effects)
    ses: np.ndarray = field(repr=False)
    truths: np.ndarray = field(repr=False)  # (reps, effects)

    def cell(self, method: Method | str, effect: str) -> Cell:
        return self.cells[(Method.parse(method), effect)]

    def rows(self) -> list[dict]:
        return [
            {
                "estimator": method.label,
                "effect": effect,
                "abs_bias_ratio": c.abs_bias_ratio,
                "simsd_ratio": c.simsd_ratio,
                "rmse_ratio": c.rmse_ratio,
                "asysd_ratio": c.asysd_ratio,
                "redraws": self.redraw_count,
            }
            for (method, effect), c in self.cells.items()
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = ["estimator", "effect", "abs_bias_ratio", "simsd_ratio", "rmse_ratio", "asysd_ratio", "redraws"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_text(self) -> str:
        short = {"total": "tot", "direct": "dir", "indirect": "ind"}
        lines = [
            self.design.title,
            "|BIAS|/|effect|, simSD/|effect| (RMSE/|effect|), AsySD/|effect|",
            "true effects (mean over reps): "
            + ", ".join(f"{k}={v:.4f}" for k, v in self.true_means.items()),
            f"redraws: {self.redraw_count}",
        ]
        for method in self.design.methods:
            lines.append(f"{method.label}")
            for effect in EFFECTS:
                c = self.cells[(method, effect)]
                lines.append(
                    f"  {short[effect]:<4}{c.abs_bias_ratio:>8.3f}{c.simsd_ratio:>8.3f}"
                    f"  ({c.rmse_ratio:.3f}){c.asysd_ratio:>8.3f}"
                )
        return "\n".join(lines) + "\n"


def summarize(design: SimulationDesign, results: list[ReplicationResult]) -> SimulationReport:
    est = np.stack([r.estimates for r in results])
    ses = np.stack([r.ses for r in results])
    truths = np.array([[r.truth[e] for e in EFFECTS] for r in results])
    mean_truth = truths.mean(axis=0)
    cells = {}
    for i, method in enumerate(design.methods):
        for k, effect in enumerate(EFFECTS):
            e = est[:, i, k]
            dev = e - mean_truth[k]
            cells[(method, effect)] = Cell(
                bias=float(e.mean() - mean_truth[k]),
                simsd=float(e.std()),
                rmse=float(np.sqrt(np.mean(dev**2))),
                asysd=float(ses[:, i, k].mean()),
                effect=float(mean_truth[k]),
            )
    redraws = sum(r.attempts - 1 for r in results)
    return SimulationReport(
        design=design,
        cells=cells,
        redraw_count=redraws,
        true_means={e: float(mean_truth[k]) for k, e in enumerate(EFFECTS)},
        estimates=est,
        ses=ses,
        truths=truths,
    )


def run_monte_carlo(
    design: SimulationDesign,
    workers: int = 1,
    progress: Callable[[int], None] | None = None,
) -> SimulationReport:
    """Run ``design.reps`` replications and aggregate them into a report."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = []
            for res in pool.map(lambda r: run_replication(design, r), range(design.reps)):
                results.append(res)
                if progress:
                    progress(len(results))
    else:
        results = []
        for r in range(design.reps):
            results.append(run_replication(design, r))
            if progress:
                progress(len(results))
    redraws = sum(r.attempts - 1 for r in results)
    if redraws > 10 * design.reps:
        raise ExcessiveRedraws(f"{redraws} redraws for {design.reps} replications")
    return summarize(design, results)


def with_overrides(design: SimulationDesign, **kwargs) -> SimulationDesign:
    return replace(design, **{k: v for k, v in kwargs.items() if v is not None})
