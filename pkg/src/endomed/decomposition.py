"""Total / direct / indirect effect decomposition with influence-value SEs."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import influence_se, influence_values, ive_fit, ols_fit, probit_fit
from .designs import (
    Dataset,
    DesignSet,
    build_covariate_designs,
    build_exogenous_designs,
    build_score_designs,
)
from .errors import DegenerateMediator, EmptyGroup

# SEs at or below this fraction of max|y| are treated as an exact fit
SE_FLOOR = 1e-12


class Method(str, enum.Enum):
    OLS_EXOG = "ols"
    IVE1 = "ive1"
    IVE2 = "ive2"
    IVE3 = "ive3"

    @classmethod
    def parse(cls, value: "Method | str") -> "Method":
        if isinstance(value, cls):
            return value
        key = str(value).strip()
        for member in cls:
            if key.lower() == member.value or key.upper() == member.name:
                return member
        raise ValueError(f"unknown method {value!r}; choose from {[m.value for m in cls]}")

    @property
    def default_j(self) -> int | None:
        return {Method.IVE2: 2, Method.IVE3: 3}.get(self)

    @property
    def uses_score(self) -> bool:
        return self in (Method.IVE2, Method.IVE3)

    @property
    def label(self) -> str:
        return "OLS" if self is Method.OLS_EXOG else self.name


ALL_METHODS = (Method.OLS_EXOG, Method.IVE1, Method.IVE2, Method.IVE3)
EFFECTS = ("total", "direct", "indirect")


@dataclass(frozen=True)
class Effect:
    estimate: float
    se: float
    t_value: float
    degenerate: bool = False

    @classmethod
    def from_influence(cls, estimate: float, lam: np.ndarray, floor: float) -> "Effect":
        se = influence_se(lam)
        if se <= floor:
            return cls(float(estimate), se, 0.0, True)
        return cls(float(estimate), se, float(estimate / se), False)


@dataclass(frozen=True)
class InfluenceBundle:
    lambda1: np.ndarray
    lambda2: np.ndarray

    @property
    def indirect(self) -> np.ndarray:
        return self.lambda1 - self.lambda2


@dataclass(frozen=True)
class EffectEstimates:
    total: Effect
    direct: Effect
    indirect: Effect
    estimator_tag: Method
    n: int
    j: int | None = None
    theta: np.ndarray | None = None
    influence: InfluenceBundle | None = None

    def __getitem__(self, effect: str) -> Effect:
        if effect not in EFFECTS:
            raise KeyError(effect)
        return getattr(self, effect)

    def as_rows(self) -> list[dict]:
        return [
            {
                "method": self.estimator_tag.value,
                "effect": name,
                "estimate": self[name].estimate,
                "se": self[name].se,
                "t_value": self[name].t_value,
            }
            for name in EFFECTS
        ]


def designs_for(data: Dataset, method: Method | str, j: int | None = None, theta=None):
    """Return ``(designs, j, theta)`` for ``method``, fitting the probit if needed."""
    method = Method.parse(method)
    if method is Method.OLS_EXOG:
        return build_exogenous_designs(data), None, None
    if not method.uses_score:
        return build_covariate_designs(data), None, None
    order = j if j is not None else method.default_j
    if theta is None:
        theta = probit_fit(data.x, data.z).theta
    return build_score_designs(data, theta, order), order, np.asarray(theta, dtype=float)


def decompose_designs(data: Dataset, ds: DesignSet, exogenous_mediator: bool = False):
    """Fit both outcome equations on prebuilt designs.

    Returns ``(total, direct, lambda1, lambda2)``.
    """
    fit1 = ols_fit(ds.q1, data.y)
    if exogenous_mediator:
        fit2 = ols_fit(ds.q2, data.y)
    else:
        fit2 = ive_fit(ds.q2, ds.p, data.y)
    g2 = ds.direct_contrast
    total = float(ds.g @ fit1.coefficients)
    direct = float(g2 @ fit2.coefficients)
    lam1 = influence_values(ds.g, fit1.cross_moment_inverse, ds.q1, fit1.residuals)
    lam2 = influence_values(g2, fit2.cross_moment_inverse, ds.p, fit2.residuals)
    if exogenous_mediator:
        lam2 = lam2 + _treated_weight_influence(data, fit2.coefficients[3 * ds.block_size :])
    return total, direct, lam1, lam2


def _treated_weight_influence(data: Dataset, slope: np.ndarray) -> np.ndarray:
    # mean(X*M | D=1) depends on the mediator, so unlike mean(X) it is not
    # held fixed; its influence enters the direct effect through the XDM slope
    treated = data.d == 1
    xm = data.x * data.m[:, None]
    w = xm[treated].mean(axis=0)
    return np.where(treated, (xm - w) @ slope, 0.0) / treated.mean()


def decompose(
    data: Dataset,
    method: Method | str = Method.IVE1,
    j: int | None = None,
    *,
    theta=None,
) -> EffectEstimates:
    """Decompose the total effect of ``D`` on ``Y`` into direct and indirect parts.

    The total effect is the contrast ``g'b`` of the OLS fit of ``y`` on ``q1``;
    the direct effect is the same contrast of the IVE fit of ``y`` on ``q2``
    instrumented by ``q1``.  ``Method.OLS_EXOG`` instead fits
    ``(X, XD, XM, XDM)`` by OLS and averages the interaction slope over the
    treated units' ``X*M``.  The indirect effect is total minus direct.

    Parameters
    ----------
    data : Dataset
    method : Method or str
        ``"ols"``, ``"ive1"``, ``"ive2"`` or ``"ive3"``.
    j : int, optional
        Polynomial order of the score basis; only used by the score methods,
        which default to 2 (IVE2) and 3 (IVE3).
    theta : array_like, optional
        Probit coefficients of ``Z`` on ``X``.  Fitted when omitted.

    Raises
    ------
    DegenerateMediator
        If ``M`` does not vary.
    SingularDesign, EmptyCell, NotConverged
        Propagated from the design builder and the fitters.
    """
    method = Method.parse(method)
    if data.m.min() == data.m.max():
        raise DegenerateMediator(f"mediator is constant ({int(data.m[0])})")
    ds, order, theta = designs_for(data, method, j, theta)
    total, direct, lam1, lam2 = decompose_designs(
        data, ds, exogenous_mediator=method is Method.OLS_EXOG
    )
    floor = SE_FLOOR * float(np.max(np.abs(data.y)))
    return EffectEstimates(
        total=Effect.from_influence(total, lam1, floor),
        direct=Effect.from_influence(direct, lam2, floor),
        indirect=Effect.from_influence(total - direct, lam1 - lam2, floor),
        estimator_tag=method,
        n=data.n,
        j=order,
        theta=theta,
        influence=InfluenceBundle(lam1, lam2),
    )


def group_mean_difference(data: Dataset) -> float:
    """``mean(y | d=1) - mean(y | d=0)``."""
    treated = data.d == 1
    if not treated.any() or treated.all():
        raise EmptyGroup("both treatment groups must be non-empty")
    return float(data.y[treated].mean() - data.y[~treated].mean())
