"""Regressor/instrument matrices and effect contrasts.

Column blocks are always laid out in the same order:

* ``q1``: ``(B, B*D, B*Z, B*D*Z)`` -- regressors of the first outcome CRF
* ``q2``: ``(B, B*D, B*M, B*D*Z)`` -- regressors of the second outcome CRF
* ``p``:  identical to ``q1`` (instruments for ``q2``)

For the exogenous-mediator baseline, ``q2`` is instead ``(X, X*D, X*M, X*D*M)``
fitted by OLS, and its contrast ``g2`` weights the ``X*D*M`` block by the mean
of ``X*M`` among treated units.

where ``B`` is either the covariate matrix ``X`` or the power basis
``(1, s, s^2, ..., s^J)`` of the probit index ``s = X'theta``.  The contrast
``g = (0, mean(B), 0, mean(B*Z))`` picks the average effect of ``D`` out of a
coefficient vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyCell


def _binary(v, name: str) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional")
    if not np.all((v == 0) | (v == 1)):
        raise ValueError(f"{name} must contain only 0/1 values")
    return v.astype(float)


@dataclass(frozen=True)
class Dataset:
    """Observed data ``(Y, D, M, Z, X)``; ``x[:, 0]`` must be the constant 1."""

    y: np.ndarray
    d: np.ndarray
    m: np.ndarray
    z: np.ndarray
    x: np.ndarray
    x_names: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1:
            raise DimensionMismatch("y must be one-dimensional")
        n = y.shape[0]
        d = _binary(self.d, "d")
        m = _binary(self.m, "m")
        z = _binary(self.z, "z")
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        for name, arr in (("d", d), ("m", m), ("z", z), ("x", x)):
            if arr.shape[0] != n:
                raise DimensionMismatch(f"{name} has {arr.shape[0]} rows, expected {n}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("y and x must be finite (no missing values)")
        if not np.all(x[:, 0] == 1.0):
            raise ValueError("the first covariate column must be the intercept (all ones)")
        names = tuple(self.x_names) or ("const",) + tuple(f"x{j}" for j in range(1, x.shape[1]))
        if len(names) != x.shape[1]:
            raise DimensionMismatch(f"{len(names)} covariate names for {x.shape[1]} columns")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_names", names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def with_y(self, y) -> "Dataset":
        return Dataset(y, self.d, self.m, self.z, self.x, self.x_names, dict(self.meta))


@dataclass(frozen=True)
class DesignSet:
    q1: np.ndarray
    q2: np.ndarray
    p: np.ndarray
    g: np.ndarray
    labels: tuple[str, ...]
    q2_labels: tuple[str, ...] = ()
    g2: np.ndarray | None = None

    @property
    def block_size(self) -> int:
        return self.g.shape[0] // 4

    @property
    def direct_contrast(self) -> np.ndarray:
        return self.g if self.g2 is None else self.g2


def check_cells(data: Dataset) -> None:
    """Raise :class:`EmptyCell` unless all four ``(D, Z)`` cells are occupied."""
    for dv in (0.0, 1.0):
        for zv in (0.0, 1.0):
            if not np.any((data.d == dv) & (data.z == zv)):
                raise EmptyCell(f"no observations with D={int(dv)}, Z={int(zv)}")


def _assemble(base: np.ndarray, data: Dataset, names) -> DesignSet:
    d = data.d[:, None]
    z = data.z[:, None]
    m = data.m[:, None]
    bd = base * d
    bdz = bd * z
    q1 = np.hstack([base, bd, base * z, bdz])
    q2 = np.hstack([base, bd, base * m, bdz])
    k = base.shape[1]
    g = np.concatenate([np.zeros(k), base.mean(axis=0), np.zeros(k), (base * z).mean(axis=0)])
    labels = tuple(f"{nm}{sfx}" for sfx in ("", "*D", "*Z", "*D*Z") for nm in names)
    q2_labels = tuple(f"{nm}{sfx}" for sfx in ("", "*D", "*M", "*D*Z") for nm in names)
    return DesignSet(q1=q1, q2=q2, p=q1, g=g, labels=labels, q2_labels=q2_labels)


def build_covariate_designs(data: Dataset) -> DesignSet:
    """Designs with every unknown function of X approximated linearly in X."""
    check_cells(data)
    return _assemble(data.x, data, data.x_names)


def score_basis(x: np.ndarray, theta: np.ndarray, j: int) -> np.ndarray:
    """Power basis ``(1, s, ..., s^j)`` of the index ``s = x @ theta``."""
    s = np.asarray(x, dtype=float) @ np.asarray(theta, dtype=float)
    return np.vander(s, j + 1, increasing=True)


def build_score_designs(data: Dataset, theta, j: int = 2) -> DesignSet:
    """Designs with the unknown functions approximated by powers of ``X'theta``."""
    if j not in (1, 2, 3):
        raise ValueError(f"polynomial order must be 1, 2 or 3, got {j}")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != data.x.shape[1]:
        raise DimensionMismatch(
            f"theta has length {theta.shape[0]}, expected {data.x.shape[1]}"
        )
    check_cells(data)
    base = score_basis(data.x, theta, j)
    names = ["1"] + [f"s^{p}" if p > 1 else "s" for p in range(1, j + 1)]
    return _assemble(base, data, names)


def build_exogenous_designs(data: Dataset) -> DesignSet:
    """Designs for the baseline that treats ``M`` as exogenous.

    ``q2`` holds ``(X, X*D, X*M, X*D*M)`` and is its own instrument; the direct
    effect is ``mean(X)'g_d + mean(X*M | D=1)'g_dm``, i.e. the interaction is
    averaged over the treated mediator distribution.
    """
    check_cells(data)
    ds = _assemble(data.x, data, data.x_names)
    x = data.x
    d = data.d[:, None]
    m = data.m[:, None]
    q2 = np.hstack([x, x * d, x * m, x * d * m])
    k = x.shape[1]
    treated = data.d == 1
    g2 = np.concatenate([np.zeros(k), x.mean(axis=0), np.zeros(k), (x * m)[treated].mean(axis=0)])
    names = data.x_names
    q2_labels = tuple(f"{nm}{sfx}" for sfx in ("", "*D", "*M", "*D*M") for nm in names)
    return DesignSet(q1=ds.q1, q2=q2, p=q2, g=ds.g, labels=ds.labels, q2_labels=q2_labels, g2=g2)
