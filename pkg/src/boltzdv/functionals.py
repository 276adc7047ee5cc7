"""Weighted norms, the conserved-mode projection, level sets, and the
level-set energy functional.

Norms follow the velocity-weight convention ``<v> = (1 + |v|^2)^(1/2)``;
all integrals are phase-space cell sums (``h^3`` per velocity cell, ``dx``
per spatial cell).  The energy functional combines a supremum in time, a
velocity-Sobolev dissipation integral, and a spatially-smoothed nonlinear
term; time integrals use the trapezoid rule on stored snapshots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UsageError
from .grid import (
    Field,
    make_field,
    make_maxwellian,
    sobolev_multiplier,
    velocity_weight,
    x_sobolev_multiplier,
)

__all__ = [
    "NormSpec",
    "LevelSetSpec",
    "EnergySpec",
    "norm",
    "project_P",
    "level_set",
    "energy_functional",
]

_NORM_KINDS = ("Lpq", "Hml", "LlogL")
_SIGNS = ("plus", "minus")


@dataclass(frozen=True)
class NormSpec:
    """Selects a norm: weighted Lebesgue (``Lpq``), weighted velocity
    Sobolev (``Hml``), or the entropy-type ``LlogL``."""

    kind: str
    p: float = 2.0
    q: float = 0.0
    m: float = 0.0
    l: float = 0.0

    def __post_init__(self):
        if self.kind not in _NORM_KINDS:
            raise UsageError(f"kind must be one of {_NORM_KINDS}, "
                             f"got {self.kind!r}")
        if not self.p >= 1.0:
            raise UsageError(f"p must be >= 1, got {self.p}")


@dataclass(frozen=True)
class LevelSetSpec:
    """Threshold ``K``, weight exponent ``l`` and sign of a level set."""

    K: float
    l: float = 0.0
    sign: str = "plus"

    def __post_init__(self):
        if not self.K >= 0.0:
            raise UsageError(f"K must be >= 0, got {self.K}")
        if not self.l >= 0.0:
            raise UsageError(f"l must be >= 0, got {self.l}")
        if self.sign not in _SIGNS:
            raise UsageError(f"sign must be one of {_SIGNS}, "
                             f"got {self.sign!r}")


@dataclass(frozen=True)
class EnergySpec:
    """Parameters of the level-set energy functional.

    ``p`` is the Lebesgue exponent of the smoothed nonlinear term, ``s_dd``
    the spatial smoothing order (must satisfy ``0 < s_dd < s/(2(s+3))``),
    ``C0`` its normalizing constant, ``l`` the level-set weight exponent,
    and ``gamma``, ``s`` are copied kinetic exponents.
    """

    p: float = 1.1
    s_dd: float = 0.01
    C0: float = 1.0
    l: float = 0.0
    gamma: float = 0.0
    s: float = 0.25

    def __post_init__(self):
        if not 1.0 < self.p < 2.0:
            raise UsageError(f"p must lie in (1, 2), got {self.p}")
        if not 0.0 < self.s < 1.0:
            raise UsageError(f"s must lie in (0, 1), got {self.s}")
        cap = self.s / (2.0 * (self.s + 3.0))
        if not 0.0 < self.s_dd < cap:
            raise UsageError(
                f"s_dd must lie in (0, {cap}) for s = {self.s}, "
                f"got {self.s_dd}")
        if not self.C0 > 0.0:
            raise UsageError(f"C0 must be positive, got {self.C0}")
        if not self.l >= 0.0:
            raise UsageError(f"l must be >= 0, got {self.l}")


def norm(f: Field, spec: NormSpec) -> float:
    """Evaluate the selected norm of a field.

    ``Lpq``: ``(sum |f|^p <v>^(pq) h^3 dx)^(1/p)``.
    ``Hml``: L2 norm (same measure) of ``<v>^l`` times the order-``m``
    velocity-Sobolev multiplier of ``f``.
    ``LlogL``: ``sum |f| log(1 + |f|) h^3 dx``.
    """
    grid = f.grid
    meas = grid.cell_measure()
    if spec.kind == "Lpq":
        w = velocity_weight(grid, spec.p * spec.q)
        total = float((np.abs(f.values) ** spec.p * w).sum()) * meas
        return total ** (1.0 / spec.p)
    if spec.kind == "Hml":
        g = sobolev_multiplier(f, spec.m)
        w = velocity_weight(grid, 2.0 * spec.l)
        return math.sqrt(float((g.values ** 2 * w).sum()) * meas)
    vals = np.abs(f.values)
    return float((vals * np.log1p(vals)).sum()) * meas


def project_P(f: Field) -> Field:
    """Project onto the discrete span of the conserved modes.

    Returns ``(c_0 + sum_i c_i v_i + c_4 e(v)) mu`` with
    ``e(v) = (|v|^2 - 3)/sqrt(6)`` and coefficients ``c = integral of the
    matching polynomial against f`` over space and velocity.  The output
    does not depend on the spatial index.
    """
    grid = f.grid
    mu = make_maxwellian(grid).values[0]
    v = grid.v_nodes
    n = grid.n_v
    basis = [
        np.ones((n, n, n)),
        np.array(np.broadcast_to(v[:, None, None], (n, n, n))),
        np.array(np.broadcast_to(v[None, :, None], (n, n, n))),
        np.array(np.broadcast_to(v[None, None, :], (n, n, n))),
        (grid.v_squared - 3.0) / math.sqrt(6.0),
    ]
    meas = grid.cell_measure()
    out = np.zeros((n, n, n))
    for phi in basis:
        coeff = float((f.values * phi).sum()) * meas
        out += coeff * phi
    out *= mu
    full = np.broadcast_to(out, f.values.shape)
    return make_field(grid, np.array(full))


def level_set(f: Field, spec: LevelSetSpec) -> Field:
    """Extract the signed excess of ``f <v>^l`` over the threshold ``K``.

    ``plus``: ``max(f <v>^l - K, 0)``; ``minus``: ``min(f <v>^l - K, 0)``
    (each vanishing off its sign set), pointwise in space and velocity.
    """
    w = velocity_weight(f.grid, spec.l)
    shifted = f.values * w - spec.K
    if spec.sign == "plus":
        vals = np.maximum(shifted, 0.0)
    else:
        vals = np.minimum(shifted, 0.0)
    return make_field(f.grid, vals)


def _uniform_times(snapshots: Sequence[tuple[float, Field]],
                   t_lo: float, t_hi: float):
    chosen = [(t, f) for t, f in snapshots
              if t_lo - 1e-12 <= t <= t_hi + 1e-12]
    if len(chosen) < 2:
        raise UsageError(
            "energy functional needs at least 2 snapshots in the window")
    times = np.array([t for t, _ in chosen])
    steps = np.diff(times)
    if steps.min() <= 0 or (steps.max() - steps.min()) > 1e-9 * steps.max():
        raise UsageError("snapshots must be uniformly spaced in time")
    return chosen, times


def energy_functional(snapshots: Sequence[tuple[float, Field]], K: float,
                      T1: float, T2: float, spec: EnergySpec) -> float:
    """Level-set energy of a trajectory over the window ``[T1, T2]``.

    Sum of: the supremum over snapshot times of the squared L2 norm of the
    plus level set at threshold ``K``; the time integral of the squared
    order-``s`` velocity-Sobolev norm of the ``<v>^(gamma/2)``-weighted
    level set; and ``C0^(-1)`` times the ``1/p`` power of the time integral
    of the p-th power of the Lp norm of the spatially smoothed square of
    the ``<v>^(-2+gamma/2)``-weighted level set.  Exactly zero when ``K``
    dominates the weighted trajectory supremum.
    """
    chosen, times = _uniform_times(snapshots, T1, T2)
    grid = chosen[0][1].grid
    meas = grid.cell_measure()
    ls_spec = LevelSetSpec(K=K, l=spec.l, sign="plus")
    w_diss = velocity_weight(grid, spec.gamma / 2.0)
    w_nl = velocity_weight(grid, -2.0 + spec.gamma / 2.0)
    sup_sq = 0.0
    diss = np.empty(len(chosen))
    nonlin = np.empty(len(chosen))
    for i, (_, f) in enumerate(chosen):
        g = level_set(f, ls_spec)
        sup_sq = max(sup_sq, float((g.values ** 2).sum()) * meas)
        if np.all(g.values == 0.0):
            diss[i] = 0.0
            nonlin[i] = 0.0
            continue
        weighted = make_field(grid, g.values * w_diss)
        smooth = sobolev_multiplier(weighted, spec.s)
        diss[i] = float((smooth.values ** 2).sum()) * meas
        sq = make_field(grid, (g.values * w_nl) ** 2)
        sq_x = x_sobolev_multiplier(sq, spec.s_dd)
        nonlin[i] = float((np.abs(sq_x.values) ** spec.p).sum()) * meas
    dt = float(times[1] - times[0])
    diss_term = _trapezoid(diss, dt)
    nl_term = _trapezoid(nonlin, dt) ** (1.0 / spec.p) / spec.C0
    return sup_sq + diss_term + nl_term


def _trapezoid(values: np.ndarray, dt: float) -> float:
    return dt * float(values.sum() - 0.5 * (values[0] + values[-1]))
