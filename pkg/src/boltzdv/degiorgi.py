"""Level-set ladder machinery: exponent derivation, threshold selection,
certified geometric-decay comparison, and empirical ladders on stored
trajectories.

The ladder compares energies ``E_k`` at the nested thresholds
``M_k = K0 (1 - 2^-k)``.  Against the reference decay
``E*_k = E0 Q0^-k`` the nonlinear recurrence is certified rung by rung;
``Q0`` and the admissible threshold ``K0`` are derived from the exponent
arrays so that the geometric ansatz closes.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ParameterRejection, UsageError
from .functionals import EnergySpec, energy_functional
from .grid import Field

__all__ = [
    "LadderParams",
    "LevelEnergySeries",
    "ComparisonCertificate",
    "derive_constants",
    "threshold_K0",
    "threshold_branches",
    "certify_comparison",
    "empirical_ladder",
    "fit_recursion_constant",
]

_SLACK = 1e-12


@dataclass(frozen=True)
class LadderParams:
    """Exponents of the nonlinear ladder recurrence.

    ``beta`` (each > 1) and ``a`` (each > 0) are parallel tuples; ``C`` is
    the recurrence constant and ``q0`` the derived decay ratio
    ``max_i 2^((a_i + 1)/(beta_i - 1))``.  Normally produced by
    :func:`derive_constants`; arbitrary exponent tuples may be injected
    directly for testing.
    """

    beta: tuple[float, ...]
    a: tuple[float, ...]
    C: float = 1.0
    p: float | None = None
    r_star: float | None = None
    xi_star: float | None = None
    p_prime: float | None = None
    q0: float = field(init=False)

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        a = tuple(float(x) for x in self.a)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "a", a)
        if len(beta) != len(a) or not beta:
            raise UsageError("beta and a must be nonempty and equal-length")
        for i, b in enumerate(beta):
            if not b > 1.0:
                raise ParameterRejection(
                    f"beta[{i}] = {b} must exceed 1", index=i,
                    margin=b - 1.0)
        for i, ai in enumerate(a):
            if not ai > 0.0:
                raise ParameterRejection(
                    f"a[{i}] = {ai} must be positive", index=i, margin=ai)
        if not self.C > 0.0:
            raise UsageError(f"C must be positive, got {self.C}")
        q0 = max(2.0 ** ((ai + 1.0) / (b - 1.0)) for b, ai in zip(beta, a))
        object.__setattr__(self, "q0", q0)

    def to_dict(self) -> dict:
        return {
            "beta": list(self.beta),
            "a": list(self.a),
            "C": self.C,
            "p": self.p,
            "r_star": self.r_star,
            "xi_star": self.xi_star,
            "p_prime": self.p_prime,
            "q0": self.q0,
        }


def derive_constants(p: float, r_star: float = 3.0, xi_star: float = 4.0,
                     C: float = 1.0) -> LadderParams:
    """Build the four-rung ladder exponents from the Lebesgue exponent
    ``p`` and the interpolation parameters ``r_star``, ``xi_star``.

    With ``p' = p/(2 - p)``, the rungs are
    ``beta = ((1 + r*/p')/2, r*/p, r*, r*)`` and
    ``a = ((xi* - 2p')/(2p'), (xi* - 2p)/p, xi* - 1, xi* - 2)``.
    Any ``beta[i] <= 1`` or ``a[i] <= 0`` raises ``ParameterRejection``
    carrying the violated index.
    """
    if not 1.0 < p < 2.0:
        raise UsageError(f"p must lie in (1, 2), got {p}")
    p_prime = p / (2.0 - p)
    beta = (0.5 * (1.0 + r_star / p_prime), r_star / p, r_star, r_star)
    a = ((xi_star - 2.0 * p_prime) / (2.0 * p_prime),
         (xi_star - 2.0 * p) / p,
         xi_star - 1.0,
         xi_star - 2.0)
    return LadderParams(beta=beta, a=a, C=C, p=p, r_star=r_star,
                        xi_star=xi_star, p_prime=p_prime)


def threshold_K0(E0: float, params: LadderParams) -> float:
    """Smallest certified threshold for initial energy ``E0``:
    ``max_i (4 C)^(1/a_i) E0^((beta_i - 1)/a_i) q0^(beta_i/a_i)``.
    Zero initial energy yields zero.
    """
    if not E0 >= 0.0:
        raise UsageError(f"E0 must be >= 0, got {E0}")
    if E0 == 0.0:
        return 0.0
    q0 = params.q0
    return max(
        (4.0 * params.C) ** (1.0 / ai)
        * E0 ** ((b - 1.0) / ai)
        * q0 ** (b / ai)
        for b, ai in zip(params.beta, params.a)
    )


def threshold_branches(E0: float, params: LadderParams,
                       sup_weighted_initial: float) -> dict:
    """Report both admissible-threshold branches and their max: the
    energy-driven value from :func:`threshold_K0` and twice the weighted
    sup norm of the initial state.
    """
    if not sup_weighted_initial >= 0.0:
        raise UsageError("sup_weighted_initial must be >= 0, "
                         f"got {sup_weighted_initial}")
    energy_branch = threshold_K0(E0, params)
    sup_branch = 2.0 * sup_weighted_initial
    return {
        "E0": E0,
        "energy_branch": energy_branch,
        "sup_branch": sup_branch,
        "K0": max(energy_branch, sup_branch),
    }


@dataclass(frozen=True)
class ComparisonCertificate:
    """Per-rung record of the certified comparison.

    ``lhs[k-1]`` is the recurrence bound at rung ``k`` and ``rhs[k-1]``
    the reference energy ``E*_k``; ``passed`` holds iff every
    ``lhs <= rhs`` within slack.
    """

    E0: float
    K0: float
    k_max: int
    params: LadderParams
    lhs: tuple[float, ...]
    rhs: tuple[float, ...]
    step_ok: tuple[bool, ...]
    passed: bool

    def first_failure(self) -> int | None:
        """1-based index of the first failing rung, or None."""
        for k, ok in enumerate(self.step_ok, start=1):
            if not ok:
                return k
        return None

    def to_dict(self) -> dict:
        return {
            "E0": self.E0,
            "K0": self.K0,
            "k_max": self.k_max,
            "params": self.params.to_dict(),
            "lhs": list(self.lhs),
            "rhs": list(self.rhs),
            "step_ok": list(self.step_ok),
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def certify_comparison(E0: float, K0: float, params: LadderParams,
                       k_max: int = 30, *,
                       enforce_threshold: bool = True) -> ComparisonCertificate:
    """Verify that the geometric ansatz ``E*_k = E0 q0^-k`` closes under
    the ladder recurrence at threshold ``K0``.

    Requires ``K0 >= threshold_K0(E0, params)``; a short ``K0`` is
    rejected with the shortfall as margin (pass
    ``enforce_threshold=False`` to evaluate the recurrence anyway and
    record the failing rungs).  For each ``k = 1..k_max`` checks
    ``C sum_i 2^(k(a_i+1)) E*_(k-1)^beta_i / K0^a_i <= E*_k`` with
    relative slack ``1e-12``.
    """
    if k_max < 1:
        raise UsageError(f"k_max must be >= 1, got {k_max}")
    if not E0 >= 0.0:
        raise UsageError(f"E0 must be >= 0, got {E0}")
    if enforce_threshold:
        need = threshold_K0(E0, params)
        if K0 < need * (1.0 - _SLACK):
            raise ParameterRejection(
                f"K0 = {K0} is below the admissible threshold {need}",
                margin=need - K0)
    lhs: list[float] = []
    rhs: list[float] = []
    ok: list[bool] = []
    q0 = params.q0
    for k in range(1, k_max + 1):
        if E0 == 0.0:
            lhs.append(0.0)
            rhs.append(0.0)
            ok.append(True)
            continue
        total, e_k, rung_ok = _rung(E0, K0, params, k)
        lhs.append(total)
        rhs.append(e_k)
        ok.append(rung_ok)
    return ComparisonCertificate(E0=E0, K0=K0, k_max=k_max, params=params,
                                 lhs=tuple(lhs), rhs=tuple(rhs),
                                 step_ok=tuple(ok), passed=all(ok))


def _rung(E0: float, K0: float, params: LadderParams,
          k: int) -> tuple[float, float, bool]:
    """One rung of the recurrence: (bound, reference energy, bound <= ref)
    at step ``k``.

    Evaluated directly in 64-bit arithmetic; rungs whose powers overflow
    the double range are redone (and compared) in base-2 log space so
    extreme but valid exponent sets are handled instead of raising.
    """
    q0 = params.q0
    try:
        e_prev = E0 * q0 ** (-(k - 1))
        e_k = E0 * q0 ** (-k)
        total = params.C * sum(
            2.0 ** (k * (ai + 1.0)) * e_prev ** b / K0 ** ai
            for b, ai in zip(params.beta, params.a))
        return total, e_k, total <= e_k * (1.0 + _SLACK) + _SLACK
    except OverflowError:
        pass
    log2_e0 = math.log2(E0)
    log2_q0 = math.log2(q0)
    log2_k0 = math.log2(K0)
    log2_c = math.log2(params.C)
    log2_ek = log2_e0 - k * log2_q0
    exps = [log2_c + k * (ai + 1.0) + b * (log2_e0 - (k - 1) * log2_q0)
            - ai * log2_k0
            for b, ai in zip(params.beta, params.a)]
    top = max(exps)
    total_log = top + math.log2(sum(2.0 ** min(e - top, 0.0) for e in exps))
    rung_ok = total_log <= log2_ek + math.log2(1.0 + _SLACK)

    def as_float(log2_x: float) -> float:
        if log2_x > 1023.0:
            return math.inf
        if log2_x < -1074.0:
            return 0.0
        return 2.0 ** log2_x

    return as_float(total_log), as_float(log2_ek), rung_ok


@dataclass(frozen=True)
class LevelEnergySeries:
    """Energies along the nested thresholds ``M_k = K0 (1 - 2^-k)``.

    ``levels`` must increase strictly toward ``K0`` and ``energies`` be
    nonnegative and nonincreasing (within slack); ``zero_level`` is the
    bisection-refined smallest threshold with vanishing energy, or None
    if the energy never vanishes by the final rung.
    """

    K0: float
    levels: tuple[float, ...]
    energies: tuple[float, ...]
    reached_zero: bool
    zero_level: float | None

    def __post_init__(self):
        if len(self.levels) != len(self.energies) or len(self.levels) < 2:
            raise UsageError("levels and energies must be parallel, "
                             "length >= 2")
        for i in range(1, len(self.levels)):
            if not self.levels[i] > self.levels[i - 1]:
                raise UsageError(f"levels must increase strictly, rung {i}")
        if not self.levels[-1] < self.K0 * (1.0 + _SLACK):
            raise UsageError("levels must stay below K0")
        for i, e in enumerate(self.energies):
            if not e >= 0.0:
                raise UsageError(f"energies must be >= 0, rung {i}")
            if i and e > self.energies[i - 1] * (1.0 + _SLACK) + _SLACK:
                raise UsageError(f"energies must be nonincreasing, rung {i}")

    def to_dict(self) -> dict:
        return {
            "K0": self.K0,
            "levels": list(self.levels),
            "energies": list(self.energies),
            "reached_zero": self.reached_zero,
            "zero_level": self.zero_level,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def empirical_ladder(snapshots: Sequence[tuple[float, Field]], K0: float,
                     l: float, espec: EnergySpec,
                     k_max: int = 20) -> LevelEnergySeries:
    """Measure the level-set energies of a trajectory along the nested
    thresholds ``M_k = K0 (1 - 2^-k)``, ``k = 0..k_max``.

    Reports whether the energy vanishes by the final rung and refines the
    smallest zero-energy threshold by bisection.
    """
    if not K0 > 0.0:
        raise UsageError(f"K0 must be positive, got {K0}")
    if k_max < 1:
        raise UsageError(f"k_max must be >= 1, got {k_max}")
    if len(snapshots) < 2:
        raise UsageError("empirical ladder needs at least 2 snapshots")
    spec = dataclasses.replace(espec, l=l)
    times = [t for t, _ in snapshots]
    t1, t2 = min(times), max(times)

    def energy_at(K: float) -> float:
        return energy_functional(snapshots, K, t1, t2, spec)

    levels = tuple(K0 * (1.0 - 2.0 ** (-k)) for k in range(k_max + 1))
    energies = tuple(energy_at(M) for M in levels)
    reached = energies[-1] == 0.0
    zero_level: float | None = None
    if reached:
        hi = next(M for M, e in zip(levels, energies) if e == 0.0)
        lo = 0.0
        for M, e in zip(levels, energies):
            if e > 0.0:
                lo = max(lo, M)
        for _ in range(60):
            if hi - lo <= 1e-12 * max(1.0, K0):
                break
            mid = 0.5 * (lo + hi)
            if energy_at(mid) == 0.0:
                hi = mid
            else:
                lo = mid
        zero_level = hi
    return LevelEnergySeries(K0=K0, levels=levels, energies=energies,
                             reached_zero=reached, zero_level=zero_level)


def fit_recursion_constant(series: LevelEnergySeries,
                           params: LadderParams) -> float:
    """Least-squares fit of the recurrence constant ``C`` from measured
    rung energies: minimizes ``sum_k (C x_k - E_k)^2`` where ``x_k`` is
    the exponent sum evaluated at the measured ``E_(k-1)``.
    """
    num = 0.0
    den = 0.0
    for k in range(1, len(series.energies)):
        e_prev = series.energies[k - 1]
        if e_prev == 0.0:
            continue
        x = sum(2.0 ** (k * (ai + 1.0)) * e_prev ** b / series.K0 ** ai
                for b, ai in zip(params.beta, params.a))
        num += x * series.energies[k]
        den += x * x
    if den == 0.0:
        raise UsageError("no nonzero rungs to fit against")
    return num / den
