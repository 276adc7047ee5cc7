"""Non-cutoff collision kernel: angular profile, post-collision map, cancellation kernel.

The collision kernel factorizes as ``B(v - v*, sigma) = |v - v*|^gamma *
b(cos theta)`` with a soft-potential velocity exponent ``gamma in (-3, 0]``
and an angular profile concentrating like ``theta^(-1-2s)`` at grazing
angles (no angular cutoff).  The concrete profile used here is

    b(cos theta) = kappa * theta^(-1-2s) / sin(theta),

optionally tempered for strong singularities ``s > 1/2`` by the regularized
profile

    b_eta(cos theta) = b(cos theta) * theta^(2+2s) /
                       (theta^(2+2s_star) * (theta + eta)^(2s-2s_star)),

which satisfies ``alpha0 / theta^(2+2s_star) <= b_eta <= b`` with the
eta-independent constant ``alpha0 = kappa / (pi+1)^(2s-2s_star)``.

Deviation maps to the half-sphere ``cos theta >= 0``; all angular integrals
run over ``[theta_min, pi/2]`` where ``theta_min`` is a configurable floor
whose refinement toward zero realizes the non-cutoff limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, QuadratureError, UsageError

__all__ = [
    "KernelSpec",
    "CollisionPair",
    "angular_b",
    "kernel_B",
    "post_collision",
    "cancellation_S",
    "cancellation_constant",
    "alpha0",
]


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the collision kernel.

    Attributes
    ----------
    gamma : float
        Velocity exponent, ``-3 < gamma <= 0`` (0 is the Maxwell-molecule
        case, negative values are soft potentials).
    s : float
        Order of the angular singularity, ``0 < s < 1``; the combination
        ``gamma + 2s > -1`` is required.
    eta : float
        Angular regularization strength, ``>= 0``.  ``eta = 0`` leaves the
        baseline profile untouched for any ``s_star``.
    s_star : float
        Reduced singularity order in ``(0, 1/2]`` used by the regularized
        profile.  Defaults to ``min(s, 1/2)``.
    theta_min : float
        Angular floor in radians, ``0 < theta_min < pi/2``.  The kernel is
        zero below it.
    kappa : float
        Positive scaling of the angular profile.
    """

    gamma: float = 0.0
    s: float = 0.25
    eta: float = 0.0
    s_star: float | None = None
    theta_min: float = 1e-3
    kappa: float = 1.0

    def __post_init__(self):
        if not (-3.0 < self.gamma <= 0.0):
            raise UsageError(f"gamma must lie in (-3, 0], got {self.gamma}")
        if not (0.0 < self.s < 1.0):
            raise UsageError(f"s must lie in (0, 1), got {self.s}")
        if self.gamma + 2.0 * self.s <= -1.0:
            raise UsageError(
                f"gamma + 2s must exceed -1, got {self.gamma + 2 * self.s}")
        if self.eta < 0.0:
            raise UsageError(f"eta must be >= 0, got {self.eta}")
        if self.s_star is None:
            object.__setattr__(self, "s_star", min(self.s, 0.5))
        if not (0.0 < self.s_star <= 0.5):
            raise UsageError(f"s_star must lie in (0, 1/2], got {self.s_star}")
        if self.eta > 0.0:
            if 2.0 * self.s - 2.0 * self.s_star >= 1.0:
                raise UsageError(
                    "regularized profile requires 2s - 2s_star < 1, got "
                    f"{2 * self.s - 2 * self.s_star}")
            if self.s_star > self.s:
                raise UsageError(
                    "regularized profile requires s_star <= s so that "
                    f"b_eta <= b; got s_star={self.s_star} > s={self.s}")
        if not (0.0 < self.theta_min < math.pi / 2):
            raise UsageError(
                f"theta_min must lie in (0, pi/2), got {self.theta_min}")
        if not self.kappa > 0.0:
            raise UsageError(f"kappa must be positive, got {self.kappa}")


@dataclass(frozen=True)
class CollisionPair:
    """A pre/post collision configuration.

    ``v_prime`` and ``v_star_prime`` are the outgoing velocities of the
    elastic binary collision with incoming velocities ``v``, ``v_star`` and
    scattering direction ``sigma``; ``cos_theta`` is the cosine of the
    deviation angle between the relative velocity and ``sigma``.
    """

    v: np.ndarray
    v_star: np.ndarray
    sigma: np.ndarray
    v_prime: np.ndarray
    v_star_prime: np.ndarray
    cos_theta: float


def angular_b(theta, spec: KernelSpec):
    """Evaluate the (possibly regularized) angular profile at ``theta``.

    Accepts a scalar or ndarray of angles in ``(0, pi/2]`` and returns
    ``b_eta(cos theta)``; with ``eta = 0`` this is exactly the baseline
    profile ``kappa * theta^(-1-2s) / sin(theta)``.

    Raises
    ------
    DomainError
        If any angle lies outside ``(0, pi/2]`` (the kernel's angular
        support assumption).
    """
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0.0) or np.any(th > math.pi / 2 + 1e-12):
        raise DomainError("theta must lie in (0, pi/2]")
    base = spec.kappa * th ** (-1.0 - 2.0 * spec.s) / np.sin(th)
    if spec.eta == 0.0:
        out = base
    else:
        out = base * th ** (2.0 + 2.0 * spec.s) / (
            th ** (2.0 + 2.0 * spec.s_star)
            * (th + spec.eta) ** (2.0 * spec.s - 2.0 * spec.s_star))
    if np.ndim(theta) == 0:
        return float(out)
    return out


def alpha0(spec: KernelSpec) -> float:
    """Eta-independent lower-bound constant of the regularized profile.

    ``alpha0 = kappa / (pi+1)^(2s-2s_star)`` satisfies
    ``alpha0 / theta^(2+2s_star) <= b_eta(cos theta) <= b(cos theta)``
    for all ``theta in (0, pi/2]`` and ``eta in [0, 1]``.
    """
    return spec.kappa / (math.pi + 1.0) ** (2.0 * spec.s - 2.0 * spec.s_star)


def kernel_B(v, v_star, sigma, spec: KernelSpec) -> float:
    """Evaluate the full collision kernel ``B(v - v*, sigma)``.

    Returns ``|v - v*|^gamma * b_eta(cos theta)`` where ``cos theta`` is the
    inner product of the unit relative velocity with ``sigma``; returns 0
    outside the angular support (``cos theta < 0`` or ``theta < theta_min``).

    Raises
    ------
    DomainError
        If ``v == v_star`` (the relative speed vanishes; with ``gamma < 0``
        the kernel is singular there and the deviation angle is undefined).
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    u = v - v_star
    r = float(np.linalg.norm(u))
    if r == 0.0:
        raise DomainError("coincident velocities: relative speed is zero")
    cos_theta = float(np.dot(u, sigma)) / r
    if cos_theta < 0.0:
        return 0.0
    theta = math.acos(min(1.0, cos_theta))
    if theta < spec.theta_min:
        return 0.0
    if theta == 0.0:
        return 0.0
    return r ** spec.gamma * angular_b(theta, spec)


def post_collision(v, v_star, sigma) -> CollisionPair:
    """Apply the elastic post-collision map.

    ``v' = (v+v*)/2 + (|v-v*|/2) sigma`` and
    ``v*' = (v+v*)/2 - (|v-v*|/2) sigma``; momentum and kinetic energy are
    conserved identically.

    Raises
    ------
    UsageError
        If ``sigma`` is not a unit vector to within ``1e-12``.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if abs(float(np.linalg.norm(sigma)) - 1.0) > 1e-12:
        raise UsageError("sigma must be a unit vector (|sigma| = 1 +/- 1e-12)")
    center = 0.5 * (v + v_star)
    u = v - v_star
    r = float(np.linalg.norm(u))
    half = 0.5 * r * sigma
    v_prime = center + half
    v_star_prime = center - half
    if r > 0.0:
        cos_theta = float(np.dot(u, sigma)) / r
    else:
        # Degenerate pair: the map is the identity; conventionally theta = 0.
        cos_theta = 1.0
    return CollisionPair(v=v, v_star=v_star, sigma=sigma, v_prime=v_prime,
                         v_star_prime=v_star_prime, cos_theta=cos_theta)


@lru_cache(maxsize=64)
def cancellation_constant(spec: KernelSpec) -> float:
    """Angle integral underlying the cancellation kernel.

    Computes ``C_S = |S^1| * int_{theta_min}^{pi/2} sin(theta) *
    b_eta(cos theta) * (cos^(-3-gamma)(theta/2) - 1) dtheta`` by adaptive
    quadrature, with ``|S^1| = 2 pi``.  By homogeneity of the kernel the
    cancellation kernel is ``S(|z|) = C_S * |z|^gamma``.

    Raises
    ------
    QuadratureError
        If the quadrature error estimate is not well below the value
        (a numerical failure is never reported as a silent value).
    """
    g = spec.gamma

    def integrand(theta: float) -> float:
        b = angular_b(theta, spec)
        return math.sin(theta) * b * (math.cos(0.5 * theta) ** (-3.0 - g) - 1.0)

    val, abserr = quad(integrand, spec.theta_min, math.pi / 2,
                       epsabs=1e-12, epsrel=1e-12, limit=500)
    if not math.isfinite(val) or abserr > max(1e-8, 1e-8 * abs(val)):
        raise QuadratureError(
            f"cancellation-kernel quadrature did not converge: value={val}, "
            f"error estimate={abserr}")
    return 2.0 * math.pi * val


def cancellation_S(z_mag: float, spec: KernelSpec) -> float:
    """Evaluate the cancellation kernel ``S`` at relative speed ``|z|``.

    ``S(|z|)`` is the angular integral of the gain-minus-loss weight
    ``sin(theta) [cos^(-3)(theta/2) B(|z|/cos(theta/2), cos theta) -
    B(|z|, cos theta)]`` over ``[theta_min, pi/2]``, times ``|S^1| = 2 pi``.
    The velocity dependence factors exactly as ``|z|^gamma``, so the angle
    integral is evaluated once per kernel spec (cached) and scaled.
    """
    if not z_mag > 0.0:
        raise UsageError(f"z_mag must be positive, got {z_mag}")
    c = cancellation_constant(spec)
    if spec.gamma == 0.0:
        return c
    return c * z_mag ** spec.gamma
