"""Time integration of the perturbative kinetic equation

    d_t f + v1 d_x f = eps * L_alpha(mu + f) + Q(mu + f*chi, mu + f)

around the global Maxwellian, in space-homogeneous and 1D-torus modes.

The scheme is first-order IMEX: transport is advanced exactly by a spatial
Fourier phase shift, the collision operator explicitly (linear parts via
cached dense matrices, the bilinear remainder by direct quadrature — the
split is exact by bilinearity), and the stiff velocity regularizer
``eps L_alpha`` implicitly by preconditioned conjugate gradients.  The
state is kept supported in the support ball; the conservative correction
removes the quadrature's invariant-moment defect each step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .collision import (
    LinearizedCollision,
    QuadratureSpec,
    assemble_linearized,
    conservative_correction,
    q_apply,
    weak_moments,
)
from .errors import StepFailure, UsageError
from .grid import (
    Field,
    GridSpec,
    checkpoint_save,
    make_field,
    make_maxwellian,
    mask_to_ball,
    velocity_weight,
    x_sobolev_multiplier,
)
from .kernel import KernelSpec

__all__ = [
    "RunConfig",
    "SimState",
    "DiagnosticsRow",
    "RunResult",
    "DIAG_COLUMNS",
    "cutoff_profile",
    "chi_cutoff",
    "l_alpha_apply",
    "step",
    "run",
]

DIAG_COLUMNS = ("t", "L2_k", "Linf_k0", "entropy", "mass", "momx", "momy",
                "momz", "energy", "Hs_x")


@dataclass(frozen=True)
class RunConfig:
    """Parameters of a time-integration run.

    ``epsilon`` scales the velocity regularizer (0 disables the implicit
    substep), ``alpha`` its weight power; ``k0``/``delta0`` parametrize
    the sup-norm cutoff; ``k_diag`` is the weight exponent of the recorded
    L2 norm and ``s_x_diag`` the order of the recorded spatial Sobolev
    norm.  ``subtract_equilibrium_residual`` drops the discrete
    self-collision of the reference state (pure quadrature noise), making
    f = 0 an exact fixed point.
    """

    kernel: KernelSpec
    grid: GridSpec
    dt: float
    t_end: float
    quad: QuadratureSpec = QuadratureSpec(n_theta=8, n_phi=4)
    epsilon: float = 0.0
    alpha: float = 5.0
    k0: float = 14.0
    delta0: float = 1e-4
    cutoff_enabled: bool = True
    correction_enabled: bool = True
    snapshot_every: int = 1
    subtract_equilibrium_residual: bool = True
    k_diag: float = 14.0
    s_x_diag: float = 0.5
    max_implicit_iterations: int = 500

    def __post_init__(self):
        if not self.dt > 0.0:
            raise UsageError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0.0:
            raise UsageError(f"t_end must be >= 0, got {self.t_end}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise UsageError(f"epsilon must lie in [0, 1], "
                             f"got {self.epsilon}")
        if not self.alpha >= 0.0:
            raise UsageError(f"alpha must be >= 0, got {self.alpha}")
        if not self.k0 >= 0.0:
            raise UsageError(f"k0 must be >= 0, got {self.k0}")
        if not self.delta0 > 0.0:
            raise UsageError(f"delta0 must be positive, got {self.delta0}")
        if self.snapshot_every < 1:
            raise UsageError("snapshot_every must be >= 1, "
                             f"got {self.snapshot_every}")
        if self.max_implicit_iterations < 1:
            raise UsageError("max_implicit_iterations must be >= 1")


@dataclass(frozen=True)
class DiagnosticsRow:
    """One snapshot of the monitored norm series (CSV column order in
    ``DIAG_COLUMNS``)."""

    t: float
    L2_k: float
    Linf_k0: float
    entropy: float
    mass: float
    momx: float
    momy: float
    momz: float
    energy: float
    Hs_x: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.t, self.L2_k, self.Linf_k0, self.entropy, self.mass,
                self.momx, self.momy, self.momz, self.energy, self.Hs_x)


@dataclass(frozen=True)
class SimState:
    """Integration state: time, perturbation field, accumulated
    diagnostics (timestamps strictly increasing)."""

    t: float
    f: Field
    diagnostics: tuple[DiagnosticsRow, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise UsageError("state time must be finite")
        times = [row.t for row in self.diagnostics]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise UsageError("diagnostic timestamps must increase strictly")


@dataclass(frozen=True)
class RunResult:
    """Trajectory, diagnostics and run summary returned by :func:`run`."""

    final: SimState
    snapshots: tuple[tuple[float, Field], ...]
    diagnostics: tuple[DiagnosticsRow, ...]
    cutoff_active_steps: int
    total_steps: int
    min_F: float
    warnings: tuple[str, ...] = ()

    @property
    def cutoff_inactive(self) -> bool:
        return self.cutoff_active_steps == 0


def cutoff_profile(x, delta0: float):
    """Smooth bump ``chi``: 1 for ``|x| <= delta0``, 0 for
    ``|x| >= 2 delta0``, interpolated by the standard ``exp(-1/t)``
    smoothstep (max slope 2/delta0)."""
    if not delta0 > 0.0:
        raise UsageError(f"delta0 must be positive, got {delta0}")
    u = (2.0 - np.abs(x) / delta0)
    lo = np.clip(u, 1e-300, None)
    hi = np.clip(1.0 - u, 1e-300, None)
    with np.errstate(over="ignore"):
        phi_lo = np.where(u > 0.0, np.exp(-1.0 / lo), 0.0)
        phi_hi = np.where(u < 1.0, np.exp(-1.0 / hi), 0.0)
    return phi_lo / (phi_lo + phi_hi)


def chi_cutoff(f: Field, k0: float, delta0: float) -> Field:
    """Apply the sup-norm cutoff: ``f * chi(<v>^k0 f)`` pointwise.

    Identity wherever ``<v>^k0 |f| <= delta0``; zero wherever it exceeds
    ``2 delta0``.
    """
    w = velocity_weight(f.grid, k0)
    return make_field(f.grid, f.values * cutoff_profile(f.values * w, delta0))


@lru_cache(maxsize=16)
def _l_alpha_tables(grid: GridSpec, alpha: float):
    v = grid.v_nodes
    n = grid.n_v
    vsq = v ** 2
    vf_sq = (v[:-1] + 0.5 * grid.h) ** 2
    node_w = (1.0 + vsq[:, None, None] + vsq[None, :, None]
              + vsq[None, None, :]) ** alpha
    faces = []
    for axis in range(3):
        parts = [vsq, vsq, vsq]
        parts[axis] = vf_sq
        w = (1.0 + parts[0][:, None, None] + parts[1][None, :, None]
             + parts[2][None, None, :]) ** alpha
        faces.append(w)
    inv_h2 = 1.0 / grid.h ** 2
    # diagonal of -L_alpha (Jacobi preconditioner for the implicit solve)
    diag = np.array(node_w)
    for axis, w in enumerate(faces):
        pad = [(0, 0)] * 3
        pad[axis] = (1, 0)
        left = np.pad(w, pad)
        pad[axis] = (0, 1)
        right = np.pad(w, pad)
        diag += (left + right) * inv_h2
    for arr in (node_w, *faces, diag):
        arr.flags.writeable = False
    return node_w, tuple(faces), diag


def _l_alpha_raw(u: np.ndarray, grid: GridSpec, alpha: float) -> np.ndarray:
    """L_alpha on one or more velocity cubes (leading axes broadcast)."""
    node_w, faces, _ = _l_alpha_tables(grid, alpha)
    inv_h2 = 1.0 / grid.h ** 2
    out = -node_w * u
    offset = u.ndim - 3
    for axis3, w in enumerate(faces):
        axis = axis3 + offset
        flux = w * np.diff(u, axis=axis)
        pad = [(0, 0)] * u.ndim
        pad[axis] = (1, 1)
        flux = np.pad(flux, pad)
        out += np.diff(flux, axis=axis) * inv_h2
    return out


def l_alpha_apply(f: Field, alpha: float) -> Field:
    """Weighted regularizer ``L_alpha f = -(<v>^(2a) f - div(<v>^(2a)
    grad f))`` in flux form with zero-flux box boundaries.

    The discrete operator is symmetric, and its quadratic form equals
    ``-||<v>^a f||^2 - sum over faces of the weighted squared differences``
    (nonpositive).
    """
    if not alpha >= 0.0:
        raise UsageError(f"alpha must be >= 0, got {alpha}")
    return make_field(f.grid, _l_alpha_raw(f.values, f.grid, alpha))


def _implicit_solve(rhs: np.ndarray, grid: GridSpec, alpha: float,
                    coef: float, max_iter: int) -> np.ndarray:
    """Solve ``(I - coef * L_alpha) u = rhs`` per spatial slice by
    Jacobi-preconditioned conjugate gradients (relative residual 1e-10)."""
    _, _, diag_neg_l = _l_alpha_tables(grid, alpha)
    precond = 1.0 + coef * diag_neg_l

    def apply_op(u):
        return u - coef * _l_alpha_raw(u, grid, alpha)

    out = np.empty_like(rhs)
    for x in range(rhs.shape[0]):
        b = rhs[x]
        b_norm = math.sqrt(float((b * b).sum()))
        if b_norm == 0.0:
            out[x] = 0.0
            continue
        u = b / precond
        r = b - apply_op(u)
        z = r / precond
        p = np.array(z)
        rz = float((r * z).sum())
        converged = False
        for _ in range(max_iter):
            if math.sqrt(float((r * r).sum())) <= 1e-10 * b_norm:
                converged = True
                break
            ap = apply_op(p)
            alpha_cg = rz / float((p * ap).sum())
            u = u + alpha_cg * p
            r = r - alpha_cg * ap
            z = r / precond
            rz_new = float((r * z).sum())
            p = z + (rz_new / rz) * p
            rz = rz_new
        else:
            converged = math.sqrt(
                float((r * r).sum())) <= 1e-10 * b_norm
        if not converged:
            res = math.sqrt(float((r * r).sum())) / b_norm
            raise StepFailure(
                f"implicit solve stalled at relative residual {res:.3e} "
                f"after {max_iter} iterations")
        out[x] = u
    return out


def _transport_exact(values: np.ndarray, grid: GridSpec,
                     dt: float) -> np.ndarray:
    """Advance ``d_t f + v1 d_x f = 0`` exactly on the unit torus by a
    Fourier phase shift.

    Exact on every conjugate-paired mode; for even cell counts the
    unpaired Nyquist mode is aliased back to the real grid by the final
    real projection (the spatial mean, hence every collision-invariant
    total, is always preserved exactly).
    """
    n_x = values.shape[0]
    if n_x == 1:
        return values
    freqs = 2.0 * math.pi * np.fft.fftfreq(n_x, d=1.0 / n_x)
    phase = np.exp(-1j * dt * freqs[:, None] * grid.v_nodes[None, :])
    spectrum = np.fft.fft(values, axis=0)
    spectrum *= phase[:, :, None, None]
    return np.fft.ifft(spectrum, axis=0).real


@lru_cache(maxsize=8)
def _linearized_for(kernel: KernelSpec, grid: GridSpec,
                    quad: QuadratureSpec) -> LinearizedCollision:
    return assemble_linearized(make_maxwellian(grid), kernel, quad)


def _collision_rhs(f: Field, cfg: RunConfig) -> Field:
    """Explicit collision right-hand side Q(mu + f*chi, mu + f) - Q(mu, mu),
    assembled from the cached linearization plus the bilinear quadrature,
    masked to the support ball."""
    grid = cfg.grid
    lin = _linearized_for(cfg.kernel, grid, cfg.quad)
    if cfg.cutoff_enabled:
        g_pert = chi_cutoff(f, cfg.k0, cfg.delta0)
    else:
        g_pert = f
    bil = q_apply(g_pert, f, cfg.kernel, cfg.quad)
    out = np.empty_like(f.values)
    for x in range(grid.n_x):
        f_ball = lin.restrict(f.values[x])
        g_ball = lin.restrict(g_pert.values[x])
        vec = lin.k_f @ f_ball + lin.k_g @ g_ball
        if not cfg.subtract_equilibrium_residual:
            vec = vec + lin.q_ref
        out[x] = lin.scatter(vec)
    total = make_field(grid, out + bil.total.values)
    return mask_to_ball(total)


def step(state: SimState, cfg: RunConfig) -> SimState:
    """One IMEX step: exact transport, explicit collision (with optional
    conservative correction), implicit ``eps L_alpha`` substep.

    Raises ``StepFailure`` on non-finite values or a stalled implicit
    solve.
    """
    f_vals = state.f.values
    if state.f.grid != cfg.grid:
        raise UsageError("state field lives on a different grid")
    f_vals = _transport_exact(f_vals, cfg.grid, cfg.dt)
    f_up = make_field(cfg.grid, f_vals)

    rhs = _collision_rhs(f_up, cfg)
    if cfg.correction_enabled:
        rhs = conservative_correction(rhs)
    explicit = f_up.values + cfg.dt * rhs.values
    if not np.all(np.isfinite(explicit)):
        raise StepFailure("non-finite values after the explicit substep")

    if cfg.epsilon > 0.0:
        mu = make_maxwellian(cfg.grid)
        forcing = cfg.dt * cfg.epsilon * _l_alpha_raw(
            mu.values, cfg.grid, cfg.alpha)
        f_new = _implicit_solve(explicit + forcing, cfg.grid, cfg.alpha,
                                cfg.dt * cfg.epsilon,
                                cfg.max_implicit_iterations)
        big_f = mu.values + f_new
        lf = _l_alpha_raw(big_f, cfg.grid, cfg.alpha)
        qform = float((lf * big_f).sum()) * cfg.grid.cell_measure()
        scale = float((big_f * big_f).sum()) * cfg.grid.cell_measure()
        if qform > 1e-10 * max(scale, 1.0):
            raise StepFailure(
                f"regularizer quadratic form is positive ({qform:.3e})")
    else:
        f_new = explicit
    if not np.all(np.isfinite(f_new)):
        raise StepFailure("non-finite values after the implicit substep")
    return SimState(t=state.t + cfg.dt, f=make_field(cfg.grid, f_new),
                    diagnostics=state.diagnostics)


def _diagnostics_row(t: float, f: Field, cfg: RunConfig,
                     mu: Field) -> DiagnosticsRow:
    grid = cfg.grid
    meas = grid.cell_measure()
    w_k = velocity_weight(grid, 2.0 * cfg.k_diag)
    l2_k = math.sqrt(float((f.values ** 2 * w_k).sum()) * meas)
    w_k0 = velocity_weight(grid, cfg.k0)
    linf = float(np.abs(f.values * w_k0).max())
    big_f = np.maximum(mu.values + f.values, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        flogf = np.where(big_f > 0.0, big_f * np.log(big_f), 0.0)
    entropy = float(flogf.sum()) * meas
    mass, mom, energy = weak_moments(make_field(grid, mu.values + f.values))
    smooth_x = x_sobolev_multiplier(f, cfg.s_x_diag)
    hs_x = math.sqrt(float((smooth_x.values ** 2).sum()) * meas)
    return DiagnosticsRow(t=t, L2_k=l2_k, Linf_k0=linf, entropy=entropy,
                          mass=mass, momx=float(mom[0]), momy=float(mom[1]),
                          momz=float(mom[2]), energy=energy, Hs_x=hs_x)


def _loss_frequency_bound(cfg: RunConfig) -> float:
    """Sup over ball nodes of the discrete loss frequency of the
    reference state (used for the dt guidance warning)."""
    from .collision import loss_part_reference

    grid = cfg.grid
    mu = make_maxwellian(grid)
    ones = make_field(grid, np.ones((grid.n_v,) * 3))
    loss = loss_part_reference(mu, ones, cfg.kernel, cfg.quad)
    return float(np.abs(loss.values).max())


def run(cfg: RunConfig, f0: Field, out_dir: str | None = None) -> RunResult:
    """Integrate to ``t_end``, recording diagnostics and snapshots every
    ``snapshot_every`` steps (plus the initial and final states).

    The initial perturbation must live on the configured grid and be
    supported in the support ball.  On a step failure the partial
    diagnostics and a checkpoint are flushed to ``out_dir`` (when given)
    before the failure propagates.
    """
    if f0.grid != cfg.grid:
        raise UsageError("f0 lives on a different grid than the run config")
    if not np.array_equal(f0.values, mask_to_ball(f0).values):
        raise UsageError("f0 must be supported in the support ball")
    run_warnings: list[str] = []
    nu_max = _loss_frequency_bound(cfg)
    if nu_max > 0.0 and cfg.dt > 0.5 / nu_max:
        message = (f"dt = {cfg.dt} exceeds the stability guidance "
                   f"{0.5 / nu_max:.6g} (loss frequency {nu_max:.6g})")
        warnings.warn(message)
        run_warnings.append(message)

    mu = make_maxwellian(cfg.grid)
    w_k0 = velocity_weight(cfg.grid, cfg.k0)
    n_steps = int(round(cfg.t_end / cfg.dt))
    state = SimState(t=0.0, f=f0)
    rows = [_diagnostics_row(0.0, f0, cfg, mu)]
    snapshots = [(0.0, f0)]
    cutoff_active = 0
    min_f_seen = float((mu.values + f0.values).min())

    def flush(current: SimState):
        if out_dir is None:
            return
        import pathlib

        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        checkpoint_save(current.f, current.t, out / "checkpoint_final")

    for k in range(1, n_steps + 1):
        try:
            state = step(state, cfg)
        except StepFailure:
            state = replace(state, diagnostics=tuple(rows))
            flush(state)
            raise
        sup_weighted = float(np.abs(state.f.values * w_k0).max())
        if cfg.cutoff_enabled and sup_weighted > cfg.delta0:
            cutoff_active += 1
        min_f_seen = min(min_f_seen,
                         float((mu.values + state.f.values).min()))
        if k % cfg.snapshot_every == 0 or k == n_steps:
            rows.append(_diagnostics_row(state.t, state.f, cfg, mu))
            snapshots.append((state.t, state.f))
    state = replace(state, diagnostics=tuple(rows))
    flush(state)
    return RunResult(final=state, snapshots=tuple(snapshots),
                     diagnostics=tuple(rows),
                     cutoff_active_steps=cutoff_active,
                     total_steps=n_steps, min_F=min_f_seen,
                     warnings=tuple(run_warnings))
