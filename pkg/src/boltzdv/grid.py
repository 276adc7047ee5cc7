"""Truncated velocity grid, optional 1D spatial torus, fields, and transforms.

Velocity space is a cube ``[-R, R]^3`` sampled at ``n_v`` half-cell-offset
nodes per axis (``-R + (j + 1/2) h`` with ``h = 2R/n_v``), so no node sits at
the origin and the node set is symmetric under all sign flips and axis
permutations.  Space, when present, is a unit-length periodic interval with
``n_x`` cells of size ``1/n_x``.

Fields carry distribution values indexed ``(x, v1, v2, v3)`` as read-only
64-bit arrays.  Fractional-derivative weights use the periodic discrete
Fourier transform of the box with wavenumbers ``2 pi * fftfreq``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import NumericalError, UsageError

__all__ = [
    "GridSpec",
    "Field",
    "make_field",
    "make_maxwellian",
    "mask_to_ball",
    "sobolev_multiplier",
    "x_sobolev_multiplier",
    "interpolate",
    "velocity_weight",
    "checkpoint_save",
    "checkpoint_load",
]


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the velocity box and the spatial torus.

    Attributes
    ----------
    R : float
        Velocity-box half-width.
    n_v : int
        Nodes per velocity axis (even, >= 8); spacing ``h = 2R/n_v``.
    d_v : int
        Velocity dimension (fixed at 3).
    n_x : int
        Spatial cells on the unit torus (1 = spatially homogeneous).
    support_radius : float
        Radius of the ball carrying collision inputs; must satisfy
        ``support_radius <= R/sqrt(2)`` so post-collision velocities of
        supported pairs stay inside the box.  Defaults to ``R/sqrt(2)``.
    """

    R: float
    n_v: int
    d_v: int = 3
    n_x: int = 1
    support_radius: float | None = None

    def __post_init__(self):
        if not self.R > 0:
            raise UsageError(f"R must be positive, got {self.R}")
        if self.n_v % 2 != 0 or self.n_v < 8:
            raise UsageError(f"n_v must be even and >= 8, got {self.n_v}")
        if self.d_v != 3:
            raise UsageError("velocity dimension is fixed at 3")
        if self.n_x < 1:
            raise UsageError(f"n_x must be >= 1, got {self.n_x}")
        max_r = self.R / math.sqrt(2.0)
        if self.support_radius is None:
            object.__setattr__(self, "support_radius", max_r)
        if self.support_radius > max_r * (1 + 1e-12) or self.support_radius <= 0:
            raise UsageError(
                f"support_radius must lie in (0, R/sqrt(2)] = (0, {max_r}], "
                f"got {self.support_radius}")

    @property
    def h(self) -> float:
        """Velocity node spacing."""
        return 2.0 * self.R / self.n_v

    @property
    def dx(self) -> float:
        """Spatial cell size on the unit torus."""
        return 1.0 / self.n_x

    @cached_property
    def v_nodes(self) -> np.ndarray:
        """1D node coordinates ``-R + (j + 1/2) h``, shape ``(n_v,)``."""
        out = -self.R + (np.arange(self.n_v) + 0.5) * self.h
        out.flags.writeable = False
        return out

    @cached_property
    def v_squared(self) -> np.ndarray:
        """``|v|^2`` on the velocity lattice, shape ``(n_v, n_v, n_v)``."""
        v = self.v_nodes
        out = (v[:, None, None] ** 2 + v[None, :, None] ** 2
               + v[None, None, :] ** 2)
        out.flags.writeable = False
        return out

    @cached_property
    def ball_mask(self) -> np.ndarray:
        """Boolean mask of nodes inside the support ball."""
        out = self.v_squared <= self.support_radius ** 2
        out.flags.writeable = False
        return out

    def cell_measure(self) -> float:
        """Phase-space cell measure ``dx * h^3`` (``dx = 1`` when homogeneous)."""
        return self.dx * self.h ** 3


@dataclass(frozen=True)
class Field:
    """A distribution sampled on a grid; values are read-only float64.

    ``values`` has shape ``(n_x, n_v, n_v, n_v)``.  Construction rejects
    non-finite entries.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        expected = (self.grid.n_x, self.grid.n_v, self.grid.n_v, self.grid.n_v)
        if self.values.shape != expected:
            raise UsageError(
                f"field shape {self.values.shape} != grid shape {expected}")
        if self.values.dtype != np.float64:
            raise UsageError("field values must be float64")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("field contains non-finite entries")
        if self.values.flags.writeable:
            v = np.ascontiguousarray(self.values)
            v.flags.writeable = False
            object.__setattr__(self, "values", v)


def make_field(grid: GridSpec, values: np.ndarray) -> Field:
    """Wrap an array as a Field, accepting velocity-only shape when n_x = 1."""
    values = np.asarray(values, dtype=np.float64)
    n = grid.n_v
    if values.shape == (n, n, n):
        if grid.n_x != 1:
            raise UsageError(
                "velocity-only values require a homogeneous grid (n_x = 1)")
        values = values.reshape(1, n, n, n)
    return Field(grid=grid, values=values.copy())


def make_maxwellian(grid: GridSpec) -> Field:
    """The discrete equilibrium: a unit-mass Gaussian on the velocity lattice.

    Samples ``(2 pi)^(-3/2) exp(-|v|^2 / 2)`` at the nodes and rescales so
    the discrete mass ``sum(mu) * h^3`` equals 1 exactly (to rounding); the
    discrete momentum vanishes by the half-cell symmetry of the node set.
    The same velocity profile fills every spatial cell.
    """
    raw = (2.0 * math.pi) ** -1.5 * np.exp(-0.5 * grid.v_squared)
    h3 = grid.h ** 3
    # Two normalization passes drive the discrete mass to within one ulp of 1.
    for _ in range(2):
        raw = raw / (raw.sum() * h3)
    values = np.broadcast_to(raw, (grid.n_x,) + raw.shape)
    return make_field(grid, np.array(values))


def mask_to_ball(f: Field) -> Field:
    """Restrict a field to the support ball (zero outside).

    Collision evaluation is defined for inputs supported in the ball of
    radius ``support_radius``; this helper realizes that restriction.
    """
    vals = f.values * f.grid.ball_mask[None, :, :, :]
    return Field(grid=f.grid, values=vals)


def velocity_weight(grid: GridSpec, exponent: float) -> np.ndarray:
    """Polynomial weight ``<v>^exponent = (1 + |v|^2)^(exponent/2)`` on the lattice."""
    return (1.0 + grid.v_squared) ** (0.5 * exponent)


def _velocity_symbol(grid: GridSpec, m: float) -> np.ndarray:
    xi = 2.0 * math.pi * np.fft.fftfreq(grid.n_v, d=grid.h)
    xi2 = xi[:, None, None] ** 2 + xi[None, :, None] ** 2 + xi[None, None, :] ** 2
    return (1.0 + xi2) ** (0.5 * m)


def sobolev_multiplier(f: Field, m: float) -> Field:
    """Apply the fractional-derivative weight ``(1 + |xi|^2)^(m/2)`` in velocity.

    Uses the periodic discrete Fourier transform of the velocity box with
    wavenumbers ``xi = 2 pi fftfreq(n_v, h)``; acts independently on each
    spatial cell.  ``m = 0`` is the identity.
    """
    symbol = _velocity_symbol(f.grid, m)
    spec = np.fft.fftn(f.values, axes=(1, 2, 3))
    spec *= symbol[None, :, :, :]
    out = np.fft.ifftn(spec, axes=(1, 2, 3)).real
    return Field(grid=f.grid, values=out)


def x_sobolev_multiplier(f: Field, m: float) -> Field:
    """Apply ``(1 - Laplacian_x)^(m/2)`` along the spatial torus axis.

    The unit-length torus has wavenumbers ``xi = 2 pi k``; with ``n_x = 1``
    only the zero mode exists and the operation is the identity.
    """
    if f.grid.n_x == 1:
        return f
    xi = 2.0 * math.pi * np.fft.fftfreq(f.grid.n_x, d=f.grid.dx)
    symbol = (1.0 + xi ** 2) ** (0.5 * m)
    spec = np.fft.fft(f.values, axis=0)
    spec *= symbol[:, None, None, None]
    out = np.fft.ifft(spec, axis=0).real
    return Field(grid=f.grid, values=out)


def interpolate(f: Field, x_index: int, v) -> float:
    """Trilinear interpolation of a field at an off-grid velocity.

    Returns 0 for points outside the node lattice's convex hull extended by
    one cell (zero extension outside the box).
    """
    g = f.grid
    v = np.asarray(v, dtype=float)
    t = (v - (-g.R + 0.5 * g.h)) / g.h
    i0 = np.floor(t).astype(np.int64)
    frac = t - i0
    vals = f.values[x_index]
    n = g.n_v
    out = 0.0
    for a in (0, 1):
        wa = (1.0 - frac[0]) if a == 0 else frac[0]
        ia = i0[0] + a
        if ia < 0 or ia >= n or wa == 0.0:
            continue
        for b in (0, 1):
            wb = (1.0 - frac[1]) if b == 0 else frac[1]
            ib = i0[1] + b
            if ib < 0 or ib >= n or wb == 0.0:
                continue
            for c in (0, 1):
                wc = (1.0 - frac[2]) if c == 0 else frac[2]
                ic = i0[2] + c
                if ic < 0 or ic >= n or wc == 0.0:
                    continue
                out += wa * wb * wc * vals[ia, ib, ic]
    return float(out)


_CHECKPOINT_VERSION = 1


def config_hash(text: str) -> str:
    """Stable short hash used to stamp outputs with their configuration."""
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def checkpoint_save(f: Field, t: float, path_base, cfg_hash: str = "") -> None:
    """Write a field checkpoint: raw little-endian float64 bytes + text sidecar.

    ``path_base`` gains the extensions ``.bin`` (C-order array bytes) and
    ``.meta`` (grid parameters, time, configuration hash).
    """
    base = Path(path_base)
    data = np.ascontiguousarray(f.values, dtype="<f8")
    base.with_suffix(".bin").write_bytes(data.tobytes(order="C"))
    g = f.grid
    meta = "\n".join([
        f"format_version = {_CHECKPOINT_VERSION}",
        f"R = {g.R!r}",
        f"n_v = {g.n_v}",
        f"d_v = {g.d_v}",
        f"n_x = {g.n_x}",
        f"support_radius = {g.support_radius!r}",
        f"t = {t!r}",
        f"config_hash = {cfg_hash}",
        "dtype = <f8",
        "order = C",
        f"shape = {g.n_x},{g.n_v},{g.n_v},{g.n_v}",
    ]) + "\n"
    base.with_suffix(".meta").write_text(meta)


def checkpoint_load(path_base) -> tuple[Field, float]:
    """Load a checkpoint written by :func:`checkpoint_save`.

    Returns the field and its time stamp.
    """
    base = Path(path_base)
    meta_path = base.with_suffix(".meta")
    bin_path = base.with_suffix(".bin")
    if not meta_path.exists() or not bin_path.exists():
        raise UsageError(f"checkpoint not found at {base}")
    meta: dict[str, str] = {}
    for line in meta_path.read_text().splitlines():
        if "=" in line:
            key, _, val = line.partition("=")
            meta[key.strip()] = val.strip()
    grid = GridSpec(R=float(meta["R"]), n_v=int(meta["n_v"]),
                    d_v=int(meta.get("d_v", 3)), n_x=int(meta["n_x"]),
                    support_radius=float(meta["support_radius"]))
    shape = tuple(int(p) for p in meta["shape"].split(","))
    raw = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    if raw.size != int(np.prod(shape)):
        raise UsageError(
            f"checkpoint payload has {raw.size} entries, expected {np.prod(shape)}")
    values = raw.reshape(shape).astype(np.float64)
    return Field(grid=grid, values=values), float(meta["t"])
