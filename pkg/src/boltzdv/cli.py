"""Command-line entry point: configuration parsing and report/series emission.

Subcommands
-----------
``simulate``
    Integrate the perturbative kinetic equation and write the norm series
    (CSV), per-snapshot checkpoints, and a run summary (JSON).
``verify``
    Run the requested quadrature verification cases and write one JSON
    report per case; exits 0 only if every case passes.
``degiorgi``
    Evaluate the level-set ladder arithmetic (derived constants, threshold,
    comparison certificate) and, when a stored trajectory is supplied, the
    empirical level-set energies along the nested thresholds.
``fit-decay``
    Fit a decay rate to a stored norm series (CSV column).

Configuration is a flat text file of ``namespace.key = value`` lines
(``#`` comments allowed); every output file embeds the fully resolved
configuration so results are reproducible from the artifact alone.  Exit
codes: 0 success, 1 a requested check failed, 2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .collision import QuadratureSpec
from .degiorgi import (
    certify_comparison,
    derive_constants,
    empirical_ladder,
    fit_recursion_constant,
    threshold_K0,
    threshold_branches,
)
from .dynamics import DIAG_COLUMNS, RunConfig, run
from .errors import (
    BoltzdvError,
    ConfigError,
    QuadratureError,
    StepFailure,
    UsageError,
)
from .functionals import EnergySpec
from .grid import (
    Field,
    GridSpec,
    checkpoint_load,
    checkpoint_save,
    make_field,
    mask_to_ball,
    velocity_weight,
)
from .kernel import KernelSpec
from .verify import CASE_IDS, fit_decay, verify_identity

__all__ = [
    "CliInvocation",
    "CONFIG_REGISTRY",
    "anisotropic_perturbation",
    "config_reference",
    "load_config",
    "run_cli",
    "main",
]


# --------------------------------------------------------------------------
# configuration registry
# --------------------------------------------------------------------------

# key -> (type tag, default, help); type tags: float, int, bool, str,
# float_or_auto ("auto" selects the documented derived default)
CONFIG_REGISTRY: dict[str, tuple[str, object, str]] = {
    "kernel.gamma": ("float", 0.0, "velocity-kernel power (-3 < gamma <= 0)"),
    "kernel.s": ("float", 0.25, "angular singularity order (0 < s < 1)"),
    "kernel.eta": ("float", 0.0, "angular tempering offset (>= 0)"),
    "kernel.s_star": ("float_or_auto", None,
                      "tempering target order; auto = min(s, 1/2)"),
    "kernel.theta_min": ("float", 1e-3, "angular truncation floor"),
    "kernel.kappa": ("float", 1.0, "angular kernel amplitude"),
    "grid.R": ("float", 6.0, "velocity-box half-width"),
    "grid.n_v": ("int", 16, "velocity nodes per axis (even, >= 8)"),
    "grid.n_x": ("int", 1, "spatial cells (1 = homogeneous)"),
    "quad.n_theta": ("int", 8, "polar quadrature nodes (>= 8)"),
    "quad.n_phi": ("int", 4, "azimuthal quadrature nodes (>= 4)"),
    "quad.rule": ("str", "midpoint-graded",
                  "angular rule: midpoint-graded | uniform"),
    "run.dt": ("float", 0.02, "time step"),
    "run.t_end": ("float", 1.0, "final time"),
    "run.epsilon": ("float", 0.0, "velocity-regularizer strength in [0, 1]"),
    "run.alpha": ("float", 5.0, "regularizer weight power"),
    "run.k0": ("float", 14.0, "sup-norm cutoff weight exponent"),
    "run.delta0": ("float", 1e-4, "sup-norm cutoff threshold"),
    "run.cutoff_enabled": ("bool", True, "apply the sup-norm cutoff"),
    "run.correction_enabled": ("bool", True,
                               "apply the conservative moment correction"),
    "run.snapshot_every": ("int", 1, "steps between recorded snapshots"),
    "run.k_diag": ("float", 14.0, "weight exponent of the recorded L2 norm"),
    "run.s_x_diag": ("float", 0.5, "order of the recorded spatial norm"),
    "init.amplitude": ("float", 1e-8,
                       "weighted sup norm of the built initial state"),
    "init.weight_exponent": ("float", 14.0,
                             "weight exponent of the normalization"),
    "init.checkpoint": ("str", "",
                        "checkpoint path base to resume from (overrides the "
                        "built initial state)"),
    "degiorgi.p": ("float", 1.1, "Lebesgue exponent of the ladder (1 < p < 2)"),
    "degiorgi.r_star": ("float", 3.0, "interpolation exponent r*"),
    "degiorgi.xi_star": ("float", 4.0, "interpolation exponent xi*"),
    "degiorgi.C": ("float", 1.0, "recurrence constant"),
    "degiorgi.E0": ("float", 1.0, "initial ladder energy"),
    "degiorgi.K0": ("float_or_auto", None,
                    "comparison threshold; auto = derived threshold"),
    "degiorgi.k_max": ("int", 30, "deepest certified rung"),
    "degiorgi.l": ("float", 14.0, "level-set weight exponent"),
    "degiorgi.trajectory_dir": ("str", "",
                                "directory of snapshot checkpoints for the "
                                "empirical ladder (empty = arithmetic only)"),
    "energy.p": ("float", 1.1, "Lebesgue exponent of the smoothed term"),
    "energy.s_dd": ("float", 0.01, "spatial smoothing order"),
    "energy.C0": ("float", 1.0, "normalizing constant of the smoothed term"),
    "fit.input": ("str", "", "CSV series to fit (as written by simulate)"),
    "fit.column": ("str", "L2_k", "series column to fit"),
    "fit.model": ("str", "exponential", "decay model: exponential | algebraic"),
    "fit.t_min": ("float_or_auto", None, "window start; auto = full series"),
    "fit.t_max": ("float_or_auto", None, "window end; auto = full series"),
    "fit.min_r2": ("float", 0.0,
                   "fail (exit 1) when the fit determination falls below"),
}

_BOOL_WORDS = {"true": True, "1": True, "yes": True,
               "false": False, "0": False, "no": False}


def _coerce(key: str, raw: str):
    tag = CONFIG_REGISTRY[key][0]
    raw = raw.strip()
    try:
        if tag == "float":
            return float(raw)
        if tag == "int":
            return int(raw)
        if tag == "bool":
            return _BOOL_WORDS[raw.lower()]
        if tag == "float_or_auto":
            return None if raw.lower() == "auto" else float(raw)
        return raw
    except (ValueError, KeyError):
        raise ConfigError(
            f"config key '{key}': cannot parse {raw!r} as {tag}") from None


def load_config(path: str | None) -> dict:
    """Resolve the configuration: registry defaults overridden by the file.

    The file is flat ``key = value`` text with ``#`` comments; unknown or
    unparseable keys raise a usage error naming the key.
    """
    resolved = {key: default for key, (_, default, _) in
                CONFIG_REGISTRY.items()}
    if path is None:
        return resolved
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    for line_no, line in enumerate(p.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(
                f"config line {line_no} is not 'key = value': {stripped!r}")
        if key not in CONFIG_REGISTRY:
            raise ConfigError(f"unknown config key '{key}' (line {line_no})")
        resolved[key] = _coerce(key, value)
    return resolved


def config_reference() -> str:
    """Generated reference page: every key with its type and default."""
    lines = ["# Configuration reference", "",
             "key | type | default | meaning", "--- | --- | --- | ---"]
    for key in sorted(CONFIG_REGISTRY):
        tag, default, help_text = CONFIG_REGISTRY[key]
        shown = "auto" if default is None else repr(default)
        lines.append(f"{key} | {tag} | {shown} | {help_text}")
    return "\n".join(lines) + "\n"


def _echo_lines(config: dict) -> list[str]:
    out = []
    for key in sorted(config):
        value = config[key]
        shown = "auto" if value is None else repr(value)
        out.append(f"{key} = {shown}")
    return out


def _config_json(config: dict) -> dict:
    return {key: ("auto" if value is None else value)
            for key, value in sorted(config.items())}


# --------------------------------------------------------------------------
# model construction from the resolved configuration
# --------------------------------------------------------------------------


def _build_kernel(cfg: dict) -> KernelSpec:
    return KernelSpec(gamma=cfg["kernel.gamma"], s=cfg["kernel.s"],
                      eta=cfg["kernel.eta"], s_star=cfg["kernel.s_star"],
                      theta_min=cfg["kernel.theta_min"],
                      kappa=cfg["kernel.kappa"])


def _build_grid(cfg: dict) -> GridSpec:
    return GridSpec(R=cfg["grid.R"], n_v=cfg["grid.n_v"], n_x=cfg["grid.n_x"])


def _build_quad(cfg: dict) -> QuadratureSpec:
    return QuadratureSpec(n_theta=cfg["quad.n_theta"],
                          n_phi=cfg["quad.n_phi"], rule=cfg["quad.rule"])


def anisotropic_perturbation(grid: GridSpec, amplitude: float,
                             seed: int, weight_exponent: float = 14.0) -> Field:
    """Seeded smooth initial perturbation with no conserved component.

    Builds a sum of three Gaussian bumps at random centers inside the
    support ball (anisotropic by construction), removes the discrete
    conserved modes exactly with a ball-supported correction (so the
    conserved-mode projection of the result is zero to rounding), and
    scales the weighted sup norm ``max |<v>^k f|`` to ``amplitude``.
    """
    if not amplitude > 0.0:
        raise UsageError(f"amplitude must be positive, got {amplitude}")
    rng = np.random.default_rng(seed)
    v = grid.v_nodes
    pts = np.stack(np.meshgrid(v, v, v, indexing="ij"), axis=-1)
    vals = np.zeros((grid.n_v,) * 3)
    for _ in range(3):
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        center = direction * 0.4 * grid.support_radius * rng.random() ** (1 / 3)
        width = rng.uniform(0.6, 1.0)
        amp = rng.uniform(0.5, 1.0)
        d2 = ((pts - center) ** 2).sum(axis=-1)
        vals += amp * np.exp(-0.5 * d2 / width ** 2)
    full = np.broadcast_to(vals, (grid.n_x,) + vals.shape).copy()
    if grid.n_x > 1:
        phase = 2.0 * math.pi * np.arange(grid.n_x) / grid.n_x
        full *= (1.0 + 0.5 * np.cos(phase))[:, None, None, None]
    f = mask_to_ball(make_field(grid, full))

    # Ball-supported conserved-mode removal: subtract the combination of
    # masked polynomial-Gaussian modes that zeroes the five discrete
    # conserved integrals, leaving the projection exactly zero.
    vsq = grid.v_squared
    mu_ball = grid.ball_mask * np.exp(-0.5 * vsq)
    polys = np.stack([np.ones_like(vsq), pts[..., 0], pts[..., 1],
                      pts[..., 2], vsq])
    modes = polys * mu_ball              # (5, n, n, n) ball-supported basis
    moments = np.array([(f.values.sum(axis=0) * p).sum() for p in polys])
    gram = np.einsum("iabc,jabc->ij", polys, modes) * grid.n_x
    coef = np.linalg.solve(gram, moments)
    corrected = f.values - np.einsum("i,iabc->abc", coef, modes)[None]
    w = velocity_weight(grid, weight_exponent)
    sup = float(np.abs(corrected * w).max())
    if sup == 0.0:
        raise UsageError("degenerate initial state: zero after projection")
    return make_field(grid, corrected * (amplitude / sup))


# --------------------------------------------------------------------------
# output writers
# --------------------------------------------------------------------------


def _format_val(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_series_csv(path: Path, columns, rows, config: dict) -> None:
    lines = [f"# {line}" for line in _echo_lines(config)]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_format_val(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _read_series_csv(path: Path) -> tuple[list[str], list[list[float]]]:
    if not path.is_file():
        raise UsageError(f"series file not found: {path}")
    header: list[str] | None = None
    rows: list[list[float]] = []
    for line in path.read_text().splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if header is None:
            header = [c.strip() for c in stripped.split(",")]
            continue
        try:
            rows.append([float(c) for c in stripped.split(",")])
        except ValueError:
            raise UsageError(
                f"malformed numeric row in {path}: {stripped!r}") from None
    if header is None:
        raise UsageError(f"series file has no header row: {path}")
    return header, rows


# --------------------------------------------------------------------------
# subcommand drivers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CliInvocation:
    """A parsed command line: subcommand, config path, output dir, seed,
    and (verify only) the requested case list."""

    subcommand: str
    config_path: str | None = None
    output_dir: str = "out"
    seed: int = 0
    cases: tuple[str, ...] = ()


def _cmd_simulate(inv: CliInvocation, cfg: dict, out: Path) -> int:
    kernel = _build_kernel(cfg)
    grid = _build_grid(cfg)
    quad = _build_quad(cfg)
    run_cfg = RunConfig(
        kernel=kernel, grid=grid, dt=cfg["run.dt"], t_end=cfg["run.t_end"],
        quad=quad, epsilon=cfg["run.epsilon"], alpha=cfg["run.alpha"],
        k0=cfg["run.k0"], delta0=cfg["run.delta0"],
        cutoff_enabled=cfg["run.cutoff_enabled"],
        correction_enabled=cfg["run.correction_enabled"],
        snapshot_every=cfg["run.snapshot_every"], k_diag=cfg["run.k_diag"],
        s_x_diag=cfg["run.s_x_diag"])
    if cfg["init.checkpoint"]:
        f0, t0 = checkpoint_load(cfg["init.checkpoint"])
        if f0.grid != grid:
            raise UsageError(
                "checkpoint grid does not match the configured grid")
        del t0
    else:
        f0 = anisotropic_perturbation(grid, cfg["init.amplitude"], inv.seed,
                                      cfg["init.weight_exponent"])
    result = run(run_cfg, f0, out_dir=str(out))
    _write_series_csv(out / "series.csv", DIAG_COLUMNS,
                      [row.as_tuple() for row in result.diagnostics], cfg)
    for index, (t, f) in enumerate(result.snapshots):
        checkpoint_save(f, t, out / f"snapshot_{index:04d}")
    summary = {
        "config": _config_json(cfg),
        "seed": inv.seed,
        "total_steps": result.total_steps,
        "cutoff_active_steps": result.cutoff_active_steps,
        "min_F": result.min_F,
        "final_time": result.final.t,
        "snapshots": len(result.snapshots),
        "warnings": list(result.warnings),
    }
    _write_json(out / "run_summary.json", summary)
    print(f"simulate: {result.total_steps} steps to t = "
          f"{result.final.t:.17g}, {len(result.snapshots)} snapshots "
          f"-> {out}")
    return 0


def _cmd_verify(inv: CliInvocation, cfg: dict, out: Path) -> int:
    kernel = _build_kernel(cfg)
    cases = inv.cases if inv.cases else tuple(CASE_IDS)
    all_passed = True
    for case in cases:
        report = verify_identity(case, kernel=kernel,
                                 resolution={"seed": inv.seed})
        payload = dict(report.to_dict())
        payload["config"] = _config_json(cfg)
        _write_json(out / f"verify_{case}.json", payload)
        status = "PASS" if report.passed else "FAIL"
        print(f"{case}: {status} (error {report.measured_error:.6g}, "
              f"tolerance {report.tolerance:.6g})")
        all_passed = all_passed and report.passed
    return 0 if all_passed else 1


def _load_trajectory(directory: str) -> list[tuple[float, Field]]:
    base = Path(directory)
    metas = sorted(base.glob("snapshot_*.meta"))
    if not metas:
        raise UsageError(f"no snapshot checkpoints found in {directory}")
    snaps = []
    for meta in metas:
        f, t = checkpoint_load(meta.with_suffix(""))
        snaps.append((t, f))
    return snaps


def _cmd_degiorgi(inv: CliInvocation, cfg: dict, out: Path) -> int:
    params = derive_constants(cfg["degiorgi.p"], cfg["degiorgi.r_star"],
                              cfg["degiorgi.xi_star"], C=cfg["degiorgi.C"])
    e0 = cfg["degiorgi.E0"]
    threshold = threshold_K0(e0, params)
    k0 = threshold if cfg["degiorgi.K0"] is None else cfg["degiorgi.K0"]
    cert = certify_comparison(e0, k0, params, k_max=cfg["degiorgi.k_max"])
    payload = {
        "config": _config_json(cfg),
        "beta": list(params.beta),
        "a": list(params.a),
        "q0": params.q0,
        "threshold_K0": threshold,
        "K0": k0,
        "certificate": {
            "passed": cert.passed,
            "k_max": len(cert.lhs),
            "max_bound_ratio": max(
                (l / r for l, r in zip(cert.lhs, cert.rhs) if r > 0.0),
                default=0.0),
        },
    }
    failed = not cert.passed
    if cfg["degiorgi.trajectory_dir"]:
        snaps = _load_trajectory(cfg["degiorgi.trajectory_dir"])
        ell = cfg["degiorgi.l"]
        grid = snaps[0][1].grid
        w = velocity_weight(grid, ell)
        sup0 = float(np.abs(snaps[0][1].values * w).max())
        branches = threshold_branches(e0, params, sup0)
        espec = EnergySpec(p=cfg["energy.p"], s_dd=cfg["energy.s_dd"],
                           C0=cfg["energy.C0"], l=ell,
                           gamma=cfg["kernel.gamma"], s=cfg["kernel.s"])
        series = empirical_ladder(snaps, branches["K0"], ell, espec,
                                  k_max=cfg["degiorgi.k_max"])
        fitted_c = fit_recursion_constant(series, params)
        payload["empirical"] = {
            "threshold_branches": branches,
            "levels": list(series.levels),
            "energies": list(series.energies),
            "zero_level": series.zero_level,
            "fitted_C": fitted_c,
        }
        if series.zero_level is None:
            failed = True
    _write_json(out / "degiorgi.json", payload)
    status = "FAIL" if failed else "PASS"
    print(f"degiorgi: {status} (threshold {threshold:.6g}, K0 {k0:.6g}, "
          f"rungs {len(cert.lhs)})")
    return 1 if failed else 0


def _cmd_fit_decay(inv: CliInvocation, cfg: dict, out: Path) -> int:
    if not cfg["fit.input"]:
        raise UsageError("config key 'fit.input': a series file is required")
    header, rows = _read_series_csv(Path(cfg["fit.input"]))
    column = cfg["fit.column"]
    if column not in header or "t" not in header:
        raise UsageError(
            f"config key 'fit.column': column {column!r} not in series "
            f"header {header}")
    t_idx, y_idx = header.index("t"), header.index(column)
    series = [(row[t_idx], row[y_idx]) for row in rows]
    rate, r2 = fit_decay(series, cfg["fit.model"],
                         t_min=cfg["fit.t_min"], t_max=cfg["fit.t_max"])
    payload = {
        "config": _config_json(cfg),
        "column": column,
        "model": cfg["fit.model"],
        "n_samples": len(series),
        "rate": rate,
        "r2": r2,
    }
    _write_json(out / "fit.json", payload)
    passed = r2 >= cfg["fit.min_r2"]
    status = "PASS" if passed else "FAIL"
    print(f"fit-decay: {status} (model {cfg['fit.model']}, rate {rate:.6g}, "
          f"r2 {r2:.9g})")
    return 0 if passed else 1


_COMMANDS = {
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "degiorgi": _cmd_degiorgi,
    "fit-decay": _cmd_fit_decay,
}


def run_cli(invocation: CliInvocation) -> int:
    """Execute one parsed invocation; returns the process exit code."""
    try:
        if invocation.subcommand not in _COMMANDS:
            raise UsageError(
                f"unknown subcommand {invocation.subcommand!r}; expected one "
                f"of {sorted(_COMMANDS)}")
        config = load_config(invocation.config_path)
        out = Path(invocation.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(
                f"output directory {out} is not writable: {exc}") from None
        return _COMMANDS[invocation.subcommand](invocation, config, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, StepFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except BoltzdvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="boltzdv",
        description="Deterministic kinetic-equation toolbox: simulation, "
                    "quadrature verification, level-set ladder certification, "
                    "decay fitting.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_text in (
            ("simulate", "integrate the perturbative equation"),
            ("verify", "run quadrature verification cases"),
            ("degiorgi", "certify the level-set energy ladder"),
            ("fit-decay", "fit a decay rate to a stored series")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, metavar="PATH",
                       help="flat key = value configuration file")
        p.add_argument("--out", default="out", metavar="DIR",
                       help="output directory (created if absent)")
        p.add_argument("--seed", type=int, default=0, metavar="N",
                       help="random seed for sampled inputs")
        if name == "verify":
            p.add_argument("--cases", default="", metavar="LIST",
                           help="comma-separated case ids (default: all)")
    args = parser.parse_args(argv)
    cases = tuple(c.strip() for c in getattr(args, "cases", "").split(",")
                  if c.strip())
    invocation = CliInvocation(subcommand=args.subcommand,
                               config_path=args.config,
                               output_dir=args.out, seed=args.seed,
                               cases=cases)
    return run_cli(invocation)


if __name__ == "__main__":
    sys.exit(main())
