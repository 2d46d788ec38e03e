"""Command-line driver: configuration, seeding, dispatch, result emission.

Subcommands: sample | evolve | gibbs | invariance | chaos | universality.
Configuration comes from ``key = value`` lines in an optional ``--config``
file, overridden by command-line flags; the fully resolved configuration is
echoed into every JSON report.  Exit codes: 0 success / statistical PASS,
2 configuration error, 3 numerical failure, 4 statistical FAIL.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .dynamics import DynParams, IntegrationError, default_dt, evolve
from .experiments import (
    NONLINEARITIES,
    chaos_convergence_study,
    invariance_test,
    universality_experiment,
)
from .fields import SpectralField
from .free_field import MuParams, PhaseState, sample_free_field
from .gibbs import ChainOptions, sample_gibbs
from .reporting import (
    provenance,
    trajectory_table,
    write_csv,
    write_field_csv,
    write_json_report,
)
from .wick import WickContext

__all__ = ["RunConfig", "parse_config", "dispatch", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_STATISTICAL = 4


@dataclass
class RunConfig:
    """Fully resolved run configuration (validated before dispatch)."""

    subcommand: str
    n: int = 8
    rho: float = 1.0
    m: int = 1
    dt: float = 0.0              # 0 -> derived default
    T: float = 1.0
    samples: int = 1000
    seed: int = 0
    out: str = "runs"
    workers: int = 1
    record_every: int = 0        # 0 -> auto
    init: str = "mu"             # evolve initial data: mu | zero
    dump_states: bool = False    # evolve: binary snapshots of recorded states
    method: str = "hmc"          # gibbs sampler method
    chains: int = 32
    burn_in: int = 400
    thin: int = 8
    blend: float = 1.0
    drift_tol: float = 1e-3
    z_threshold: float = 3.0
    ell_max: int = 3
    n_list: str = "1,4,8"
    t_eval: float = 0.0
    eps_reg: float = 0.25
    cauchy: bool = True
    eps_list: str = "0.125,0.0625,0.03125"
    s: float = -0.1
    f: str = "sin"

    def validate(self) -> None:
        if self.rho <= 0:
            raise ConfigError("rho must be positive (massless zero mode is not normalizable)")
        if self.n < 0:
            raise ConfigError("n must be nonnegative")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.dt < 0:
            raise ConfigError("dt must be positive (or omitted for the default)")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.method not in ("hmc", "metropolis", "importance"):
            raise ConfigError(f"unknown sampler method {self.method!r}")
        if self.init not in ("mu", "zero"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.f not in NONLINEARITIES:
            raise ConfigError(f"unknown nonlinearity {self.f!r}; "
                              f"choices: {sorted(NONLINEARITIES)}")
        if not 0 < self.blend <= 1:
            raise ConfigError("blend must lie in (0, 1]")
        if (self.subcommand == "invariance" and self.method == "importance"
                and self.T > 0):
            raise ConfigError("invariance needs an unweighted sampler "
                              "(hmc or metropolis)")

    def resolved_dt(self) -> float:
        return self.dt if self.dt > 0 else default_dt(self.n, self.rho)

    def eps_values(self) -> list[float]:
        try:
            return [float(x) for x in self.eps_list.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad eps_list: {exc}") from exc

    def n_values(self) -> list[int]:
        try:
            return [int(x) for x in self.n_list.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad n_list: {exc}") from exc

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}


class ConfigError(ValueError):
    pass


_BOOL_KEYS = {"cauchy", "dump_states"}


def _parse_value(key: str, raw: str):
    target = RunConfig.__dataclass_fields__[key].type
    raw = raw.strip()
    if key in _BOOL_KEYS:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for {key}: {raw!r}")
    if target == "int":
        return int(raw)
    if target == "float":
        return float(raw)
    return raw


def read_config_file(path: str | Path) -> dict:
    """Plain-text ``key = value`` configuration; unknown keys are rejected."""
    known = set(RunConfig.__dataclass_fields__) - {"subcommand"}
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _parse_value(key, raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wicknlw",
        description="Wick-ordered NLW simulation and verification experiments",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--config", type=str, default=None,
                       help="plain-text key = value configuration file")
        p.add_argument("--n", type=int, default=None, help="spectral cutoff")
        p.add_argument("--rho", type=float, default=None, help="mass parameter")
        p.add_argument("--m", type=int, default=None, help="nonlinearity index")
        p.add_argument("--dt", type=float, default=None, help="time step")
        p.add_argument("--T", dest="T", type=float, default=None, help="final time")
        p.add_argument("--samples", type=int, default=None, help="Monte Carlo samples")
        p.add_argument("--seed", type=int, default=None, help="master RNG seed")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="FFT worker threads for batched transforms")

    p = sub.add_parser("sample", help="draw free-measure samples")
    add_common(p)

    p = sub.add_parser("evolve", help="integrate one trajectory")
    add_common(p)
    p.add_argument("--record-every", dest="record_every", type=int, default=None)
    p.add_argument("--init", type=str, default=None, choices=("mu", "zero"))
    p.add_argument("--dump-states", dest="dump_states", action="store_true",
                   default=None, help="also write recorded states to states.npz")

    p = sub.add_parser("gibbs", help="sample the truncated Gibbs measure")
    add_common(p)
    p.add_argument("--method", type=str, default=None,
                   choices=("hmc", "metropolis", "importance"))
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--blend", type=float, default=None)

    p = sub.add_parser("invariance", help="Gibbs invariance z-test")
    add_common(p)
    p.add_argument("--method", type=str, default=None,
                   choices=("hmc", "metropolis", "importance"))
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--blend", type=float, default=None)
    p.add_argument("--drift-tol", dest="drift_tol", type=float, default=None)
    p.add_argument("--z-threshold", dest="z_threshold", type=float, default=None)

    p = sub.add_parser("chaos", help="Wiener chaos moment study")
    add_common(p)
    p.add_argument("--ell-max", dest="ell_max", type=int, default=None)
    p.add_argument("--n-list", dest="n_list", type=str, default=None)
    p.add_argument("--t-eval", dest="t_eval", type=float, default=None)
    p.add_argument("--eps-reg", dest="eps_reg", type=float, default=None)
    p.add_argument("--no-cauchy", dest="cauchy", action="store_false", default=None)

    p = sub.add_parser("universality", help="weak-universality scaling ladder")
    add_common(p)
    p.add_argument("--eps-list", dest="eps_list", type=str, default=None)
    p.add_argument("--s", dest="s", type=float, default=None)
    p.add_argument("--f", dest="f", type=str, default=None)
    return parser


def parse_config(argv: list[str]) -> RunConfig:
    """Resolve defaults < config file < flags into a validated RunConfig."""
    ns = _build_parser().parse_args(argv)
    values = {"subcommand": ns.subcommand}
    if getattr(ns, "config", None):
        values.update(read_config_file(ns.config))
    for key, val in vars(ns).items():
        if key in ("config", "subcommand") or val is None:
            continue
        values[key] = val
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _report_payload(cfg: RunConfig, body: dict) -> dict:
    return {"config": cfg.to_dict(), "provenance": provenance(), **body}


def _run_sample(cfg: RunConfig, outdir: Path) -> int:
    from .dynamics import quadratic_energy

    params = MuParams(cfg.n, cfg.rho, cfg.seed)
    rows = []
    first = None
    for i in range(cfg.samples):
        st = sample_free_field(params, i)
        if first is None:
            first = st
        rows.append([i, st.u.l2_norm_sq(), st.v.l2_norm_sq(), quadratic_energy(st)])
    write_csv(outdir / "samples.csv",
              ["index", "l2_u_sq", "l2_v_sq", "quadratic_energy"], rows)
    write_field_csv(first.u, outdir / "field_u_0.csv")
    mean_l2 = float(np.mean([r[1] for r in rows]))
    write_json_report(outdir / "report.json", _report_payload(cfg, {
        "subcommand": "sample",
        "mean_l2_u_sq": mean_l2,
        "n_samples": cfg.samples,
    }))
    return EXIT_OK


def _run_evolve(cfg: RunConfig, outdir: Path) -> int:
    ctx = WickContext.create(cfg.n, cfg.rho, cfg.m)
    dt = cfg.resolved_dt()
    dyn = DynParams(ctx, dt)
    if cfg.init == "zero":
        state = PhaseState(SpectralField.zeros(cfg.n), SpectralField.zeros(cfg.n),
                           cfg.rho)
    else:
        state = sample_free_field(MuParams(cfg.n, cfg.rho, cfg.seed), 0)
    rec = cfg.record_every or max(1, int(round(cfg.T / dt / 200)))
    traj = evolve(state, cfg.T, dyn, record_every=rec)
    header, rows = trajectory_table(traj, ctx)
    write_csv(outdir / "trajectory.csv", header, rows)
    if cfg.dump_states:
        np.savez(outdir / "states.npz", times=traj.times,
                 u=np.stack([s.u.coeffs for s in traj.states]),
                 v=np.stack([s.v.coeffs for s in traj.states]))
    h = [r[1] for r in rows]
    write_json_report(outdir / "report.json", _report_payload(cfg, {
        "subcommand": "evolve",
        "dt": dt,
        "record_every": rec,
        "energy_initial": h[0],
        "energy_final": h[-1],
        "max_rel_energy_drift": max(abs(x - h[0]) for x in h) / (1 + abs(h[0])),
    }))
    return EXIT_OK


def _chain_opts(cfg: RunConfig) -> ChainOptions:
    return ChainOptions(n_chains=cfg.chains, burn_in=cfg.burn_in,
                        thin=cfg.thin, blend=cfg.blend)


def _run_gibbs(cfg: RunConfig, outdir: Path) -> int:
    from .dynamics import quadratic_energy
    from .gibbs import wick_mass

    ctx = WickContext.create(cfg.n, cfg.rho, cfg.m)
    params = MuParams(cfg.n, cfg.rho, cfg.seed)
    samples, diag = sample_gibbs(params, ctx, cfg.samples, cfg.method,
                                 _chain_opts(cfg))
    rows = []
    for i, s in enumerate(samples):
        rows.append([i, s.wick_potential, s.log_density,
                     wick_mass(s.state.u, ctx), quadratic_energy(s.state),
                     abs(s.state.u.coeff(0, 0)) ** 2,
                     abs(s.state.u.coeff(1, 0)) ** 2,
                     abs(s.state.u.coeff(1, 1)) ** 2])
    write_csv(outdir / "gibbs_samples.csv",
              ["index", "wick_potential", "log_density", "wick_mass",
               "quadratic_energy", "mode_sq_0_0", "mode_sq_1_0", "mode_sq_1_1"],
              rows)
    write_json_report(outdir / "report.json", _report_payload(cfg, {
        "subcommand": "gibbs",
        "diagnostics": diag,
    }))
    return EXIT_OK


def _run_invariance(cfg: RunConfig, outdir: Path) -> int:
    ctx = WickContext.create(cfg.n, cfg.rho, cfg.m)
    dyn = DynParams(ctx, cfg.resolved_dt())
    report = invariance_test(dyn, cfg.T, cfg.samples, cfg.seed,
                             method=cfg.method, opts=_chain_opts(cfg),
                             z_threshold=cfg.z_threshold,
                             drift_tol=cfg.drift_tol)
    write_csv(outdir / "invariance.csv",
              ["observable", "mean_t0", "stderr_t0", "mean_T", "stderr_T",
               "z_score"],
              [[r["observable"], r["mean_t0"], r["stderr_t0"], r["mean_T"],
                r["stderr_T"], r["z_score"]] for r in report.observables])
    write_json_report(outdir / "report.json", _report_payload(cfg, {
        "subcommand": "invariance",
        "report": report.to_dict(),
        "passed": report.passed,
    }))
    return EXIT_OK if report.passed else EXIT_STATISTICAL


def _run_chaos(cfg: RunConfig, outdir: Path) -> int:
    report = chaos_convergence_study(cfg.ell_max, cfg.n_values(), cfg.rho,
                                     cfg.t_eval, cfg.eps_reg, cfg.samples,
                                     cfg.seed, cauchy=cfg.cauchy)
    write_csv(outdir / "chaos_moments.csv",
              ["ell", "n_max", "mode_1", "mode_2", "mc_estimate", "stderr",
               "analytic"],
              [[r["ell"], r["n_max"], r["mode"][0], r["mode"][1],
                r["mc_estimate"], r["stderr"], r["analytic"]]
               for r in report.moment_rows])
    write_csv(outdir / "chaos_cross.csv",
              ["ell", "n_max", "mode_a1", "mode_a2", "mode_b1", "mode_b2",
               "mean_real", "stderr_real", "mean_imag", "stderr_imag"],
              [[r["ell"], r["n_max"], r["mode_a"][0], r["mode_a"][1],
                r["mode_b"][0], r["mode_b"][1], r["mean_real"],
                r["stderr_real"], r["mean_imag"], r["stderr_imag"]]
               for r in report.cross_rows])
    if report.cauchy_rows:
        write_csv(outdir / "chaos_cauchy.csv",
                  ["ell", "n_max", "distance", "stderr"],
                  [[r["ell"], r["n_max"], r["distance"], r["stderr"]]
                   for r in report.cauchy_rows])
    write_json_report(outdir / "report.json", _report_payload(cfg, {
        "subcommand": "chaos",
        "report": report.to_dict(),
    }))
    return EXIT_OK


def _run_universality(cfg: RunConfig, outdir: Path) -> int:
    report = universality_experiment(NONLINEARITIES[cfg.f], cfg.eps_values(),
                                     cfg.rho, cfg.s, cfg.T, cfg.resolved_dt(),
                                     cfg.seed)
    write_csv(outdir / "universality.csv",
              ["eps", "n_cut", "rho_eps", "sup_distance", "failed"],
              [[r["eps"], r["n_cut"], r["rho_eps"], r["sup_distance"],
                r["failed"]] for r in report.rows])
    dists = report.distances()
    monotone = all(a > b for a, b in zip(dists, dists[1:]))
    write_json_report(outdir / "report.json", _report_payload(cfg, {
        "subcommand": "universality",
        "report": report.to_dict(),
        "strictly_decreasing": monotone,
    }))
    if any(r["failed"] for r in report.rows):
        return EXIT_NUMERICAL
    return EXIT_OK if monotone else EXIT_STATISTICAL


_RUNNERS = {
    "sample": _run_sample,
    "evolve": _run_evolve,
    "gibbs": _run_gibbs,
    "invariance": _run_invariance,
    "chaos": _run_chaos,
    "universality": _run_universality,
}


def dispatch(cfg: RunConfig) -> int:
    """Run one subcommand, writing its artifacts under cfg.out."""
    outdir = Path(cfg.out) / cfg.subcommand
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        with sfft.set_workers(cfg.workers):
            return _RUNNERS[cfg.subcommand](cfg, outdir)
    except IntegrationError as exc:
        write_json_report(outdir / "error.json", _report_payload(cfg, {
            "error": "integration_failure",
            "message": str(exc),
            "time": exc.time,
        }))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
