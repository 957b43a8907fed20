"""Command-line orchestration: configured experiment pipelines with
deterministic CSV/JSON artifacts.

Config files are TOML (JSON accepted).  Exit codes: 0 ok, 2 a certified
bound failed, 3 an iteration diverged or stalled, 4 bad configuration.
The worker pool for sweep points is capped by GLUE_LAB_THREADS.
"""

import csv
import functools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .adiabatic import adia_distance
from .decay import decay_fit, three_interval_bound, window_energies, gamma_c
from .errors import (BoundViolated, ConfigInvalid, Diverged, GlueLabError,
                     HypothesisFailed, NoConvergence, NotContractive)
from .examples import CpnExampleSpec, cpn_sweep, extra_family
from .floer_op import dbar_evaluate, error_norm
from .flow import dim_identity_check, toy_index_experiment
from .inverse import contraction_check, inverse_bound_probe
from .newton import glue
from .preglue import AdiabaticParams, flat_toy, preglue
from gluelab import floer_op

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_BOUND, EXIT_DIVERGED, EXIT_CONFIG = 0, 2, 3, 4


class RunConfig:
    """Validated run description: scenario, sweep, grid, seed, output."""

    def __init__(self, raw, base_dir="."):
        try:
            self.scenario = raw.get("scenario", "FlatToy")
            if self.scenario not in ("FlatToy", "CpnExample", "Custom"):
                raise ConfigInvalid("unknown scenario %r" % self.scenario)
            self.sweep = [float(e) for e in raw.get("sweep", [2.0 ** -4])]
            if not self.sweep:
                raise ConfigInvalid("sweep must be nonempty")
            if any(b >= a for a, b in zip(self.sweep, self.sweep[1:])):
                raise ConfigInvalid("sweep must be strictly decreasing")
            grid = raw.get("grid", {})
            self.n_t = int(grid.get("n_t", 64))
            self.h_tau = float(grid.get("h_tau", 1.0 / 16.0))
            self.seed = int(raw.get("seed", 0))
            self.output_dir = os.path.join(
                base_dir, raw.get("output_dir", "out"))
            self.flags = dict(raw.get("flags", {}))
            self.params_extra = {k: float(v)
                                 for k, v in raw.get("params", {}).items()}
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc))

    def params(self, eps=None):
        return AdiabaticParams(eps=self.sweep[0] if eps is None else eps,
                               **self.params_extra)

    def dfd(self):
        if self.scenario == "CpnExample":
            raise ConfigInvalid("this pipeline needs a dfd scenario")
        return flat_toy(seed=self.seed)

    def threads(self):
        cap = os.environ.get("GLUE_LAB_THREADS")
        return max(1, int(cap)) if cap else 1

    def pmap(self, fn, items):
        n = self.threads()
        if n == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(fn, items))  # order preserved


def load_config(path):
    try:
        with open(path, "rb") as fh:
            head = fh.read(1)
            fh.seek(0)
            if path.endswith(".json") or head == b"{":
                raw = json.load(fh)
            else:
                raw = tomllib.load(fh)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigInvalid("cannot read config %s: %s" % (path, exc))
    return RunConfig(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def write_csv(cfg, name, header, rows, units=None):
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write("# scenario=%s schema=%s git=GIT_DESCRIBE\n"
                 % (cfg.scenario, SCHEMA_VERSION))
        if units:
            fh.write("# units: %s\n" % units)
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    return path


def write_json(cfg, name, payload):
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, name)
    payload = dict(payload)
    payload["schema"] = SCHEMA_VERSION
    payload["scenario"] = cfg.scenario
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def pipeline(fn):
    """Uniform error-to-exit-code mapping for subcommands."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except ConfigInvalid as exc:
            click.echo("config error: %s" % exc, err=True)
            sys.exit(EXIT_CONFIG)
        except BoundViolated as exc:
            click.echo("bound violated: %s" % exc, err=True)
            sys.exit(EXIT_BOUND)
        except (Diverged, NoConvergence, NotContractive,
                HypothesisFailed) as exc:
            click.echo("diverged: %s" % exc, err=True)
            sys.exit(EXIT_DIVERGED)
        except GlueLabError as exc:
            click.echo("error: %s" % exc, err=True)
            sys.exit(EXIT_BOUND)

    return wrapper


config_opt = click.option("--config", "config_path", required=True,
                          type=click.Path(exists=True, dir_okay=False),
                          help="TOML or JSON run configuration.")


@click.group()
def main():
    """Numerical adiabatic-gluing laboratory."""


@main.command("preglue")
@config_opt
@pipeline
def cmd_preglue(config_path):
    """Build the pre-glued approximation; dump grid and zone residuals."""
    cfg = load_config(config_path)
    pa = cfg.params()
    dfd = cfg.dfd()
    u = preglue(dfd, pa, h_tau=cfg.h_tau, n_t=cfg.n_t)
    os.makedirs(cfg.output_dir, exist_ok=True)
    u.save_npz(os.path.join(cfg.output_dir, "preglue_grid.npz"))
    r = np.abs(dbar_evaluate(u, pa, dfd.morse).vec).max(axis=(1, 2))
    rows = [(f"{t:.6f}", f"{v:.6e}") for t, v in zip(u.tau, r)]
    path = write_csv(cfg, "preglue_residual.csv", ["tau", "residual_sup"],
                     rows, units="tau: neck units; residual: chart units")
    click.echo(path)


@main.command("error-sweep")
@config_opt
@pipeline
def cmd_error_sweep(config_path):
    """Pre-gluing error across the sweep with fitted scaling slope."""
    cfg = load_config(config_path)
    dfd = cfg.dfd()

    def one(eps):
        pa = cfg.params(eps)
        u = preglue(dfd, pa, h_tau=cfg.h_tau, n_t=cfg.n_t)
        total, comps = error_norm(u, pa, dfd.morse, return_components=True)
        return eps, total, comps["tilde_Lp_beta"], comps["zero_Lp_eps"]

    table = cfg.pmap(one, cfg.sweep)
    slope = float(np.polyfit(np.log([r[0] for r in table]),
                             np.log([r[1] for r in table]), 1)[0])
    rows = [(f"{e:.8f}", f"{t:.6e}", f"{hi:.6e}", f"{z:.6e}")
            for e, t, hi, z in table]
    rows.append(("slope", f"{slope:.6f}", "", ""))
    path = write_csv(cfg, "error_sweep.csv",
                     ["eps", "error_norm", "higher_mode_part", "zero_mode_part"],
                     rows, units="dimensionless resolved norms")
    click.echo(path)


@main.command("inverse-check")
@config_opt
@pipeline
def cmd_inverse_check(config_path):
    """Contraction and operator-bound probes of the approximate inverse."""
    cfg = load_config(config_path)
    pa = cfg.params()
    dfd = cfg.dfd()
    probes = int(cfg.flags.get("probes", 20))
    u = preglue(dfd, pa, h_tau=cfg.h_tau, n_t=cfg.n_t)
    op = floer_op.linearize(u, pa, dfd.morse, dfd.segment)
    con = contraction_check(dfd, pa, op, probes=probes, seed=cfg.seed)
    bnd = inverse_bound_probe(dfd, pa, u, probes=probes, seed=cfg.seed)
    path = write_json(cfg, "inverse_check.json", {
        "eps": pa.eps, "max_ratio": con["max_ratio"],
        "bound_estimate": bnd["bound_estimate"], "probes": probes})
    click.echo(path)
    if con["max_ratio"] >= 0.5:
        raise NotContractive("contraction ratio %g" % con["max_ratio"])


@main.command("newton")
@config_opt
@pipeline
def cmd_newton(config_path):
    """Glue: pre-glue plus Newton correction; JSON report and grid dump."""
    cfg = load_config(config_path)
    pa = cfg.params()
    u = glue(cfg.dfd(), pa)
    os.makedirs(cfg.output_dir, exist_ok=True)
    u.save_npz(os.path.join(cfg.output_dir, "glued_grid.npz"))
    path = write_json(cfg, "newton_report.json", u.provenance["report"]
                      | {"eps": pa.eps, "mu": u.provenance["mu"]})
    click.echo(path)


@main.command("decay")
@config_opt
@pipeline
def cmd_decay(config_path):
    """Windowed higher-mode decay of the glued solution."""
    cfg = load_config(config_path)
    pa = cfg.params()
    u = glue(cfg.dfd(), pa)
    w = window_energies(u, kind="HigherModeL2",
                        span=(-pa.R, pa.R))
    upsilon = float(cfg.flags.get("upsilon", 0.8))
    out = three_interval_bound(w, gamma_c(4 * np.pi * upsilon))
    fit = decay_fit(w)
    rows = [(k, f"{x:.6e}", f"{b:.6e}", f"{fit['sigma']:.6f}")
            for k, (x, b) in enumerate(zip(w.x, out["bound"]))]
    path = write_csv(cfg, "decay.csv", ["k", "x_k", "bound_k", "sigma_fit"],
                     rows, units="window index; L2 norms; rate 1/window")
    click.echo(path)
    click.echo("sigma=%.6f r2=%.6f hypothesis=%s"
               % (fit["sigma"], fit["r2"], out["holds_hypothesis"]))


@main.command("adia")
@config_opt
@pipeline
def cmd_adia(config_path):
    """Composite adiabatic distance of the pre-glued map to its limit."""
    cfg = load_config(config_path)
    dfd = cfg.dfd()
    zeta = float(cfg.flags.get("zeta", 0.25))

    def one(eps):
        pa = cfg.params(eps)
        u = preglue(dfd, pa, h_tau=cfg.h_tau, n_t=cfg.n_t)
        return adia_distance(u, dfd, pa, zeta=zeta).as_dict() | {"eps": eps}

    reports = cfg.pmap(one, cfg.sweep)
    path = write_json(cfg, "adia.json", {"zeta": zeta, "reports": reports})
    click.echo(path)


@main.command("cpn")
@config_opt
@pipeline
def cmd_cpn(config_path):
    """Projective-example sweep with every certified bound tabulated."""
    cfg = load_config(config_path)
    spec = CpnExampleSpec()
    rep = cpn_sweep(spec, [cfg.params(e) for e in cfg.sweep])
    rows = [(f"{r['eps']:.8f}", f"{r['bound_i']:.6e}", f"{r['measured_i']:.6e}",
             f"{r['energy_bound']:.6e}", f"{r['energy']:.6e}",
             f"{r['composite']:.6e}") for r in rep["rows"]]
    path = write_csv(cfg, "cpn_sweep.csv",
                     ["eps", "chord_bound", "measured_sup", "energy_bound",
                      "measured_energy", "composite_distance"],
                     rows, units="chart/FS units; energies dimensionless")
    click.echo(path)
    if bool(cfg.flags.get("extra_family", False)):
        spec2 = CpnExampleSpec(extra={
            "k": 2, "m": 1, "P": {1: np.array([0.3 + 0j, 0.0])},
            "beta": lambda e: e ** 2})
        out = extra_family(spec2, cfg.params())
        write_json(cfg, "cpn_extra.json", {
            "residual_norm": out["residual_norm"],
            "immersion_at_joints": list(out["immersion_at_joints"])})


@main.command("transversality")
@config_opt
@pipeline
def cmd_transversality(config_path):
    """Randomized subspace-dimension and SVD-index oracles."""
    cfg = load_config(config_path)
    trials = int(cfg.flags.get("trials", 100))
    rng = np.random.default_rng(cfg.seed)
    mismatches = 0
    for _ in range(trials):
        n = int(rng.integers(2, 7))
        A = rng.standard_normal((n, int(rng.integers(0, n + 1))))
        B = rng.standard_normal((n, int(rng.integers(0, n + 1))))
        out = dim_identity_check(A, B, n)
        if out["lhs"] != out["rhs_plus"]:
            mismatches += 1
    toy = toy_index_experiment(1, 0, 0, 0, 2, seed=cfg.seed)
    path = write_json(cfg, "transversality.json", {
        "trials": trials, "dim_identity_mismatches": mismatches,
        "toy_index": toy})
    click.echo(path)
    if mismatches:
        raise BoundViolated("%d dimension-identity mismatches" % mismatches)


if __name__ == "__main__":
    main()
