"""Config-driven experiment runner binding the library into reproducible batch runs.

A run is described by one JSON config file.  Outputs are a manifest (config
echo, seed, versions, wall time), one CSV per result table, and a
human-readable summary.  CSV and summary bytes depend only on (config, seed),
never on the worker-thread cap.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import scenarios as scn_mod
from .bands import coverage_experiment
from .simulate import CovarianceError, RngPolicy, gaussian_sup_sample, levy_concentration
from .smoothmax import epsilon_beta_delta, smooth_max, smooth_max_derivs

SUBCOMMANDS = (
    "smoothmax-check",
    "coupling-bounds",
    "coupling-crossover",
    "rate",
    "bands",
    "anticoncentration",
)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    seed: int
    threads: int
    output_dir: str
    scenario: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "seed": self.seed,
            "threads": self.threads,
            "output_dir": self.output_dir,
            "scenario": self.scenario,
            "params": self.params,
        }


@dataclass(frozen=True)
class ConfigError:
    path: str
    message: str
    line: int | None = None

    def render(self) -> str:
        loc = f"line {self.line}, " if self.line else ""
        return f"{loc}{self.path}: {self.message}"


def _line_of(text: str, key: str) -> int | None:
    probe = f'"{key.split(".")[-1]}"'
    idx = text.find(probe)
    if idx < 0:
        return None
    return text.count("\n", 0, idx) + 1


def validate(config_text: str):
    """Parse and validate a JSON config; returns (RunConfig | None, [ConfigError])."""
    errors: list[ConfigError] = []
    try:
        raw = json.loads(config_text)
    except json.JSONDecodeError as exc:
        return None, [ConfigError(path="<json>", message=str(exc), line=exc.lineno)]
    if not isinstance(raw, dict):
        return None, [ConfigError(path="<root>", message="config must be a JSON object")]

    def err(path, message):
        errors.append(ConfigError(path=path, message=message, line=_line_of(config_text, path)))

    sub = raw.get("subcommand")
    if sub not in SUBCOMMANDS:
        err("subcommand", f"unknown subcommand {sub!r}; expected one of {', '.join(SUBCOMMANDS)}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        err("seed", "seed must be a nonnegative integer")
    threads = raw.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        err("threads", "threads must be a positive integer")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        err("params", "params must be an object")
        params = {}
    scenario = raw.get("scenario", {})
    if not isinstance(scenario, dict):
        err("scenario", "scenario must be an object")
        scenario = {}

    for key in ("n", "n_inner"):
        if key in params and (not isinstance(params[key], int) or params[key] < 3):
            err(f"params.{key}", "n must be an integer >= 3 (the coupling constructions assume n >= 3)")
    if "n_list" in params:
        ns = params["n_list"]
        if not isinstance(ns, list) or any((not isinstance(n, int)) or n < 3 for n in ns):
            err("params.n_list", "every n must be an integer >= 3 (the coupling constructions assume n >= 3)")
        elif any(b <= a for a, b in zip(ns, ns[1:])):
            err("params.n_list", "n_list must be strictly increasing")
    if "alpha" in params:
        a = params["alpha"]
        if not isinstance(a, (int, float)) or not 0 < a < 1:
            err("params.alpha", "alpha must lie strictly between 0 and 1")
    if "beta" in params and "delta" in params:
        if params["beta"] * params["delta"] <= 1:
            err("params.beta", "beta * delta must exceed 1 (the smoothing tolerance needs alpha > 0)")
    moments = params.get("moments", {})
    if "sigma" in moments and "b" in moments and moments["sigma"] > moments["b"]:
        err("params.moments.sigma", "sigma cannot exceed the envelope scale b")
    if scenario:
        stype = scenario.get("type")
        if stype not in ("kernel_density", "series_mean", "series_quantile"):
            err("scenario.type", f"unknown scenario type {stype!r}")
        for bound_key in ("grid_lo", "grid_hi"):
            if bound_key in scenario and not isinstance(scenario[bound_key], (int, float)):
                err(f"scenario.{bound_key}", "grid bounds must be numbers")
        if "grid_points" in scenario and (not isinstance(scenario["grid_points"], int) or scenario["grid_points"] < 1):
            err("scenario.grid_points", "grid_points must be a positive integer")

    if errors:
        return None, errors
    return (
        RunConfig(
            subcommand=sub,
            seed=seed,
            threads=threads,
            output_dir=raw.get("output_dir", "out"),
            scenario=scenario,
            params=params,
        ),
        [],
    )


def scenario_from_config(spec: dict):
    stype = spec.get("type", "kernel_density")
    if stype == "kernel_density":
        return scn_mod.kernel_density_scenario(
            data_law=spec.get("data_law", "beta"),
            law_params=spec.get("law_params"),
            kernel=spec.get("kernel", "epanechnikov"),
            grid_points=spec.get("grid_points", 64),
            grid_lo=spec.get("grid_lo", 0.1),
            grid_hi=spec.get("grid_hi", 0.9),
            bandwidth_power=spec.get("bandwidth_power", 0.2),
            bandwidth_scale=spec.get("bandwidth_scale", 1.0),
            normalization=spec.get("normalization", "studentized"),
        )
    if stype == "series_mean":
        return scn_mod.series_mean_scenario(
            basis=spec.get("basis", "fourier_trig"),
            k_power=spec.get("k_power", 1.0 / 3.0),
            k_scale=spec.get("k_scale", 1.0),
            grid_points=spec.get("grid_points", 64),
            grid_lo=spec.get("grid_lo", 0.0),
            grid_hi=spec.get("grid_hi", 1.0),
        )
    if stype == "series_quantile":
        return scn_mod.SeriesScenario(
            basis=spec.get("basis", "fourier_trig"),
            K_rule=lambda n, p=spec.get("k_power", 1.0 / 3.0), s=spec.get("k_scale", 1.0): max(
                1, math.ceil(s * float(n) ** p)
            ),
            x_grid=np.linspace(spec.get("grid_lo", 0.0), spec.get("grid_hi", 1.0), spec.get("grid_points", 16)),
            noise_model="quantile",
            tau_grid=np.asarray(spec.get("tau_grid", [0.25, 0.5, 0.75])),
        )
    raise ValueError(f"unknown scenario type: {stype}")


# ---------------------------------------------------------------------------
# output helpers

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands

def _run_smoothmax_check(cfg: RunConfig, outdir: Path) -> tuple[list[str], bool]:
    p = cfg.params
    draws = int(p.get("draws", 20_000))
    deriv_draws = int(p.get("deriv_draws", 5_000))
    p_max = int(p.get("p_max", 1000))
    rng = RngPolicy(cfg.seed)
    gen = rng.stream_of(0)
    sandwich_viol = 0
    batches = 40
    per = max(1, draws // batches)
    # sandwich suite batched as whole matrices; the remaining suites drive
    # the scalar library entry points directly
    for _ in range(batches):
        dim = int(gen.integers(1, p_max + 1))
        beta = float(gen.uniform(0.05, 50.0))
        x = gen.standard_normal((per, dim)) * gen.uniform(0.5, 3.0)
        m = x.max(axis=1)
        shifted = np.exp(beta * (x - m[:, None]))
        fb = m + np.log(shifted.sum(axis=1)) / beta
        upper = m + math.log(dim) / beta
        sandwich_viol += int(np.sum((fb < m - 1e-12) | (fb > upper + 1e-9)))

    gen2 = rng.stream_of(1)
    simplex_viol = wsum_viol = qsum_viol = 0
    for _ in range(deriv_draws):
        dim = int(gen2.integers(1, 65))
        beta = float(gen2.uniform(0.05, 20.0))
        d = smooth_max_derivs(gen2.standard_normal(dim) * 2.0, beta)
        if abs(d.pi.sum() - 1.0) > 1e-12 or np.any(d.pi < 0):
            simplex_viol += 1
        if np.abs(d.w).sum() > 2.0 + 1e-12:
            wsum_viol += 1
        if d.q_sum > 6.0 + 1e-12:
            qsum_viol += 1

    # tolerance decay under the coupled choice beta = 2 log(p v n) / delta
    tol_viol = 0
    for pn in (3, 10, 100, 1000, 100_000):
        delta = 0.7
        beta = 2.0 * math.log(pn) / delta
        if epsilon_beta_delta(beta, delta) > 2.0 * math.log(pn) / pn + 1e-15:
            tol_viol += 1

    gen3 = rng.stream_of(2)
    struct_viol = 0
    for _ in range(200):
        dim = int(gen3.integers(2, 40))
        beta = float(gen3.uniform(0.1, 5.0))
        x = gen3.standard_normal(dim)
        c = float(gen3.standard_normal())
        if abs(smooth_max(x, beta) - smooth_max(np.flip(x), beta)) > 1e-10:
            struct_viol += 1
        if abs(smooth_max(x + c, beta) - (smooth_max(x, beta) + c)) > 1e-9:
            struct_viol += 1

    suites = [
        ("sandwich", draws, sandwich_viol),
        ("gradient_simplex", deriv_draws, simplex_viol),
        ("hessian_abs_sum", deriv_draws, wsum_viol),
        ("third_deriv_abs_sum", deriv_draws, qsum_viol),
        ("tolerance_decay", 5, tol_viol),
        ("structure", 400, struct_viol),
    ]
    write_csv(outdir / "smoothmax_check.csv", ["suite", "checks", "violations"], suites)
    ok = all(v == 0 for _, _, v in suites)
    lines = [f"{name}: {checks} checks, {viol} violations" for name, checks, viol in suites]
    lines.append("smoothmax-check: " + ("PASS" if ok else "FAIL"))
    return lines, ok


def _moment_inputs_from_config(m: dict, n: int) -> bounds_mod.MomentInputs:
    hspec = m.get("H", {"type": "constant", "value": math.log(n)})
    if hspec["type"] == "constant":
        hval = max(float(hspec["value"]), math.log(n))
        H = lambda eps: hval
    elif hspec["type"] == "vc":
        A, v = float(hspec["A"]), float(hspec["v"])
        H = lambda eps: max(math.log(n), v * math.log(A / eps))
    else:
        raise ValueError(f"unknown H profile type: {hspec['type']}")
    pspec = m.get("phi", {"type": "constant", "value": 0.0})
    phi_val = float(pspec.get("value", 0.0))
    phi = lambda eps: phi_val
    tspec = m.get("tail", {"type": "zero"})
    if tspec["type"] == "zero":
        tail = lambda u: 0.0
    elif tspec["type"] == "bounded":
        ratio = float(tspec["ratio"])  # F / kappa, constant envelope case
        tail = lambda u: ratio**3 if ratio > u else 0.0
    else:
        raise ValueError(f"unknown tail type: {tspec['type']}")
    return bounds_mod.MomentInputs(
        n=n,
        p_or_N=int(m.get("p_or_N", n)),
        sigma=float(m["sigma"]),
        b=float(m["b"]),
        q=float(m["q"]),
        M_norms={2: float(m.get("M2", 0.0)), float(m["q"]): float(m.get("Mq", 0.0))},
        kappa=float(m.get("kappa", 1.0)),
        EG_FF=float(m.get("EG_FF", 0.0)),
        H_profile=H,
        phi_profile=phi,
        tail_fn=tail,
    )


def _run_coupling_bounds(cfg: RunConfig, outdir: Path) -> tuple[list[str], bool]:
    p = cfg.params
    m = p["moments"]
    n = int(p.get("n", m.get("n", 1000)))
    inputs = _moment_inputs_from_config(m, n)
    budget = bounds_mod.coupling_budget(
        inputs,
        epsilon=float(p.get("epsilon", 0.05)),
        gamma=float(p.get("gamma", 0.1)),
        K_q=float(p.get("K_q", 1.0)),
        c_const=float(p.get("c_const", 1.0)),
        C_log=float(p.get("C_log", 1.0)),
    )
    report = {"inputs": {k: v for k, v in m.items()}, "n": n, "budget": budget.as_dict()}
    if "A" in m and "v" in m:
        vc = bounds_mod.vc_class_budget(
            n=n,
            gamma=float(p.get("gamma", 0.1)),
            q=float(m["q"]),
            b=float(m["b"]),
            sigma=float(m["sigma"]),
            A=float(m["A"]),
            v=float(m["v"]),
            c_const=float(p.get("c_const", 1.0)),
        )
        report["vc_budget"] = {
            "terms": vc.terms,
            "total": vc.total,
            "K_n": vc.K_n,
            "prob_bound_raw": vc.prob_bound_raw,
            "prob_bound": vc.prob_bound,
        }
    write_json(outdir / "coupling_bounds.json", report)
    rows = [(k, v) for k, v in budget.terms.items()]
    rows += [
        ("delta_n", budget.delta_n),
        ("delta_n_tail", budget.delta_n_tail),
        ("threshold", budget.threshold),
        ("prob_bound_raw", budget.prob_bound_raw),
        ("prob_bound", budget.prob_bound),
    ]
    write_csv(outdir / "coupling_bounds.csv", ["term", "value"], rows)
    lines = [f"{k} = {_fmt(v)}" for k, v in rows]
    return lines, True


def _run_crossover(cfg: RunConfig, outdir: Path) -> tuple[list[str], bool]:
    p = cfg.params
    exponents = p.get("n_exponents", list(range(8, 17)))
    n_list = [2**e for e in exponents]
    delta = float(p.get("delta", 50.0))
    rows, crossover_n = bounds_mod.crossover_sweep(n_list, delta=delta, b=float(p.get("b", 1.0)))
    write_csv(
        outdir / "crossover.csv",
        ["n", "p", "maxima_coupling_bound", "whole_vector_bound"],
        [(r.n, r.p, r.cor_bound, r.yurinskii) for r in rows],
    )
    cor_vals = [r.cor_bound for r in rows]
    yur_vals = [r.yurinskii for r in rows]
    monotone = all(b < a for a, b in zip(cor_vals, cor_vals[1:])) and all(
        b > a for a, b in zip(yur_vals, yur_vals[1:])
    )
    lines = [
        f"n={r.n} p={r.p}: maxima bound {_fmt(r.cor_bound)}, whole-vector bound {_fmt(r.yurinskii)}"
        for r in rows
    ]
    lines.append(
        f"crossover (whole-vector bound overtakes): n = {crossover_n}"
        if crossover_n is not None
        else "no crossover inside the sweep"
    )
    lines.append(f"monotone decrease/increase: {'yes' if monotone else 'no'}")
    return lines, monotone and crossover_n is not None


def _run_rate(cfg: RunConfig, outdir: Path) -> tuple[list[str], bool]:
    p = cfg.params
    scenario = scenario_from_config(cfg.scenario)
    table = scn_mod.rate_experiment(
        scenario,
        p.get("n_list", [500, 2000, 8000]),
        R=int(p.get("replications", 2000)),
        rng=RngPolicy(cfg.seed),
        threads=cfg.threads,
    )
    write_csv(
        outdir / "rate.csv",
        ["n", "ks", "ks_conf", "predicted_rate", "slope_fit"],
        [(r["n"], r["ks"], r["ks_conf"], r["predicted_rate"], r["slope_fit"]) for r in table.as_rows()],
    )
    lines = [
        f"n={r['n']}: ks = {_fmt(r['ks'])} (+/- {_fmt(r['ks_conf'])}), predicted rate {_fmt(r['predicted_rate'])}"
        for r in table.as_rows()
    ]
    lines.append(f"log-log slope of ks vs n: {_fmt(table.slope_fit)}")
    return lines, True


def _run_bands(cfg: RunConfig, outdir: Path) -> tuple[list[str], bool]:
    p = cfg.params
    scenario = scenario_from_config(cfg.scenario)
    report, band = coverage_experiment(
        scenario,
        alpha=float(p.get("alpha", 0.05)),
        n=int(p.get("n", 2000)),
        R_outer=int(p.get("R_outer", 500)),
        R_inner=int(p.get("R_inner", 4000)),
        rng=RngPolicy(cfg.seed),
        target=p.get("target", "exact_centered"),
        side=p.get("side", "two_sided"),
        threads=cfg.threads,
    )
    write_csv(
        outdir / "band.csv",
        ["x", "lower", "upper"],
        zip(band.x_grid, band.lower, band.upper),
    )
    write_json(
        outdir / "coverage.json",
        {
            "nominal": report.nominal,
            "empirical": report.empirical,
            "binomial_se": report.binomial_se,
            "replications": report.replications,
            "inner_replications": report.inner_replications,
            "c_alpha": report.c_alpha,
        },
    )
    lines = [
        f"nominal coverage {repr(report.nominal)}, empirical {repr(report.empirical)}"
        f" (se {repr(report.binomial_se)}, R_outer {report.replications})",
        f"critical value {repr(report.c_alpha)}",
    ]
    return lines, True


def _run_anticoncentration(cfg: RunConfig, outdir: Path) -> tuple[list[str], bool]:
    p = cfg.params
    scenario = scenario_from_config(cfg.scenario)
    n = int(p.get("n", 2000))
    R = int(p.get("replications", 100_000))
    eps_list = [float(e) for e in p.get("epsilons", [0.01, 0.02, 0.05, 0.1, 0.2])]
    design = scn_mod.design_kernel(scenario, n)
    gauss = gaussian_sup_sample(design.cov, R, RngPolicy(cfg.seed), threads=cfg.threads)
    mean = float(gauss.values.mean())
    rows = []
    ok = True
    for eps in eps_list:
        lev = levy_concentration(gauss, eps)
        bound = 3.0 * eps * (mean + math.sqrt(max(1.0, math.log(1.0 / eps))))
        good = lev <= bound
        ok = ok and good
        rows.append((eps, lev, bound, good))
    write_csv(outdir / "anticoncentration.csv", ["epsilon", "levy_concentration", "bound", "pass"], rows)
    lines = [f"eps={_fmt(e)}: L = {_fmt(l)}, bound = {_fmt(b)}, {'ok' if g else 'VIOLATED'}" for e, l, b, g in rows]
    lines.append(f"gaussian sup mean: {_fmt(mean)}")
    return lines, ok


RUNNERS = {
    "smoothmax-check": _run_smoothmax_check,
    "coupling-bounds": _run_coupling_bounds,
    "coupling-crossover": _run_crossover,
    "rate": _run_rate,
    "bands": _run_bands,
    "anticoncentration": _run_anticoncentration,
}


def run(config: RunConfig) -> int:
    """Execute a validated config; returns the process exit status."""
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    try:
        lines, ok = RUNNERS[config.subcommand](config, outdir)
    except (CovarianceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        (outdir / "summary.txt").write_text(f"numerical failure: {exc}\n", encoding="utf-8")
        return 3
    wall = time.time() - started
    import scipy

    manifest = {
        "config": config.echo(),
        "seed": config.seed,
        "versions": {
            "supgauss": _package_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": wall,
    }
    write_json(outdir / "manifest.json", manifest)
    summary = "\n".join([f"subcommand: {config.subcommand}", f"seed: {config.seed}"] + lines) + "\n"
    (outdir / "summary.txt").write_text(summary, encoding="utf-8")
    return 0 if ok else 3


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("supgauss")
    except Exception:
        return "0.1.0"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="supgauss", description="Run a configured experiment")
    parser.add_argument("--config", required=True, help="path to a JSON run config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="worker thread cap")
    parser.add_argument("--output", default=None, help="output directory override")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    config, errors = validate(text)
    if errors:
        for e in errors:
            print(e.render(), file=sys.stderr)
        return 2
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.output is not None:
        overrides["output_dir"] = args.output
    if overrides:
        config = RunConfig(**{**config.echo(), **overrides})
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
