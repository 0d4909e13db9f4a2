"""Command-line entry point: ``pmclab <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .assumptions import RateConfig, check_assumptions
from .core import DesignData, ModelPrior, SlabSpec, parse_bits, state_bits
from .enumeration import enumerate_posterior, pmc_summary
from .gprior import GPriorDensity, gprior_posterior
from .sampler import GibbsConfig, chains_psrf, model_frequencies, pooled_samples, run_chains
from .simlab.config import experiment_from_dict, load_mapping, regime_from_dict
from .simlab.data import TruthSpec, gen_dataset, gen_orthonormal_design
from .simlab.experiments import (
    ConfigError,
    run_consistency_sweep,
    run_regimes,
    run_table1,
    summarize,
)
from .simlab.records import write_experiment
from .simlab.streams import rng_for


# ---------------------------------------------------------------------------
# file helpers
# ---------------------------------------------------------------------------

def write_data_csv(data: DesignData, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] + [f"x{j + 1}" for j in range(data.p)])
        for yi, row in zip(data.y, data.X):
            w.writerow([repr(float(yi))] + [repr(float(v)) for v in row])


def read_data_csv(path) -> DesignData:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return DesignData(arr[:, 0], arr[:, 1:])


def read_truth(path) -> TruthSpec:
    info = json.loads(Path(path).read_text())
    return TruthSpec(np.asarray(info["beta0"], dtype=float), float(info.get("sigma0", 1.0)))


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _prior(args, p: int) -> ModelPrior:
    if args.weights:
        w = _floats(args.weights)
        if len(w) == 1:
            w = w * p
        return ModelPrior.bernoulli(w)
    return ModelPrior.flat(p)


def _gamma0(args, p: int):
    if getattr(args, "truth", None):
        return read_truth(args.truth).gamma0
    if getattr(args, "gamma0", None):
        return parse_bits(args.gamma0)
    return None


def _parse_g(text: str) -> GPriorDensity:
    kind, _, rest = text.partition(":")
    vals = _floats(rest.replace(":", ","))
    if kind == "point":
        return GPriorDensity.point_mass(vals[0])
    if kind == "uniform":
        return GPriorDensity.uniform(vals[0], vals[1])
    raise argparse.ArgumentTypeError(f"unknown g-prior {text!r}; use point:C or uniform:LO:HI")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=2)
    if path is not None:
        path.write_text(text + "\n")
    print(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_datagen(args) -> int:
    beta = np.zeros(args.p)
    vals = _floats(args.beta)
    beta[: len(vals)] = vals
    truth = TruthSpec(beta, args.sigma0)
    X = gen_orthonormal_design(args.n, args.p, rng_for(args.seed, "design"))
    data = gen_dataset(X, truth, rng_for(args.seed, "noise"))
    out = _out_dir(args)
    write_data_csv(data, out / "data.csv")
    (out / "truth.json").write_text(json.dumps(
        {"master_seed": args.seed, "beta0": beta.tolist(), "sigma0": args.sigma0,
         "gamma0": state_bits(truth.gamma0)}, indent=2) + "\n")
    print(f"wrote {out / 'data.csv'} and {out / 'truth.json'}")
    return 0


def cmd_enumerate(args) -> int:
    data = read_data_csv(args.data)
    table = enumerate_posterior(data, SlabSpec.constant(data.p, args.phi, args.nu),
                                _prior(args, data.p), p_limit=args.p_limit)
    out = _out_dir(args)
    table.to_csv(out / "posterior.csv")
    report = _table_report(table, _gamma0(args, data.p), args.top)
    _dump(report, out / "summary.json")
    return 0


def _table_report(table, gamma0, top: int) -> dict:
    order = np.argsort(-table.probabilities, kind="stable")[:top]
    report = {"top_models": [{"gamma": state_bits(table.states[i]),
                              "probability": float(table.probabilities[i])} for i in order],
              "inclusion_probabilities": table.inclusion_probabilities().tolist()}
    if gamma0 is not None:
        s = pmc_summary(table, gamma0)
        report.update(true_model_prob=s.true_model_prob,
                      log_max_incorrect_odds=s.log_max_incorrect_odds,
                      map_model=state_bits(s.map_model))
    return report


def cmd_gibbs(args) -> int:
    data = read_data_csv(args.data)
    cfg = GibbsConfig(args.sweeps, args.burnin, args.chains, args.seed, args.thin)
    chains = run_chains(data, SlabSpec.constant(data.p, args.phi, args.nu), _prior(args, data.p), cfg)
    out = _out_dir(args)
    for ch in chains:
        ch.to_csv(out / f"chain_{ch.chain_id}.csv")
    samples = pooled_samples(chains)
    freqs = sorted(model_frequencies(samples).items(), key=lambda kv: (-kv[1], kv[0]))[: args.top]
    report = {"master_seed": args.seed, "psrf": chains_psrf(chains),
              "inclusion_probabilities": samples.mean(axis=0).tolist(),
              "top_models": [{"gamma": format(k, f"0{data.p}b"), "frequency": v} for k, v in freqs]}
    g0 = _gamma0(args, data.p)
    if g0 is not None:
        report["true_model_prob"] = float(np.mean(np.all(samples == g0, axis=1)))
    _dump(report, out / "summary.json")
    return 0


def cmd_gprior(args) -> int:
    data = read_data_csv(args.data)
    table = gprior_posterior(data, SlabSpec(np.ones(data.p), args.nu), _prior(args, data.p),
                             _parse_g(args.g), p_limit=args.p_limit, nodes=args.nodes)
    out = _out_dir(args)
    table.to_csv(out / "posterior.csv")
    _dump(_table_report(table, _gamma0(args, data.p), args.top), out / "summary.json")
    return 0


def cmd_check(args) -> int:
    data = read_data_csv(args.data)
    truth = read_truth(args.truth)
    rate = RateConfig(args.zeta, truth.sigma0 or 1.0, args.phi) if args.rate else None
    report = check_assumptions(data, truth, SlabSpec.constant(data.p, args.phi, args.nu),
                               _prior(args, data.p), rate, delta=args.delta, seed=args.seed)
    text = report.to_json(indent=2)
    if args.out:
        _out_dir(args).joinpath("assumptions.json").write_text(text + "\n")
    print(text)
    return 0


def _print_summaries(summaries) -> None:
    for s in summaries:
        print(f"{s.key}: mean={s.mean:.3f} std={s.std:.3f} count={s.count} excluded={s.excluded}")


def cmd_table1(args) -> int:
    raw = load_mapping(args.config) if args.config else {}
    base = dict(n_grid=[100, 200, 400], growth_exponents=[0.25, 0.5, 0.75],
                settings=[10.0, 100.0, 1000.0], prior_cases=["I", "II"])
    base.update(raw)
    cfg = experiment_from_dict(base, seed=args.seed, replicates=args.replicates, workers=args.workers)
    records, summaries = run_table1(cfg)
    paths = write_experiment(args.out, records, summaries, cfg.seed, "table1")
    _print_summaries(summaries)
    print(f"records: {paths['records']}")
    return 0


def cmd_sweep(args) -> int:
    raw = load_mapping(args.config) if args.config else {}
    base = dict(n_grid=[50, 100, 200, 400], growth_exponents=[0.25], settings=[1000.0],
                prior_cases=["I"])
    base.update(raw)
    if args.null_truth:
        base["beta_true"] = []
    cfg = experiment_from_dict(base, seed=args.seed, replicates=args.replicates, workers=args.workers)
    records, trends = run_consistency_sweep(cfg)
    paths = write_experiment(args.out, records, summarize(records), cfg.seed, "sweep")
    for (case, label, r), rows in trends.items():
        for n, mean, odds in rows:
            print(f"{case}|{label}|r={r:g} n={n}: mean={mean:.3f} mean_max_odds={odds:.3g}")
    print(f"records: {paths['records']}")
    return 0


def cmd_regimes(args) -> int:
    raw = load_mapping(args.config) if args.config else {}
    params = regime_from_dict(raw)
    n_grid = [int(x) for x in args.n.split(",")] if args.n else list(raw.get("n_grid", [64]))
    gibbs = GibbsConfig(**raw["gibbs"]) if isinstance(raw.get("gibbs"), dict) else GibbsConfig()
    seed = args.seed if args.seed is not None else int(raw.get("seed", 20240101))
    reps = args.replicates if args.replicates is not None else int(raw.get("replicates", 20))
    records = run_regimes(n_grid, params, reps, seed, gibbs,
                          workers=args.workers or int(raw.get("workers", 1)))
    paths = write_experiment(args.out, records, summarize(records), seed, "regimes")
    for s in summarize(records):
        odds = [r.max_incorrect_odds for r in records
                if (r.n, r.setting_label) == (s.n, s.setting_label)]
        print(f"n={s.n} {s.setting_label}: mean p(gamma0|Z)={s.mean:.3f} "
              f"median max_incorrect_odds={float(np.median(odds)):.3g}")
    print(f"records: {paths['records']}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmclab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def model_opts(sp, phi=True):
        sp.add_argument("--data", required=True, help="CSV with columns y,x1..xp")
        if phi:
            sp.add_argument("--phi", type=float, default=10.0, help="common slab scale")
        sp.add_argument("--nu", type=int, default=4)
        sp.add_argument("--weights", help="comma-separated inclusion weights (one value broadcasts)")
        sp.add_argument("--truth", help="truth JSON written by datagen")
        sp.add_argument("--gamma0", help="true model as a bit string")
        sp.add_argument("--top", type=int, default=10)
        sp.add_argument("--out", default="out")

    sp = sub.add_parser("datagen", help="simulate an orthonormal design and response")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--beta", default="2,2", help="leading nonzero coefficients")
    sp.add_argument("--sigma0", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_datagen)

    sp = sub.add_parser("enumerate", help="exact posterior over all models")
    model_opts(sp)
    sp.add_argument("--p-limit", type=int, default=20)
    sp.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("gibbs", help="collapsed Gibbs sampler")
    model_opts(sp)
    sp.add_argument("--sweeps", type=int, default=2000)
    sp.add_argument("--burnin", type=int, default=1000)
    sp.add_argument("--chains", type=int, default=5)
    sp.add_argument("--thin", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_gibbs)

    sp = sub.add_parser("gprior", help="exact posterior with the slab scale integrated out")
    model_opts(sp, phi=False)
    sp.add_argument("--g", required=True, help="point:C or uniform:LO:HI")
    sp.add_argument("--nodes", type=int, default=64)
    sp.add_argument("--p-limit", type=int, default=20)
    sp.set_defaults(func=cmd_gprior)

    sp = sub.add_parser("check", help="evaluate the consistency conditions at finite n")
    sp.add_argument("--data", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--phi", type=float, default=10.0)
    sp.add_argument("--nu", type=int, default=4)
    sp.add_argument("--weights")
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--rate", action="store_true", help="also check the orthogonal-design rate condition")
    sp.add_argument("--zeta", type=float, default=2.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_check)

    def experiment_opts(sp, default_out):
        sp.add_argument("--config", help="YAML or JSON experiment config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", default=default_out)

    sp = sub.add_parser("table1", help="replicated growth-rate experiment")
    experiment_opts(sp, "out/table1")
    sp.set_defaults(func=cmd_table1)

    sp = sub.add_parser("regimes", help="slab-scale regimes on a square orthogonal design")
    experiment_opts(sp, "out/regimes")
    sp.add_argument("--n", help="comma-separated sample sizes (p = n)")
    sp.set_defaults(func=cmd_regimes)

    sp = sub.add_parser("sweep", help="consistency sweep over n")
    experiment_opts(sp, "out/sweep")
    sp.add_argument("--null-truth", action="store_true", help="simulate with beta0 = 0")
    sp.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, ArithmeticError, OSError) as exc:
        print(f"pmclab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
