"""Command-line entry point.

Subcommands: ``osa``, ``regret-experiment``, ``portmanteau``, ``backtest``,
``synth`` and ``compare-pairs``. Every subcommand is deterministic given
``--seed``. Exit codes: 0 ok, 1 usage/parameter error, 2 data error,
3 numerical fault.
"""

import argparse
import csv
import io
import math
import sys

import numpy as np

from . import data_io, evaluation, memory_core, statarb
from .errors import DataError, NumericalFault, ParameterError
from .spectral import sym_eigen

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# -- inputs -----------------------------------------------------------------


def _synth_spec(config, T=None, seed=None):
    return data_io.SyntheticSpec(
        kind=config.synth,
        T=config.T if T is None else T,
        n_assets=config.n_assets,
        kappa=config.kappa,
        sigma=config.sigma,
        sigma_z=config.sigma_z,
        rho=config.rho,
        phi=config.phi,
        beta=config.beta,
        level=config.level,
        seed=config.seed if seed is None else seed,
    )


def load_input(config):
    """Price series from ``--input`` or ``--synth`` (exactly one is required)."""
    has_file = getattr(config, "input", None) is not None
    has_synth = getattr(config, "synth", None) is not None
    if has_file == has_synth:
        raise ParameterError("give exactly one of --input or --synth")
    if has_file:
        return data_io.load_prices_csv(config.input)
    if config.synth == "cointegrated":
        config.synth = "cointegrated-pair"
    return data_io.generate_synthetic(_synth_spec(config))


def _fixed_weights(config, series):
    if config.weights is None:
        if series.n == 1:
            return np.ones(1)
        if series.n == 2:
            return evaluation.benchmark_weights(series.prices)
        raise ParameterError("--weights is required for more than two assets")
    w = np.asarray(config.weights, dtype=float)
    if w.size != series.n:
        raise ParameterError(f"{w.size} weights given for {series.n} assets")
    return w


# -- subcommands ------------------------------------------------------------


def _osa_record(run, Y, config):
    values = evaluation.portfolio_values(run.weights, Y)
    scored = evaluation.assess(values, config.lags, config.lower, config.upper)
    pm = scored["portmanteau"]
    return {
        "p_value": None if pm is None else pm.p_value,
        "revenue": scored["backtest"].revenue,
        "switches": run.switches,
    }, values, scored


def cmd_osa(config):
    """Run the online portfolio algorithm and score the played portfolio."""
    series = load_input(config)
    Y = series.prices / series.prices[0] if config.rescale else series.prices
    lam, m = config.lam, config.memory
    path = statarb.osa_path(Y, lam, m, eta=config.eta, G=config.gbound, causal=config.causal)

    first = {}

    def factory(seed_seq):
        run = statarb.osa_run(Y, lam, m, seed=seed_seq, path=path)
        record, values, scored = _osa_record(run, Y, config)
        if not first:
            first.update(run=run, values=values, scored=scored)
        return record

    agg = evaluation.monte_carlo_report(factory, config.runs, config.seed)
    run, scored = first["run"], first["scored"]

    x_star = statarb.offline_optimal_weights(Y, lam, m)
    grads = statarb.loss_gradients(Y, lam, m)
    comparator_losses = np.einsum("i,tij,j->t", x_star, grads, x_star)
    regret = memory_core.RegretTrace(run.losses, comparator_losses, x_star, m)

    pm = scored["portmanteau"]
    report = data_io.RunReport(
        meta={
            "algorithm": "osa",
            "lambda": lam,
            "m": m,
            "eta": run.eta,
            "T": series.T,
            "n": series.n,
            "seed": config.seed,
            "G": run.G,
            "D": statarb.SPECTRAHEDRON_DIAMETER,
            "gbound_estimated": run.gbound_estimated,
            "switch_prob": run.switch_prob,
            "causal": config.causal,
            "assets": list(series.assets),
            "spectrum": sym_eigen(grads.sum(axis=0)).values,
        },
        weights=run.weights,
        losses=run.losses,
        values=first["values"],
        regret=regret.to_dict(),
        portmanteau=None if pm is None else pm.to_dict(),
        backtest=scored["backtest"].to_dict(),
        aggregate={k: agg[k] for k in ("n_runs", "mean_p", "std_p", "mean_revenue", "std_revenue")}
        | {"runs": agg["runs"]},
        warnings=scored["warnings"],
    )
    return report


def cmd_compare_pairs(config):
    """Benchmark, Off-opt and OSA on the same two-asset series."""
    series = load_input(config)
    if series.n != 2:
        raise ParameterError(f"compare-pairs needs exactly two assets, got {series.n}")
    Y = series.prices
    lam, m = config.lam, config.memory
    rows = []
    warnings = []

    def static_row(name, x):
        scored = evaluation.assess(Y @ x, config.lags, config.lower, config.upper)
        pm = scored["portmanteau"]
        warnings.extend(f"{name}: {w}" for w in scored["warnings"])
        p = None if pm is None else pm.p_value
        rows.append({
            "strategy": name,
            "p_value": p,
            "p_value_display": evaluation.format_p_value(p),
            "revenue": scored["backtest"].revenue,
            "weights": x,
        })

    static_row("Benchmark", evaluation.benchmark_weights(Y))
    static_row("Off-opt", statarb.offline_optimal_weights(Y, lam, m))

    path = statarb.osa_path(Y, lam, m, eta=config.eta, G=config.gbound, causal=config.causal)

    def factory(seed_seq):
        run = statarb.osa_run(Y, lam, m, seed=seed_seq, path=path)
        return _osa_record(run, Y, config)[0]

    agg = evaluation.monte_carlo_report(factory, config.runs, config.seed)
    if agg["mean_p"] is None:
        warnings.append("OSA: degenerate series in every run")
    rows.append({
        "strategy": "OSA",
        "p_value": agg["mean_p"],
        "p_value_display": evaluation.format_p_value(agg["mean_p"]),
        "revenue": agg["mean_revenue"],
        "std_p": agg["std_p"],
        "std_revenue": agg["std_revenue"],
        "n_runs": agg["n_runs"],
    })
    return {
        "meta": {
            "command": "compare-pairs",
            "lambda": lam,
            "m": m,
            "L": config.lags,
            "lower": config.lower,
            "upper": config.upper,
            "T": series.T,
            "assets": list(series.assets),
            "seed": config.seed,
            "runs": config.runs,
        },
        "rows": rows,
        "warnings": warnings,
    }


def cmd_regret_experiment(config):
    """Measured regret against the theoretical bound over several horizons."""
    horizons = config.horizons
    if not horizons:
        raise ParameterError("no horizons given")
    rows = []
    if config.adversary == "quadratic":
        m = config.memory or 3
        ball = memory_core.DecisionSet.ball(config.dimension)
        for T in horizons:
            if T < m:
                raise ParameterError(f"horizon {T} is shorter than the memory {m}")
            regrets, bounds = [], []
            for k in range(config.runs):
                losses, G = memory_core.adversarial_quadratics(
                    T, config.dimension, m, seed=config.seed * 100_003 + k
                )
                if config.gbound is not None:
                    G = config.gbound
                eta = config.eta or memory_core.theorem1_learning_rate(ball.diameter, G, m, T)
                run = memory_core.run_ogd_memory(losses, ball, eta)
                comp = memory_core.offline_comparator(losses, ball)
                regrets.append(memory_core.empirical_regret(run.decisions, comp.x, losses).total)
                bounds.append(memory_core.regret_bound(G, ball.diameter, m, T))
            rows.append(_regret_row(T, regrets, bounds))
        bound_name = "2GD sqrt(mT)"
    elif config.adversary == "osa":
        m = config.memory or statarb.DEFAULT_MEMORY
        if config.synth is None:
            config.synth = "cointegrated-pair"
        for T in horizons:
            series = data_io.generate_synthetic(_synth_spec(config, T=T))
            Y = series.prices
            path = statarb.osa_path(Y, config.lam, m, eta=config.eta, G=config.gbound)
            children = np.random.SeedSequence(config.seed).spawn(config.runs)
            regrets = [
                statarb.osa_regret(statarb.osa_run(Y, config.lam, m, seed=c, path=path), Y)
                for c in children
            ]
            bound = 3.0 * math.sqrt(m) * path.G * statarb.SPECTRAHEDRON_DIAMETER * T ** 0.75
            # the bound holds in expectation, so compare the mean over runs
            rows.append(_regret_row(T, regrets, [bound], expected=True))
        bound_name = "3 sqrt(m) GD T^(3/4)"
    else:
        raise ParameterError(f"unknown adversary {config.adversary!r}")

    Ts = np.array([r["T"] for r in rows], dtype=float)
    means = np.array([r["mean_regret"] for r in rows])
    slope = None
    if len(rows) >= 2:
        slope = float(np.polyfit(np.log(Ts), np.log(np.maximum(means, 1.0)), 1)[0])
    return {
        "meta": {
            "command": "regret-experiment",
            "adversary": config.adversary,
            "m": m,
            "runs": config.runs,
            "seed": config.seed,
            "bound": bound_name,
            "loglog_slope": slope,
        },
        "rows": rows,
    }


def _regret_row(T, regrets, bounds, expected=False):
    regrets = np.asarray(regrets, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    within = regrets.mean() <= bounds.min() if expected else np.all(regrets <= bounds)
    return {
        "T": int(T),
        "mean_regret": float(regrets.mean()),
        "max_regret": float(regrets.max()),
        "bound": float(bounds.min()),
        "within_bound": bool(within),
    }


def cmd_portmanteau(config):
    series = load_input(config)
    x = _fixed_weights(config, series)
    values = evaluation.portfolio_values(x, series.prices)
    report = evaluation.portmanteau(evaluation.daily_changes(values), config.lags)
    return data_io.RunReport(
        meta={"command": "portmanteau", "T": series.T, "n": series.n, "weights": x,
              "assets": list(series.assets), "seed": config.seed},
        portmanteau=report.to_dict(),
        values=values,
    )


def cmd_backtest(config):
    series = load_input(config)
    x = _fixed_weights(config, series)
    values = evaluation.portfolio_values(x, series.prices)
    log = evaluation.threshold_backtest(values, config.lower, config.upper)
    return data_io.RunReport(
        meta={"command": "backtest", "T": series.T, "n": series.n, "weights": x,
              "assets": list(series.assets), "lower": config.lower, "upper": config.upper,
              "seed": config.seed},
        backtest=log.to_dict(),
        values=values,
    )


def cmd_synth(config):
    if config.synth is None:
        config.synth = "cointegrated-pair"
    if config.synth == "cointegrated":
        config.synth = "cointegrated-pair"
    return data_io.generate_synthetic(_synth_spec(config))


# -- rendering --------------------------------------------------------------


def _table_csv(doc):
    rows = doc["rows"]
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols and k != "weights")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                    for c in cols])
    return buf.getvalue()


def render(result, fmt):
    if isinstance(result, data_io.PriceSeries):
        buf = io.StringIO()
        buf.write("date," + ",".join(result.assets) + "\n")
        for d, row in zip(result.dates, result.prices):
            buf.write(d + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()
    if isinstance(result, data_io.RunReport):
        return data_io.dumps_report_csv(result) if fmt == "csv" else data_io.dumps_report(result)
    if fmt == "csv":
        return _table_csv(result)
    return data_io.dumps_report(result)


# -- argument parsing -------------------------------------------------------


def _add_input(p):
    g = p.add_argument_group("input")
    g.add_argument("--input", help="price CSV (long or wide format)")
    g.add_argument("--synth", choices=data_io.SYNTHETIC_KINDS + ("cointegrated",),
                   help="generate a synthetic series instead of reading a file")
    g.add_argument("--T", type=int, default=2000, help="synthetic horizon")
    g.add_argument("--n-assets", type=int, default=2)
    g.add_argument("--kappa", type=float, default=0.1, help="OU speed per step")
    g.add_argument("--sigma", type=float, default=0.01, help="per-step log volatility")
    g.add_argument("--sigma-z", type=float, default=0.015, help="stationary spread std")
    g.add_argument("--rho", type=float, default=0.0)
    g.add_argument("--phi", type=float, default=0.6)
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--level", type=float, default=50.0)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _add_model(p):
    p.add_argument("--lambda", dest="lam", type=float, default=statarb.DEFAULT_LAMBDA)
    p.add_argument("--memory", type=int, default=statarb.DEFAULT_MEMORY)
    p.add_argument("--eta", type=float, default=None, help="override the learning rate")
    p.add_argument("--gbound", type=float, default=None, help="override the gradient bound G")
    p.add_argument("--causal", action="store_true",
                   help="update with the previous window's gradient only")


def _add_scoring(p):
    p.add_argument("--lags", type=int, default=evaluation.DEFAULT_LAGS)
    p.add_argument("--lower", type=float, default=-1.0)
    p.add_argument("--upper", type=float, default=1.0)


def build_parser():
    parser = _Parser(prog="memarb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("osa", help="run the online portfolio algorithm")
    _add_input(p)
    _add_common(p)
    _add_model(p)
    _add_scoring(p)
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--rescale", action="store_true", help="divide each asset by its first price")
    p.set_defaults(func=cmd_osa)

    p = sub.add_parser("compare-pairs", help="Benchmark vs Off-opt vs OSA on a pair")
    _add_input(p)
    _add_common(p)
    _add_model(p)
    _add_scoring(p)
    p.add_argument("--runs", type=int, default=50)
    p.set_defaults(func=cmd_compare_pairs)

    p = sub.add_parser("regret-experiment", help="regret against the bound over horizons")
    _add_input(p)
    _add_common(p)
    p.add_argument("--adversary", choices=("quadratic", "osa"), default="quadratic")
    p.add_argument("--horizons", type=_ints, default=[100, 316, 1000])
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--dimension", type=int, default=5)
    p.add_argument("--lambda", dest="lam", type=float, default=statarb.DEFAULT_LAMBDA)
    p.add_argument("--memory", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--gbound", type=float, default=None)
    p.set_defaults(func=cmd_regret_experiment)

    p = sub.add_parser("portmanteau", help="Portmanteau test of a fixed portfolio")
    _add_input(p)
    _add_common(p)
    p.add_argument("--weights", type=_floats, default=None)
    p.add_argument("--lags", type=int, default=evaluation.DEFAULT_LAGS)
    p.set_defaults(func=cmd_portmanteau)

    p = sub.add_parser("backtest", help="threshold trading of a fixed portfolio")
    _add_input(p)
    _add_common(p)
    p.add_argument("--weights", type=_floats, default=None)
    p.add_argument("--lower", type=float, default=-1.0)
    p.add_argument("--upper", type=float, default=1.0)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("synth", help="write a synthetic price CSV")
    _add_input(p)
    _add_common(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    config = parser.parse_args(argv)
    try:
        for name in ("runs", "lags", "memory"):
            value = getattr(config, name, None)
            if value is not None and value < 1:
                raise ParameterError(f"--{name} must be at least 1")
        result = config.func(config)
        text = render(result, config.format)
        if config.out:
            with data_io._open_for_write(config.out) as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        for w in getattr(result, "warnings", None) or (
            result.get("warnings", []) if isinstance(result, dict) else []
        ):
            print(f"warning: {w}", file=sys.stderr)
    except ParameterError as exc:
        print(f"memarb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"memarb: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFault as exc:
        print(f"memarb: numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
