"""Experiment harness: run configuration, the multi-round active-learning
loop, result persistence, and the command line front end.

Subcommands: ``run`` (active learning), ``sweep`` (risk-versus-ratio
sweep), ``embed`` (spectral preprocessing), ``audit`` (repeats-allowed
selection guarantee checks).  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import baselines, data, embed, synth
from .fisher import fir, labeled_shift, pool_hessian, shifted_fishers, sigma_max, whiten_factors
from .model import class_probabilities, fit_erm
from .relax import relax_solve
from .sparsify import regret_audit, select_batch

SELECTORS = ("firal", "random", "kmeans", "entropy", "var_ratios", "greedy_fb")


@dataclass
class RunConfig:
    """Flat configuration for one active-learning run."""

    seed: int = 0
    data: str = "synthetic"        # "synthetic" or a dataset CSV path
    selector: str = "firal"
    budget: int = 30               # total new labels over all rounds
    rounds: int = 3
    init_per_class: int = 1
    family: str = "gaussian"
    classes: int = 3
    dim: int = 8
    variance: float = 100.0
    dof: float = 5.0
    pool_size: int = 3000
    eta: float | None = None       # fixed FTRL rate; None means grid search
    theory_mode: bool = False
    ridge: float = 1e-6
    relax_iters: int = 200
    risk_points: int = 50_000
    risk_labels: int = 100
    exact_risk: bool = True
    out: str | None = None

    def validate(self):
        if self.selector not in SELECTORS:
            raise ValueError(f"selector must be one of {SELECTORS}")
        if self.rounds < 0 or self.budget < 0:
            raise ValueError("budget and rounds must be nonnegative")
        if self.rounds > 0:
            if self.budget <= 0:
                raise ValueError("budget must be positive when rounds > 0")
            if self.budget % self.rounds != 0:
                raise ValueError("budget must be divisible by rounds")
        if self.init_per_class < 1:
            raise ValueError("init_per_class must be positive")
        if self.data == "synthetic":
            if self.classes < 2 or self.dim < 2:
                raise ValueError("synthetic runs need classes >= 2, dim >= 2")
            n_init = self.init_per_class * self.classes
            if n_init + self.budget > self.pool_size:
                raise ValueError("pool too small for init labels plus budget")
        return self


DEFAULT_ETA_GRID_POWERS = range(-2, 6)


def eta_grid(d_tilde):
    """Default learning-rate grid ``{2^j sqrt(d_tilde), j = -2..5}``."""
    return [2.0**j * np.sqrt(d_tilde) for j in DEFAULT_ETA_GRID_POWERS]


def tune_eta(etas, factors, budget, mask_selected=True):
    """Pick the rate whose selection maximizes the smallest eigenvalue of
    the summed whitened picks.  Duplicate grid entries keep the first
    occurrence; ties keep the earlier grid position.
    """
    seen, grid = set(), []
    for e in etas:
        if e not in seen:
            seen.add(e)
            grid.append(float(e))
    if not grid:
        raise ValueError("eta grid must be nonempty")
    best_eta, best_val = grid[0], -np.inf
    for e in grid:
        _, audit = select_batch(budget, e, factors, mask_selected=mask_selected)
        val = audit.min_eig_cum[-1]
        if val > best_val:
            best_eta, best_val = e, val
    return best_eta


@dataclass
class ExperimentRecord:
    """One row of the run output (round-level summary).

    ``wall_time`` is observability only and is never serialized; the
    emitted CSV must be byte-identical across same-seed reruns.
    """

    round: int
    n_labeled: int
    fir: float
    sigma: float
    excess_risk: float
    risk_stderr: float
    accuracy: float
    eta: float
    margin_min_eig: float
    margin_trace: float
    selected: tuple = field(default_factory=tuple)
    wall_time: float = 0.0


CSV_COLUMNS = (
    "round", "n_labeled", "fir", "sigma", "excess_risk", "risk_stderr",
    "accuracy", "eta", "margin_min_eig", "margin_trace", "selected",
)


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, tuple):
        return ";".join(str(int(v)) for v in value)
    return f"{float(value):.17g}"


def emit_results(records, path):
    """Write records as CSV with the documented fixed column order."""
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(getattr(rec, col)) for col in CSV_COLUMNS) + "\n")


class _SyntheticOracle:
    """Labels on demand from the ground-truth model, one stream per round."""

    def __init__(self, theta_star, streams):
        self.theta_star = theta_star
        self.streams = streams

    def query(self, X, round_index):
        return synth.sample_labels(X, self.theta_star, self.streams[round_index])


def _stratified_init(y_hidden, n_classes, per_class, rng):
    """One (or more) indices per class, scanning a seeded permutation."""
    perm = rng.permutation(len(y_hidden))
    picks = []
    for cls in range(1, n_classes + 1):
        members = perm[y_hidden[perm] == cls]
        if len(members) < per_class:
            raise ValueError(f"class {cls} has fewer than {per_class} pool points")
        picks.extend(members[:per_class].tolist())
    return np.array(sorted(picks), dtype=int)


def _pool_accuracy(X, theta, theta_star=None, y_true=None):
    P = class_probabilities(X, theta)
    pred = np.argmax(P, axis=1)
    if y_true is not None:
        return float(np.mean(pred + 1 == y_true))
    # Expected accuracy under the true conditional label law.
    P_star = class_probabilities(X, theta_star)
    return float(np.mean(P_star[np.arange(len(X)), pred]))


def _spectral_diagnostics(X_pool, X_labeled, theta):
    Hp = pool_hessian(X_pool, theta)
    Hq = pool_hessian(X_labeled, theta)
    try:
        return fir(Hq, Hp), sigma_max(Hq, Hp)
    except np.linalg.LinAlgError:
        return float("inf"), float("inf")


def _select(config, X_pool, unlabeled, theta, round_budget, select_ss):
    """Run the configured selector; returns global indices and audit info."""
    Xu = X_pool[unlabeled]
    eta_used, margin1, margin2 = float("nan"), float("nan"), float("nan")

    if config.selector == "firal":
        shift = labeled_shift(
            X_pool[~np.isin(np.arange(len(X_pool)), unlabeled)], theta, round_budget
        )
        Hp0 = pool_hessian(X_pool, theta)
        fishers = shifted_fishers(Xu, theta, shift)
        relaxed = relax_solve(round_budget, Hp0, fishers, n_iter=config.relax_iters)
        factors = whiten_factors(relaxed.z, Xu, theta, shift)
        mask = not config.theory_mode
        if config.eta is not None:
            eta_used = float(config.eta)
        elif config.theory_mode:
            eta_used = 8.0 * np.sqrt(factors.d_tilde)
        else:
            eta_used = tune_eta(eta_grid(factors.d_tilde), factors,
                                round_budget, mask_selected=mask)
        local, audit = select_batch(round_budget, eta_used, factors,
                                    mask_selected=mask)
        report = regret_audit(audit)
        margin1 = report.worst_min_eig
        if report.worst_trace is not None:
            margin2 = report.worst_trace
    elif config.selector == "random":
        local = baselines.select_random(Xu, round_budget, select_ss)
    elif config.selector == "kmeans":
        local = baselines.select_kmeans(Xu, round_budget, select_ss)
    elif config.selector == "entropy":
        local = baselines.select_entropy(Xu, theta, round_budget)
    elif config.selector == "var_ratios":
        local = baselines.select_var_ratios(Xu, theta, round_budget)
    else:  # greedy_fb
        shift = labeled_shift(
            X_pool[~np.isin(np.arange(len(X_pool)), unlabeled)], theta, round_budget
        )
        local = baselines.select_greedy_fb(Xu, theta, shift, round_budget)

    return unlabeled[np.asarray(local, dtype=int)], eta_used, margin1, margin2


def active_learning_loop(config: RunConfig):
    """Run the configured experiment; returns one record per round.

    Round 0 is the fit on the initial labels.  Each later round selects
    with the previous round's parameters, queries the oracle, refits, and
    records diagnostics.  Deterministic for a fixed seed.
    """
    config.validate()
    root = np.random.SeedSequence(config.seed)
    pool_ss, theta_ss, init_ss, rounds_ss, risk_ss = root.spawn(5)

    if config.data == "synthetic":
        spec_p = _family_spec(config)
        theta_star = synth.make_theta_star(config.classes, config.dim, theta_ss)
        X_pool = synth.sample_pool(spec_p, config.pool_size, pool_ss)
        n_classes = config.classes
        hidden = synth.sample_labels(X_pool, theta_star, init_ss)
        oracle = _SyntheticOracle(theta_star, rounds_ss.spawn(config.rounds + 1))
        y_true = None
    else:
        X_pool, y_all = data.load_dataset(config.data)
        if y_all is None:
            raise ValueError("active learning on CSV data needs a label column")
        n_classes = int(y_all.max())
        theta_star, spec_p = None, None
        hidden = y_all
        oracle = None
        y_true = y_all

    init_rng = np.random.default_rng(init_ss.spawn(1)[0])
    labeled_idx = _stratified_init(hidden, n_classes, config.init_per_class, init_rng)
    labeled_y = hidden[labeled_idx]
    if config.budget + len(labeled_idx) > len(X_pool):
        raise ValueError("pool too small for init labels plus budget")

    risk_streams = risk_ss.spawn(config.rounds + 1)
    select_streams = rounds_ss.spawn(config.rounds + 1)
    round_budget = config.budget // config.rounds if config.rounds else 0
    records = []
    theta = None

    for rnd in range(config.rounds + 1):
        t0 = time.perf_counter()
        eta_used = margin1 = margin2 = float("nan")
        picked = ()

        if rnd > 0:
            unlabeled = np.setdiff1d(np.arange(len(X_pool)), labeled_idx)
            try:
                picks, eta_used, margin1, margin2 = _select(
                    config, X_pool, unlabeled, theta, round_budget,
                    select_streams[rnd],
                )
            except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
                raise type(exc)(
                    f"selector {config.selector!r} failed in round {rnd}: {exc}"
                ) from exc
            if oracle is not None:
                new_y = oracle.query(X_pool[picks], rnd)
            else:
                new_y = y_true[picks]
            labeled_idx = np.concatenate([labeled_idx, picks])
            labeled_y = np.concatenate([labeled_y, new_y])
            picked = tuple(int(i) for i in picks)

        result = fit_erm(X_pool[labeled_idx], labeled_y, n_classes,
                         ridge=config.ridge)
        theta = result.theta

        fir_val, sigma_val = _spectral_diagnostics(X_pool, X_pool[labeled_idx], theta)
        acc = _pool_accuracy(X_pool, theta, theta_star=theta_star, y_true=y_true)
        if spec_p is not None:
            risk, risk_se = synth.mc_excess_risk(
                theta, theta_star, spec_p, n_points=config.risk_points,
                n_labels=config.risk_labels, seed=risk_streams[rnd],
                exact_labels=config.exact_risk, with_stderr=True,
            )
        else:
            risk, risk_se = float("nan"), float("nan")

        records.append(ExperimentRecord(
            round=rnd, n_labeled=len(labeled_idx), fir=fir_val, sigma=sigma_val,
            excess_risk=risk, risk_stderr=risk_se, accuracy=acc, eta=eta_used,
            margin_min_eig=margin1, margin_trace=margin2, selected=picked,
            wall_time=time.perf_counter() - t0,
        ))

    return records


def _family_spec(config: RunConfig):
    if config.family == "gaussian":
        return synth.gaussian_design(config.dim, config.variance)
    return synth.DesignSpec(
        config.family, np.zeros(config.dim),
        config.variance * np.eye(config.dim),
        dof=config.dof if config.family == "student_t" else None,
    )


def load_config(path):
    """Parse a flat ``key=value`` config file into a :class:`RunConfig`."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, raw = (s.strip() for s in line.split("=", 1))
            values[key] = raw
    return _config_from_strings(values)


def _config_from_strings(values):
    kwargs = {}
    by_name = {f.name: f for f in fields(RunConfig)}
    for key, raw in values.items():
        if key not in by_name:
            raise ValueError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(by_name[key], raw)
    return RunConfig(**kwargs)


def _coerce(field_info, raw):
    name, text = field_info.name, str(raw)
    if name in ("eta", "out"):
        return None if text.lower() in ("none", "") else (
            float(text) if name == "eta" else text
        )
    if name in ("theory_mode", "exact_risk"):
        return text.lower() in ("1", "true", "yes", "on")
    if field_info.type in ("int", int):
        return int(text)
    if field_info.type in ("float", float):
        return float(text)
    return text


def _cmd_run(args):
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for key in ("seed", "selector", "budget", "rounds", "out", "eta", "data",
                "pool_size", "classes", "dim", "ridge"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if args.theory_mode:
        overrides["theory_mode"] = True
    config = replace(config, **overrides).validate()

    records = active_learning_loop(config)
    if config.out:
        emit_results(records, config.out)
    for rec in records:
        print(f"round={rec.round} n_labeled={rec.n_labeled} "
              f"accuracy={rec.accuracy:.4f} fir={rec.fir:.6g} "
              f"excess_risk={rec.excess_risk:.6g}")
    return 0


def _cmd_sweep(args):
    d_tilde = args.dim * (args.classes - 1)
    if args.targets:
        targets = [float(t) for t in args.targets.split(",")]
    else:
        lo = 0.2 * d_tilde if args.mode == "dilation" else float(d_tilde)
        targets = np.geomspace(lo, 10.0 * d_tilde, args.n_targets).tolist()
    points = synth.risk_ratio_sweep(
        args.classes, args.dim, targets, args.n,
        seeds=range(args.seed, args.seed + args.seeds),
        mode=args.mode, theta_seed=args.seed, risk_points=args.risk_points,
        n_mc=args.n_mc,
    )
    header = ("mode,target_fir,scale_param,realized_fir,sigma,n,seed,"
              "excess_risk,risk_stderr")
    lines = [header]
    for p in points:
        lines.append(",".join([
            p.mode, f"{p.target_fir:.17g}", f"{p.scale_param:.17g}",
            f"{p.realized_fir:.17g}", f"{p.sigma:.17g}", str(p.n), str(p.seed),
            f"{p.excess_risk:.17g}", f"{p.risk_stderr:.17g}",
        ]))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_embed(args):
    X, y = data.load_dataset(args.input)
    emb = embed.spectral_embed(X, args.neighbors, args.dim_out)
    if y is not None:
        data.save_dataset(args.out, emb, y)
    else:
        data.save_matrix(args.out, emb)
    print(f"embedded {len(emb)} points into {args.dim_out} dimensions")
    return 0


def _cmd_audit(args):
    # Repeats are allowed in the audited mode, so the budget may exceed
    # the pool size; no RunConfig pool constraint applies here.
    if args.classes < 2 or args.dim < 2 or args.budget < 1:
        raise ValueError("audit needs classes >= 2, dim >= 2, budget >= 1")
    root = np.random.SeedSequence(args.seed)
    pool_ss, theta_ss, init_ss, _, _ = root.spawn(5)
    spec_p = synth.gaussian_design(args.dim)
    theta_star = synth.make_theta_star(args.classes, args.dim, theta_ss)
    X = synth.sample_pool(spec_p, args.pool_size, pool_ss)
    hidden = synth.sample_labels(X, theta_star, init_ss)
    rng = np.random.default_rng(init_ss.spawn(1)[0])
    init_idx = _stratified_init(hidden, args.classes, 2, rng)
    theta0 = fit_erm(X[init_idx], hidden[init_idx], args.classes,
                     ridge=1e-6).theta

    shift = labeled_shift(X[init_idx], theta0, args.budget)
    Hp0 = pool_hessian(X, theta0)
    fishers = shifted_fishers(X, theta0, shift)
    relaxed = relax_solve(args.budget, Hp0, fishers, n_iter=200)
    factors = whiten_factors(relaxed.z, X, theta0, shift)
    eta = args.eta if args.eta is not None else 8.0 * np.sqrt(factors.d_tilde)
    _, audit = select_batch(args.budget, eta, factors, mask_selected=False)
    report = regret_audit(audit)

    print(f"eta={eta:.6g} budget={args.budget} d_tilde={factors.d_tilde}")
    print(f"worst_min_eig_margin={report.worst_min_eig:.6e}")
    print(f"worst_trace_margin={report.worst_trace:.6e}")
    ok = report.holds()
    print("guarantees hold" if ok else "GUARANTEE VIOLATED")
    return 0 if ok else 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="firal",
        description="Information-ratio active learning experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an active-learning experiment")
    run.add_argument("--config", help="key=value config file")
    run.add_argument("--seed", type=int)
    run.add_argument("--selector", choices=SELECTORS)
    run.add_argument("--budget", type=int)
    run.add_argument("--rounds", type=int)
    run.add_argument("--out")
    run.add_argument("--eta", type=float)
    run.add_argument("--theory-mode", action="store_true", dest="theory_mode")
    run.add_argument("--data")
    run.add_argument("--pool-size", type=int, dest="pool_size")
    run.add_argument("--classes", type=int)
    run.add_argument("--dim", type=int)
    run.add_argument("--ridge", type=float)
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="risk-versus-information-ratio sweep")
    sweep.add_argument("--mode", choices=("dilation", "translation"),
                       default="dilation")
    sweep.add_argument("--classes", type=int, default=2)
    sweep.add_argument("--dim", type=int, default=8)
    sweep.add_argument("--n", type=int, default=1600)
    sweep.add_argument("--targets", help="comma-separated ratio targets")
    sweep.add_argument("--n-targets", type=int, default=5, dest="n_targets")
    sweep.add_argument("--seeds", type=int, default=10)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--risk-points", type=int, default=50_000,
                       dest="risk_points")
    sweep.add_argument("--n-mc", type=int, default=100_000, dest="n_mc")
    sweep.add_argument("--out")
    sweep.set_defaults(func=_cmd_sweep)

    emb = sub.add_parser("embed", help="spectral embedding preprocessor")
    emb.add_argument("--input", required=True)
    emb.add_argument("--out", required=True)
    emb.add_argument("--neighbors", type=int, default=256)
    emb.add_argument("--dim-out", type=int, default=20, dest="dim_out")
    emb.set_defaults(func=_cmd_embed)

    audit = sub.add_parser("audit", help="repeats-allowed guarantee audit")
    audit.add_argument("--classes", type=int, default=2)
    audit.add_argument("--dim", type=int, default=2)
    audit.add_argument("--pool-size", type=int, default=40, dest="pool_size")
    audit.add_argument("--budget", type=int, default=96)
    audit.add_argument("--eta", type=float)
    audit.add_argument("--seed", type=int, default=0)
    audit.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
