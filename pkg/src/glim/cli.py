"""Command-line entry point: ``glim <subcommand>``.

Exit codes: 0 ok, 2 configuration, 3 file or format problem, 4 numeric
failure, 5 property violation.
"""
from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import (ConfigError, DomainError, GlimError, ModelError, ParseError, SizeError,
                     TrainingError, ValidationError)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_PROPERTY = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class Output:
    def __init__(self, args):
        self.json = args.json
        self.quiet = args.quiet

    def info(self, msg):
        """Progress lines: stdout in human mode, silenced by --quiet or --json."""
        if not self.quiet and not self.json:
            print(msg, flush=True)

    def result(self, obj, human=None):
        if self.json:
            print(json.dumps(obj, sort_keys=True))
        elif human is not None:
            print(human)
        else:
            print(json.dumps(obj, sort_keys=True, indent=2))


def warn(msg):
    print(f"glim: {msg}", file=sys.stderr)


def _derived_seed(seed, *keys) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *keys]).generate_state(1)[0])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def _graph_files(directory):
    if not os.path.isdir(directory):
        raise CliError(EXIT_IO, f"{directory}: not a directory")
    files = sorted(glob.glob(os.path.join(directory, "*.edges")),
                   key=lambda p: (len(os.path.basename(p)), os.path.basename(p)))
    if not files:
        raise CliError(EXIT_IO, f"{directory}: no *.edges files")
    return files


def read_seeds(g, path):
    """Seed file: one node label per line, or a JSON object with a ``seeds`` list."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        labels = json.loads(text)["seeds"]
    else:
        labels = [ln.split()[0] for ln in text.splitlines()
                  if ln.strip() and not ln.lstrip().startswith("#")]
    index = {str(lab): i for i, lab in enumerate(g.labels)}
    try:
        seeds = [index[str(lab)] for lab in labels]
    except KeyError as exc:
        raise ValidationError(f"{path}: unknown node label {exc}") from None
    if len(set(seeds)) != len(seeds):
        raise ValidationError(f"{path}: duplicate seed")
    return seeds


# ------------------------------------------------------------------ commands

def cmd_generate(args, out):
    from .graph import MODEL_ALIASES, GeneratorConfig, generate, save_graph

    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    cfgs = [GeneratorConfig(MODEL_ALIASES[args.model], args.n, args.m, args.triad_p,
                            _derived_seed(args.seed, i)) for i in range(args.count)]
    try:
        os.makedirs(args.out, exist_ok=True)
        paths = []
        for i, cfg in enumerate(cfgs):
            path = os.path.join(args.out, f"g_{i}.edges")
            save_graph(generate(cfg), path)
            paths.append(path)
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot write to {args.out}: {exc}") from None
    out.result({"graphs": paths}, "\n".join(paths))


def cmd_label(args, out):
    from .dataset import build_dataset, save_dataset
    from .graph import load_graph

    if args.max_seeds < 1 or args.sims < 1 or args.negatives < 0:
        raise ConfigError("--max-seeds and --sims must be >= 1, --negatives >= 0")
    files = _graph_files(args.graphs)
    graphs = [load_graph(p) for p in files]
    base = os.path.dirname(os.path.abspath(args.out))
    rel = [os.path.relpath(os.path.abspath(p), base) for p in files]
    ds = build_dataset(graphs, args.max_seeds, args.sims, args.negatives, args.seed, rel)
    save_dataset(ds, args.out)
    counts = {s: len(ds.split(s)) for s in ("train", "val", "test")}
    out.result({"samples": len(ds.samples), "graphs": len(graphs), "splits": counts},
               f"{len(ds.samples)} samples from {len(graphs)} graphs -> {args.out}")


def cmd_train(args, out):
    from .dataset import load_dataset
    from .evaluation import mae_relative
    from .glie import GlieConfig, predict_samples, save_model, train

    cfg = GlieConfig(args.feat_dim, tuple(args.widths), args.dropout, args.lr, args.epochs,
                     args.patience, args.batch_size, args.seed)
    ds = load_dataset(args.dataset)

    def log(epoch, tr, val):
        out.info(f"epoch={epoch} train_mse={tr:.6g} val_mse={val:.6g}")

    model = train(cfg, ds, log)
    save_model(model, args.out)
    result = {"best_epoch": model.info["best_epoch"], "best_val_mse": model.info["best_val_mse"]}
    test = ds.split("test")
    if test:
        result["test_rel_mae"] = mae_relative(predict_samples(model, ds, test), [s.label for s in test])
    out.result(result, f"best_epoch={model.info['best_epoch']}")


def cmd_maximize(args, out):
    from .evaluation import select
    from .glie import load_model
    from .graph import load_graph
    from .grim import load_qnet

    if args.k < 0:
        raise ConfigError("--k must be >= 0")
    needs_model = args.method in ("celf-glie", "pun", "grim")
    if needs_model and not args.model:
        raise ConfigError(f"--method {args.method} needs --model")
    if args.method == "grim" and not args.qnet:
        raise ConfigError("--method grim needs --qnet")
    g = load_graph(args.graph)
    model = load_model(args.model) if needs_model else None
    qnet = load_qnet(args.qnet) if args.method == "grim" else None
    res = select(g, args.method, args.k, model, qnet, args.sims, args.seed, args.aff_interval,
                 args.candidates)
    obj = res.to_json(g, timing=not args.no_timing)
    if args.out:
        _write_json(args.out, obj)
    out.result(obj, " ".join(str(s) for s in obj["seeds"]))


def cmd_evaluate(args, out):
    from .graph import load_graph
    from .simulate import simulate_ic

    g = load_graph(args.graph)
    est = simulate_ic(g, read_seeds(g, args.seeds), args.sims, args.seed)
    obj = est.to_json()
    if args.out:
        _write_json(args.out, obj)
    out.result(obj, f"spread {est.mean:.6g} +/- {est.std_err:.3g} ({est.n_sims} sims)")


def cmd_estimate(args, out):
    from .glie import GlieEstimator, load_model
    from .graph import load_graph

    g = load_graph(args.graph)
    model = load_model(args.model)
    sigma = GlieEstimator(model, g).predict(read_seeds(g, args.seeds))
    obj = {"sigma_hat": sigma, "n": g.n}
    human = f"sigma_hat {sigma:.6g}"
    if sigma > g.n:
        obj["note"] = "estimate exceeds node count; clamped"
        obj["sigma_hat_clamped"] = float(g.n)
        human += f" (exceeds n={g.n}; clamped to {g.n})"
    out.result(obj, human)


def cmd_check(args, out):
    from .evaluation import check_monotone_submodular
    from .glie import GlieEstimator, load_model
    from .graph import load_graph, make_rng
    from .maximize import celf_glie

    g = load_graph(args.graph)
    model = load_model(args.model)
    if not 1 <= args.k < g.n:
        raise ConfigError("--k must lie in [1, n)")
    traj = celf_glie(g, args.k, model).seeds
    rest = np.setdiff1d(np.arange(g.n), traj)
    if rest.size < len(traj):
        raise ConfigError("graph too small for a random sequence of length k")
    rng = make_rng(_derived_seed(args.seed, 1))
    rand = rng.choice(rest, len(traj), replace=False)
    series = check_monotone_submodular(GlieEstimator(model, g).predict, traj, rand,
                                       _derived_seed(args.seed, 2))
    data = series.as_dict()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for name, vals in data.items():
            with open(os.path.join(args.out, f"{name}.txt"), "w", encoding="utf-8") as fh:
                fh.write("".join(f"{v!r}\n" for v in vals))
    names = ("m_ss", "m_sr") if args.property == "mono" else ("s_ss", "s_sr")
    worst = series.min(names)
    ok = worst >= -args.tol
    obj = {"property": args.property, "min": worst, "ok": ok,
           "mean_m_ss": float(np.mean(data["m_ss"])), "mean_m_sr": float(np.mean(data["m_sr"]))}
    out.result(obj, f"{args.property}: min {worst:.6g} -> {'ok' if ok else 'VIOLATED'}")
    if not ok:
        raise CliError(EXIT_PROPERTY, f"{args.property} violated (min {worst:.6g})")


def cmd_report(args, out):
    from .evaluation import load_config, run_experiment

    cfg = load_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    for key in ("model", "qnet"):
        if cfg.get(key) and not os.path.isabs(cfg[key]):
            cfg[key] = os.path.join(base, cfg[key])
    graphs = []
    for spec in cfg.get("graphs", []):
        if isinstance(spec, str) and not os.path.isabs(spec):
            spec = {"path": os.path.join(base, spec), "name": os.path.basename(spec)}
        elif isinstance(spec, dict) and "path" in spec and not os.path.isabs(spec["path"]):
            spec = dict(spec, path=os.path.join(base, spec["path"]))
            spec.setdefault("name", os.path.basename(spec["path"]))
        graphs.append(spec)
    cfg["graphs"] = graphs
    cfg.setdefault("seed", args.seed)
    report = run_experiment(cfg, timing=not args.no_timing)
    report.config = load_config(args.config)
    prefix = args.out
    with open(prefix + ".csv", "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    _write_json(prefix + ".json", report.to_json())
    out.result({"rows": len(report.rows), "csv": prefix + ".csv", "json": prefix + ".json"},
               report.to_csv().rstrip("\n"))


def cmd_train_grim(args, out):
    from .glie import load_model
    from .graph import load_graph
    from .grim import GrimConfig, grim_train, save_qnet

    graphs = [load_graph(p) for p in _graph_files(args.graphs)]
    cfg = GrimConfig(hid=args.hid, episodes=args.episodes, seeds_per_game=args.seeds_per_game,
                     epsilon=args.epsilon, lr=args.lr, rng_seed=args.seed)

    def log(ep, score, eps):
        out.info(f"episode={ep} mean_sigma_hat={score:.6g} epsilon={eps:.4g}")

    net = grim_train(graphs, load_model(args.model), cfg, log)
    save_qnet(net, args.out)
    out.result({"best_score": net.info["best_score"]}, f"best_score={net.info['best_score']:.6g}")


def cmd_relerr(args, out):
    from .evaluation import relative_error_protocol
    from .glie import load_model
    from .graph import load_graph

    g = load_graph(args.graph)
    model = load_model(args.model)
    rows = [relative_error_protocol(g, model, s, n_sims=args.sims, rng_seed=args.seed)
            for s in args.sizes]
    out.result({"rows": rows}, "\n".join(f"size={r['size']} rel_err={r['rel_err']:.4f}" for r in rows))


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="glim", description="Learned influence estimation and seed selection.")
    p.add_argument("--version", action="version", version=f"glim {__version__}")
    p.add_argument("--seed", type=int, default=42, help="master random seed (default 42)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for simulation")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    p.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
    p.add_argument("--no-timing", action="store_true",
                   help="report wall times as 0 so outputs are byte-reproducible")
    sub = p.add_subparsers(dest="command", required=True)
    D = argparse.ArgumentDefaultsHelpFormatter

    s = sub.add_parser("generate", help="write synthetic graphs", formatter_class=D)
    s.add_argument("--model", choices=("ba", "hk"), default="ba")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--triad-p", type=float, default=0.5)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("label", help="build a labelled training set", formatter_class=D)
    s.add_argument("--graphs", required=True, help="directory of *.edges files")
    s.add_argument("--max-seeds", type=int, default=5)
    s.add_argument("--sims", type=int, default=1000)
    s.add_argument("--negatives", type=int, default=30)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("train", help="train the spread estimator", formatter_class=D)
    s.add_argument("--dataset", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--feat-dim", type=int, default=50, help="seed indicator width")
    s.add_argument("--widths", type=int, nargs="+", default=[32, 16], help="hidden layer widths")
    s.add_argument("--dropout", type=float, default=0.4, help="dropout rate")
    s.add_argument("--lr", type=float, default=0.01, help="Adam learning rate")
    s.add_argument("--epochs", type=int, default=100, help="maximum epochs")
    s.add_argument("--patience", type=int, default=50, help="early-stop patience in epochs")
    s.add_argument("--batch-size", type=int, default=64, help="samples per minibatch")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("maximize", help="select seeds", formatter_class=D)
    s.add_argument("--graph", required=True)
    s.add_argument("--model")
    s.add_argument("--qnet")
    s.add_argument("--method", required=True,
                   choices=("celf-mc", "celf-glie", "pun", "grim", "degdisc", "kcore"))
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--sims", type=int, default=1000, help="cascades per estimate for celf-mc")
    s.add_argument("--aff-interval", type=int, default=5)
    s.add_argument("--candidates", choices=("mean", "top", "all"), default="mean")
    s.add_argument("--out")
    s.set_defaults(func=cmd_maximize)

    s = sub.add_parser("evaluate", help="Monte-Carlo spread of a seed set", formatter_class=D)
    s.add_argument("--graph", required=True)
    s.add_argument("--seeds", required=True)
    s.add_argument("--sims", type=int, default=10_000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("estimate", help="learned spread estimate of a seed set", formatter_class=D)
    s.add_argument("--graph", required=True)
    s.add_argument("--seeds", required=True)
    s.add_argument("--model", required=True)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("check", help="monotonicity / submodularity series", formatter_class=D)
    s.add_argument("--graph", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--property", choices=("mono", "submod"), required=True)
    s.add_argument("--k", type=int, default=20)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--out", help="directory for the four series files")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("report", help="run an experiment config", formatter_class=D)
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="report", help="output prefix for .csv and .json")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("train-grim", help="train the Q-network selector", formatter_class=D)
    s.add_argument("--graphs", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--hid", type=int, default=16)
    s.add_argument("--episodes", type=int, default=500)
    s.add_argument("--seeds-per-game", type=int, default=100)
    s.add_argument("--epsilon", type=float, default=0.3)
    s.add_argument("--lr", type=float, default=1e-3)
    s.set_defaults(func=cmd_train_grim)

    s = sub.add_parser("relerr", help="estimator error on random and top-degree seed sets",
                       formatter_class=D)
    s.add_argument("--graph", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--sizes", type=int, nargs="+", default=[20, 50, 100])
    s.add_argument("--sims", type=int, default=10_000)
    s.set_defaults(func=cmd_relerr)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Output(args)
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            from .simulate import set_threads
            set_threads(args.threads)
        args.func(args, out)
    except CliError as exc:
        warn(str(exc))
        return exc.code
    except TrainingError as exc:
        warn(str(exc))
        return EXIT_NUMERIC
    except (ConfigError, DomainError, SizeError) as exc:
        warn(str(exc))
        return EXIT_CONFIG
    except (ParseError, ValidationError, ModelError, OSError, json.JSONDecodeError) as exc:
        warn(str(exc))
        return EXIT_IO
    except (ArithmeticError, FloatingPointError) as exc:
        warn(f"numeric failure: {exc}")
        return EXIT_NUMERIC
    except GlimError as exc:  # pragma: no cover - every subclass is mapped above
        warn(str(exc))
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
