"""Command-line experiment runner.

    normlab <subcommand> [--config PATH] [--seed N] [--out PATH] [key=value ...]

Config files are flat ``key = value`` lines with ``#`` comments. Command-line
``key=value`` pairs override the file, and ``--seed``/``--out`` override both.
Every subcommand writes CSV with a header row and 17-significant-digit floats.
Exit codes: 0 ok, 2 configuration error, 3 collapse or non-convergence when
``fatal = true``.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import analysis, descent, latentgen, network
from .errors import ConfigError, TrainingCollapse
from .rng import make_rng
from .ssl_grads import potential_loop_integral

EXIT_OK, EXIT_CONFIG, EXIT_FATAL = 0, 2, 3


# ---------------------------------------------------------------------------
# value parsing


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _list(item):
    def parse(s: str):
        parts = [p for p in s.replace(";", ",").split(",") if p.strip()]
        if not parts:
            raise ValueError("empty list")
        return [item(p.strip()) for p in parts]
    parse.__name__ = f"list[{item.__name__}]"
    return parse


def _choice(*options):
    def parse(s: str):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    parse.__name__ = "choice"
    return parse


_COMMON = {
    "seed": (int, 0),
    "out": (str, None),
    "fatal": (_bool, False),
}

_DESCENT_KEYS = {
    "dimension": (int, 20),
    "num_pairs": (int, 500),
    "learning_rate": (float, 0.1),
    "gradscale_p": (float, 0.0),
    "temperature": (float, 1.0),
    "mode": (_choice("attraction_only", "infonce"), "attraction_only"),
    "max_steps": (int, 100_000),
    "converge_threshold": (float, 0.999),
    "collapse_threshold": (float, 1e-2),
    "trials": (int, 1),
}

_LATENT_KEYS = {
    "latent_dim": (int, 10),
    "num_classes": (int, 4),
    "samples": (int, 4000),
    "spread": (float, 0.1),
    "obs_dim": (int, 64),
    "imbalance": (_bool, False),
    "batch_size": (int, 128),
    "epochs": (int, 50),
    "learning_rate": (float, 0.01),
    "weight_decay": (float, 0.0),
    "cut_constant": (float, 1.0),
    "gradscale_p": (float, 0.0),
    "temperature": (float, 0.1),
    "hidden": (int, 128),
}

SCHEMAS: dict[str, dict] = {
    "converge": {
        **_COMMON, **_DESCENT_KEYS,
        "norms": (_list(float), [1.0, 2.0, 4.0, 8.0]),
        "alphas": (_list(float), [0.0]),
        "weight_decays": (_list(float), [0.0]),
    },
    "wd-sweep": {
        **_COMMON, **_DESCENT_KEYS,
        "norms": (_list(float), [1.0, 4.0, 7.0]),
        "alphas": (_list(float), [0.0]),
        "weight_decays": (_list(float), [0.5, 1.0, 10.0]),
    },
    "latent-train": {
        **_COMMON, **_LATENT_KEYS,
        "knn_k": (int, 10),
        "density_m": (int, 10),
        "bucket_threshold": (int, 20),
        "export_dataset": (_bool, False),
    },
    "bound-check": {
        **_COMMON,
        "trials": (int, 10_000),
        "dimension": (int, 20),
        "norms": (_list(float), [0.5, 1.0, 2.0, 8.0]),
        "learning_rates": (_list(float), [0.01, 0.1, 1.0]),
        "cheb_dims": (_list(int), [10, 20, 100]),
        "cheb_eps": (_list(float), [0.3, 0.5]),
        "cheb_trials": (int, 100_000),
    },
    "opphalves": {
        **_COMMON, **_LATENT_KEYS,
        "source": (_choice("nonparametric", "parametric"), "nonparametric"),
        "dimension": (int, 20),
        "num_pairs": (int, 500),
        "norm": (float, 1.0),
        "alpha": (float, 0.0),
        "descent_learning_rate": (float, 0.1),
        "descent_weight_decay": (float, 0.0),
        "mode": (_choice("attraction_only", "infonce"), "attraction_only"),
        "max_steps": (int, 100_000),
        "converge_threshold": (float, 0.999),
        "epochs": (int, 16),
    },
    "potential": {
        **_COMMON,
        "alphas": (_list(float), [0.0, 0.5, 1.0, 2.0]),
        "steps_per_segment": (_list(int), [1000, 10_000]),
        "dim": (int, 2),
    },
}

COLUMNS = {
    "converge": ["seed", "d", "num_pairs", "norm", "alpha", "lr", "wd", "gradscale_p",
                 "outcome", "steps", "final_mean_cos"],
    "bound-check": ["trial", "d", "norm", "lr", "cos_before", "delta", "bound", "margin"],
    "chebyshev": ["d", "eps", "bound", "empirical_rate", "trials"],
    "opphalves": ["step", "rate", "mean_cos", "mean_norm"],
    "potential": ["alpha", "steps_per_segment", "integral", "expected", "abs_error"],
    "points": ["index", "label", "norm", "inv_density", "knn_pred"],
    "buckets": ["lo", "hi", "count", "accuracy"],
}
COLUMNS["wd-sweep"] = COLUMNS["converge"]


def parse_config_text(text: str, subcommand: str, source: str = "<config>") -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{subcommand}: {source}:{lineno}: expected 'key = value', got {line!r}",
                              key=line, subcommand=subcommand)
        k, v = line.split("=", 1)
        raw[k.strip()] = v.strip()
    return raw


def resolve_config(subcommand: str, raw: dict[str, str]) -> dict:
    schema = SCHEMAS[subcommand]
    cfg = {k: default for k, (_, default) in schema.items()}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"{subcommand}: unknown key {key!r}", key=key, subcommand=subcommand)
        parse = schema[key][0]
        try:
            cfg[key] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{subcommand}: bad value for {key!r}: {exc}",
                              key=key, subcommand=subcommand) from None
    return cfg


# ---------------------------------------------------------------------------
# CSV helpers


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def _sidecar(out: Path, suffix: str, ext: str = ".csv") -> Path:
    return out.with_name(f"{out.stem}_{suffix}{ext}")


def _config_guard(subcommand: str, cond: bool, key: str, msg: str):
    if not cond:
        raise ConfigError(f"{subcommand}: {key}: {msg}", key=key, subcommand=subcommand)


# ---------------------------------------------------------------------------
# subcommands; each returns True if a fatal outcome occurred


def _descent_grid(cfg: dict, subcommand: str, out: Path) -> bool:
    rows = []
    fatal = False
    try:
        for trial in range(cfg["trials"]):
            seed = cfg["seed"] + trial
            for wd in cfg["weight_decays"]:
                for rho in cfg["norms"]:
                    for alpha in cfg["alphas"]:
                        spec = descent.PairInitSpec(cfg["dimension"], cfg["num_pairs"], rho, alpha, seed)
                        dc = descent.DescentConfig(
                            learning_rate=cfg["learning_rate"], weight_decay=wd,
                            gradscale_p=cfg["gradscale_p"], temperature=cfg["temperature"],
                            max_steps=cfg["max_steps"], converge_threshold=cfg["converge_threshold"],
                            collapse_threshold=cfg["collapse_threshold"], mode=cfg["mode"])
                        r = descent.run_to_convergence(spec, dc)
                        fatal |= r.outcome != "converged"
                        rows.append([seed, cfg["dimension"], cfg["num_pairs"], float(rho), float(alpha),
                                     cfg["learning_rate"], float(wd), cfg["gradscale_p"],
                                     r.outcome, r.steps, r.final_mean_cos])
    except ValueError as exc:
        raise ConfigError(f"{subcommand}: {exc}", subcommand=subcommand) from None
    write_csv(out, COLUMNS[subcommand], rows)
    return fatal


def cmd_converge(cfg: dict, out: Path) -> bool:
    return _descent_grid(cfg, "converge", out)


def cmd_wd_sweep(cfg: dict, out: Path) -> bool:
    return _descent_grid(cfg, "wd-sweep", out)


def _latent_setup(cfg: dict, subcommand: str):
    try:
        spec = latentgen.LatentSpec(cfg["latent_dim"], cfg["num_classes"], cfg["samples"],
                                    cfg["spread"], cfg["obs_dim"], cfg["imbalance"], cfg["seed"])
        tc = network.TrainConfig(cfg["batch_size"], cfg["epochs"], cfg["learning_rate"],
                                 cfg["weight_decay"], cfg["cut_constant"], cfg["gradscale_p"],
                                 cfg["temperature"], cfg["hidden"], cfg["seed"])
    except ValueError as exc:
        raise ConfigError(f"{subcommand}: {exc}", subcommand=subcommand) from None
    ds = latentgen.generate(spec)
    sizes = [len(m) for m in ds.class_members()]
    _config_guard(subcommand, min(sizes) >= 2, "samples", f"every class needs >= 2 samples, got {sizes}")
    return ds, tc


def _trace_row(t: network.EpochTrace, outcome: str = "ok"):
    return [t.epoch, outcome, t.mean_loss, t.mean_embedding_norm, *t.per_class_mean_norm]


def cmd_latent_train(cfg: dict, out: Path) -> bool:
    ds, tc = _latent_setup(cfg, "latent-train")
    k = ds.num_classes
    header = ["epoch", "outcome", "mean_loss", "mean_norm"] + [f"norm_class_{c}" for c in range(k)]
    rows = []

    def record(params, trace):
        rows.append(_trace_row(trace))

    try:
        params, _ = network.train(ds, tc, on_epoch=record)
    except TrainingCollapse:
        epoch = rows[-1][0] + 1 if rows else 0
        rows.append([epoch, "collapsed", float("nan"), float("nan")] + [float("nan")] * k)
        write_csv(out, header, rows)
        return True
    write_csv(out, header, rows)

    Z = network.forward(params, ds.observations)
    norms = np.linalg.norm(Z, axis=1)
    inv = analysis.inverse_density(Z, cfg["density_m"])
    pred, acc = analysis.knn_classify(Z, ds.labels, cfg["knn_k"])
    write_csv(_sidecar(out, "points"), COLUMNS["points"],
              ([i, int(ds.labels[i]), norms[i], inv[i], int(pred[i])] for i in range(len(Z))))
    rep = analysis.bucket_accuracy(Z, ds.labels, cfg["knn_k"], cfg["bucket_threshold"], predictions=pred)
    write_csv(_sidecar(out, "buckets"), COLUMNS["buckets"], rep.buckets)
    write_csv(_sidecar(out, "summary"), ["metric", "value"], [
        ["knn_accuracy", acc],
        ["norm_density_spearman", analysis.norm_density_rho(norms, inv)],
        *[[f"class_{c}_mean_norm", v] for c, v in
          enumerate(analysis.per_class_norm_means(Z, ds.labels, k))],
    ])
    network.save_checkpoint(params, _sidecar(out, "checkpoint", ".txt"))
    if cfg["export_dataset"]:
        latentgen.export_dataset(ds, _sidecar(out, "dataset"))
    return False


def cmd_bound_check(cfg: dict, out: Path) -> bool:
    _config_guard("bound-check", cfg["dimension"] >= 2, "dimension", "must be >= 2")
    rng = make_rng(cfg["seed"])
    rows = []
    trial = 0
    for rho in cfg["norms"]:
        for lr in cfg["learning_rates"]:
            for _ in range(cfg["trials"]):
                x = rng.standard_normal(cfg["dimension"])
                y = rng.standard_normal(cfg["dimension"])
                x *= rho / np.linalg.norm(x)
                y *= rho / np.linalg.norm(y)
                c0 = float(np.clip(x @ y / (rho * rho), -1, 1))
                delta, bound = descent.theorem_bound_check(x, y, lr)
                rows.append([trial, cfg["dimension"], rho, lr, c0, delta, bound, bound - delta])
                trial += 1
    write_csv(out, COLUMNS["bound-check"], rows)
    cheb = []
    crng = make_rng(cfg["seed"], 1)
    for d in cfg["cheb_dims"]:
        for eps in cfg["cheb_eps"]:
            try:
                b = descent.chebyshev_opposite_bound(d, eps)
            except ValueError as exc:
                raise ConfigError(f"bound-check: cheb_eps: {exc}", key="cheb_eps",
                                  subcommand="bound-check") from None
            rate = descent.empirical_cosine_tail(d, eps, cfg["cheb_trials"], crng)
            cheb.append([d, eps, b, rate, cfg["cheb_trials"]])
    write_csv(_sidecar(out, "chebyshev"), COLUMNS["chebyshev"], cheb)
    return False


def cmd_opphalves(cfg: dict, out: Path) -> bool:
    rows = []
    if cfg["source"] == "nonparametric":
        try:
            spec = descent.PairInitSpec(cfg["dimension"], cfg["num_pairs"], cfg["norm"], cfg["alpha"], cfg["seed"])
            dc = descent.DescentConfig(learning_rate=cfg["descent_learning_rate"],
                                       weight_decay=cfg["descent_weight_decay"],
                                       gradscale_p=cfg["gradscale_p"], temperature=1.0,
                                       max_steps=cfg["max_steps"],
                                       converge_threshold=cfg["converge_threshold"], mode=cfg["mode"])
        except ValueError as exc:
            raise ConfigError(f"opphalves: {exc}", subcommand="opphalves") from None

        def record(step, s):
            rows.append([step, descent.opposite_halves_rate(s), float(np.mean(s.pair_cosines())),
                         s.mean_norm()])

        r = descent.run_to_convergence(spec, dc, on_step=record)
        write_csv(out, COLUMNS["opphalves"], rows)
        return r.outcome != "converged"

    ds, tc = _latent_setup(cfg, "opphalves")
    members = ds.class_members()
    pos = latentgen.sample_positives(ds, np.arange(len(ds.labels)), make_rng(cfg["seed"], 7), members)

    def record_epoch(params, trace):
        Z = network.forward(params, ds.observations)
        s = descent.EmbeddingSet(Z, Z[pos])
        rows.append([trace.epoch, descent.opposite_halves_rate(s), float(np.mean(s.pair_cosines())),
                     trace.mean_embedding_norm])

    try:
        network.train(ds, tc, on_epoch=record_epoch)
    except TrainingCollapse:
        write_csv(out, COLUMNS["opphalves"], rows)
        return True
    write_csv(out, COLUMNS["opphalves"], rows)
    return False


def cmd_potential(cfg: dict, out: Path) -> bool:
    _config_guard("potential", cfg["dim"] >= 2, "dim", "must be >= 2")
    _config_guard("potential", min(cfg["steps_per_segment"]) >= 1, "steps_per_segment", "must be positive")
    rows = []
    for a in cfg["alphas"]:
        expected = 2.0 - 2.0 ** (a + 1.0)
        for n in cfg["steps_per_segment"]:
            val = potential_loop_integral(a, n, cfg["dim"])
            rows.append([a, n, val, expected, abs(val - expected)])
    write_csv(out, COLUMNS["potential"], rows)
    return False


COMMANDS = {
    "converge": cmd_converge,
    "wd-sweep": cmd_wd_sweep,
    "latent-train": cmd_latent_train,
    "bound-check": cmd_bound_check,
    "opphalves": cmd_opphalves,
    "potential": cmd_potential,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="normlab", description=__doc__.split("\n\n")[0])
    ap.add_argument("subcommand", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="flat key = value file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path, help="primary CSV path (sidecars are written next to it)")
    ap.add_argument("overrides", nargs="*", metavar="key=value")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    sub = args.subcommand
    try:
        raw: dict[str, str] = {}
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"{sub}: cannot read config {args.config}: {exc}",
                                  key="--config", subcommand=sub) from None
            raw.update(parse_config_text(text, sub, str(args.config)))
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"{sub}: expected key=value, got {item!r}", key=item, subcommand=sub)
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        if args.seed is not None:
            raw["seed"] = str(args.seed)
        if args.out is not None:
            raw["out"] = str(args.out)
        cfg = resolve_config(sub, raw)
        out = Path(cfg["out"] or f"{sub}.csv")
        fatal = COMMANDS[sub](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if fatal and cfg["fatal"]:
        print(f"{sub}: collapse or non-convergence (fatal = true)", file=sys.stderr)
        return EXIT_FATAL
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
