"""Command-line entry point: ``agenet train|predict|cv|synth``.

Exit codes: 0 success, 1 usage or input-format error, 2 computation error.
Config files are flat ``key = value`` text; see ``agenet <command> --help``.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from agenet import kernels
from agenet.bayes_net import TrainingError, log_posterior, predict_sleep, train
from agenet.domain import N_AGE_GROUPS, AgeGroup, SleepState, ValidationError, check
from agenet.evaluation import DEFAULT_GRID, CvError, CvPlan, grid_search, run_cv
from agenet.feature_selection import MrmrConfig, rank_features
from agenet.gmm import EmConfig
from agenet.io import (
    FormatError,
    dumps,
    jsonable,
    load_model,
    read_dataset,
    save_model,
    write_atomic,
    write_dataset,
)
from agenet.metrics import NOMINAL, alpha, interpret_alpha
from agenet.synth import REFERENCE_GROUP_SIZES, SynthSpec, make_inseparable_model, make_separable_model, sample_dataset

log = logging.getLogger("agenet")

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE = 0, 1, 2

EM_HELP = """\
EM keys (train, cv): max_iters=200, tol=1e-6 (relative log-likelihood change),
  reg_eps=1e-6 (covariance ridge relative to mean feature variance), n_restarts=3, seed=0
"""

TRAIN_HELP = (
    """\
train config keys:
  d=4, k_qs=1, k_nonqs=1      fixed model size (used unless grid_search=true)
  n_bins=10                   mRMR discretization bins
  grid_search=false           pick (d, k_qs, k_nonqs) by inner patient CV
  grid_d=2,4,8,12  grid_k_qs=1,2,3  grid_k_nonqs=1,2,3  inner_folds=18
"""
    + EM_HELP
)

CV_HELP = (
    """\
cv plan keys:
  outer_folds=10, inner_folds=18, seed=0, n_bins=10
  grid_d=2,4,8,12  grid_k_qs=1,2,3  grid_k_nonqs=1,2,3
"""
    + EM_HELP
)

SYNTH_HELP = """\
synth spec keys:
  separation=3.0, d=4, k_qs=1, k_nonqs=1, model_seed=0   generating model
  inseparable=false            identical distributions in every age group
  model=PATH                   use an existing model file as the generating truth
  recordings_per_group=8,17,21,14,19,23
  epochs_min=100, epochs_max=300, n_patients=40, noise_features=4, seed=0
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Config:
    """Flat key = value file; unknown keys are rejected."""

    def __init__(self, path, allowed):
        self.values = {}
        if path is not None:
            cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
            try:
                text = Path(path).read_text()
                cp.read_string("[config]\n" + text, source=str(path))
            except (OSError, configparser.Error) as exc:
                raise UsageError(f"{path}: {exc}") from None
            self.values = dict(cp["config"])
            unknown = sorted(set(self.values) - set(allowed))
            if unknown:
                raise UsageError(f"{path}: unknown keys: {', '.join(unknown)}")
        self.path = path

    def _get(self, key, default, conv):
        if key not in self.values:
            return default
        try:
            return conv(self.values[key])
        except ValueError:
            raise UsageError(f"{self.path}: bad value for {key}: {self.values[key]!r}") from None

    def int(self, key, default):
        return self._get(key, default, int)

    def float(self, key, default):
        return self._get(key, default, float)

    def bool(self, key, default):
        def conv(v):
            v = v.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(v)

        return self._get(key, default, conv)

    def ints(self, key, default):
        return self._get(key, tuple(default), lambda v: tuple(int(x) for x in v.split(",") if x.strip()))

    def str(self, key, default):
        return self._get(key, default, str)


EM_KEYS = ("max_iters", "tol", "reg_eps", "n_restarts", "seed")
GRID_KEYS = ("grid_d", "grid_k_qs", "grid_k_nonqs", "inner_folds", "n_bins")


def _em_config(cfg: Config, seed_override):
    d = EmConfig()
    seed = cfg.int("seed", d.seed) if seed_override is None else seed_override
    try:
        return EmConfig(
            max_iters=cfg.int("max_iters", d.max_iters),
            tol=cfg.float("tol", d.tol),
            reg_eps=cfg.float("reg_eps", d.reg_eps),
            n_restarts=cfg.int("n_restarts", d.n_restarts),
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _grid(cfg: Config):
    ds = cfg.ints("grid_d", sorted({g[0] for g in DEFAULT_GRID}))
    kq = cfg.ints("grid_k_qs", sorted({g[1] for g in DEFAULT_GRID}))
    kn = cfg.ints("grid_k_nonqs", sorted({g[2] for g in DEFAULT_GRID}))
    return tuple((d, a, b) for d in ds for a in kq for b in kn)


def _plan(cfg: Config, seed_override, outer_default=10):
    try:
        return CvPlan(
            outer_folds=cfg.int("outer_folds", outer_default),
            inner_folds=cfg.int("inner_folds", 18),
            grid=_grid(cfg),
            seed=cfg.int("seed", 0) if seed_override is None else seed_override,
            n_bins=cfg.int("n_bins", 10),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_data(path):
    ds = read_dataset(path)
    check(ds)
    return ds


def cmd_train(args) -> int:
    cfg = Config(args.config, ("d", "k_qs", "k_nonqs", "grid_search") + EM_KEYS + GRID_KEYS)
    em = _em_config(cfg, args.seed)
    ds = _load_data(args.data)
    n_bins = cfg.int("n_bins", 10)
    if cfg.bool("grid_search", False):
        plan = _plan(cfg, args.seed)
        gr = grid_search(ds, plan, em)
        d, k_qs, k_nonqs = gr.best
        print(f"grid search ({gr.inner_folds} inner folds): best d={d} k_qs={k_qs} k_nonqs={k_nonqs}")
    else:
        d = cfg.int("d", min(4, ds.n_features))
        k_qs = cfg.int("k_qs", 1)
        k_nonqs = cfg.int("k_nonqs", 1)
    if not 1 <= d <= ds.n_features:
        raise UsageError(f"d={d} outside 1..{ds.n_features}")
    ranking = rank_features(ds, MrmrConfig(n_bins=n_bins, max_features=d))
    model = train(ds, d, k_qs, k_nonqs, em, ranking.top(d))
    extra = {"n_bins": n_bins, "mrmr_scores": list(ranking.scores)}
    model = dataclasses.replace(model, training={**model.training, **extra})
    save_model(model, args.out, ds.feature_names)

    names = [ds.feature_names[i] for i in model.feature_indices]
    print(f"selected features: {', '.join(names)}")
    print(f"{'age':>6} {'state':>6} {'epochs':>7} {'k':>2} {'loglik':>14} conv")
    for c in model.training["cells"]:
        label = AgeGroup(c["age"]).label
        print(
            f"{label:>6} {c['state']:>6} {c['n_epochs']:7d} {c['k']:2d} "
            f"{c['log_likelihood']:14.4f} {'yes' if c['converged'] else 'no'}"
        )
    print(f"QS probability per age group: {', '.join(f'{q:.3f}' for q in model.qs_prob)}")
    print(f"model written to {args.out}")
    return EXIT_OK


def predict_report(model, ds) -> tuple[dict, str]:
    rows = []
    lines = [f"{'recording':<12} {'patient':<10} {'PMA':>6} {'true':>6} {'MAP':>6}  posterior"]
    for rec in ds.recordings:
        post = log_posterior(model, rec)
        dec = predict_sleep(model, rec, post.map_age)
        entry = {
            "recording_id": rec.recording_id,
            "patient_id": rec.patient_id,
            "pma_weeks": rec.pma_weeks,
            "true_age": int(rec.age_group),
            "map_age": int(post.map_age),
            "map_label": post.map_age.label,
            "probs": post.probs.tolist(),
            "log_scores": post.log_scores.tolist(),
            "sleep_states": [SleepState(s).name for s in dec.states],
            "qs_posterior": dec.qs_posterior.tolist(),
        }
        if rec.labeled and rec.n_epochs >= 2:
            a = alpha(rec.sleep_labels, dec.states, 2, NOMINAL)
            entry["sleep_alpha_nominal"] = a.value
            entry["sleep_alpha_degenerate"] = a.degenerate
        rows.append(entry)
        probs = " ".join(f"{p:.3f}" for p in post.probs)
        lines.append(
            f"{rec.recording_id:<12} {rec.patient_id:<10} {rec.pma_weeks:6.2f} "
            f"{rec.age_group.label:>6} {post.map_age.label:>6}  {probs}"
        )
    correct = sum(r["map_age"] == r["true_age"] for r in rows)
    lines.append(f"{correct}/{len(rows)} recordings assigned to their PMA group")
    return {"age_groups": [AgeGroup(a).label for a in range(N_AGE_GROUPS)], "recordings": rows}, "\n".join(lines)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = _load_data(args.data)
    report, summary = predict_report(model, ds)
    write_atomic(args.out, dumps(jsonable(report)))
    print(summary)
    return EXIT_OK


def cv_summary(report) -> str:
    head = "true/pred"
    lines = [f"{head:>12} " + " ".join(f"{AgeGroup(a).label:>6}" for a in range(N_AGE_GROUPS)) + "    acc"]
    per_class = report.to_dict()["per_class_accuracy"]
    for a in range(N_AGE_GROUPS):
        acc = "   n/a" if per_class[a] is None else f"{100 * per_class[a]:5.1f}%"
        lines.append(
            f"{AgeGroup(a).label:>12} " + " ".join(f"{v:6d}" for v in report.confusion[a]) + f" {acc}"
        )
    band = interpret_alpha(max(-1.0, min(1.0, report.alpha_ordinal)))
    lines.append(f"accuracy {100 * report.accuracy:.1f}%, ordinal alpha {report.alpha_ordinal:.3f} ({band})")
    lines.append(f"misclassified beyond adjacent groups: {report.beyond_adjacent}/{len(report.recordings)}")
    for f in report.folds:
        lines.append(f"fold {f.fold}: d={f.params[0]} k_qs={f.params[1]} k_nonqs={f.params[2]}")
    sleep = [r.sleep_alpha for r in report.recordings if r.sleep_alpha is not None]
    if sleep:
        lines.append(f"median per-recording sleep alpha (nominal): {float(np.median(sleep)):.3f}")
    return "\n".join(lines)


def cmd_cv(args) -> int:
    cfg = Config(args.config, ("outer_folds", "grid_search", "d", "k_qs", "k_nonqs") + EM_KEYS + GRID_KEYS)
    em = _em_config(cfg, args.seed)
    plan = _plan(cfg, args.seed)
    ds = _load_data(args.data)
    report = run_cv(ds, plan, em)
    write_atomic(args.out, dumps(jsonable(report.to_dict())))
    print(cv_summary(report))
    return EXIT_OK


def synth_spec(cfg: Config, seed_override) -> SynthSpec:
    d = cfg.int("d", 4)
    k_qs, k_nonqs = cfg.int("k_qs", 1), cfg.int("k_nonqs", 1)
    model_seed = cfg.int("model_seed", 0)
    model_path = cfg.str("model", None)
    try:
        if model_path:
            model = load_model(model_path)
        elif cfg.bool("inseparable", False):
            model = make_inseparable_model(d, k_qs, k_nonqs, model_seed)
        else:
            model = make_separable_model(cfg.float("separation", 3.0), d, k_qs, k_nonqs, model_seed)
        return SynthSpec(
            model=model,
            recordings_per_group=cfg.ints("recordings_per_group", REFERENCE_GROUP_SIZES),
            epochs_per_recording=(cfg.int("epochs_min", 100), cfg.int("epochs_max", 300)),
            n_patients=cfg.int("n_patients", 40),
            noise_features=cfg.int("noise_features", 4),
            seed=cfg.int("seed", 0) if seed_override is None else seed_override,
        )
    except (ValueError, OSError) as exc:
        raise UsageError(f"invalid synth spec: {exc}") from None


def cmd_synth(args) -> int:
    allowed = (
        "separation", "d", "k_qs", "k_nonqs", "model_seed", "inseparable", "model", "recordings_per_group",
        "epochs_min", "epochs_max", "n_patients", "noise_features", "seed",
    )
    spec = synth_spec(Config(args.config, allowed), args.seed)
    ds = sample_dataset(spec)
    write_dataset(ds, args.out)
    counts = [sum(1 for r in ds.recordings if r.age_group == a) for a in range(N_AGE_GROUPS)]
    n_epochs = sum(r.n_epochs for r in ds.recordings)
    print(f"recordings per group: {', '.join(f'{AgeGroup(a).label}={c}' for a, c in enumerate(counts))}")
    print(f"{len(ds)} recordings, {len(ds.patients)} patients, {n_epochs} epochs, {ds.n_features} features")
    print(f"data written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="agenet", description="Brain-age estimation with an age-dependent Bayesian network of GMMs.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"agenet 0.1.0 (kernels: {kernels.BACKEND})")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.RawDescriptionHelpFormatter

    t = sub.add_parser("train", help="fit a model on a labeled epoch CSV", epilog=TRAIN_HELP, formatter_class=fmt)
    t.add_argument("--data", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True, help="model file (JSON)")
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="estimate brain-age and sleep states")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", required=True, help="report file (JSON)")
    pr.set_defaults(func=cmd_predict)

    c = sub.add_parser("cv", help="nested patient cross-validation", epilog=CV_HELP, formatter_class=fmt)
    c.add_argument("--data", required=True)
    c.add_argument("--config")
    c.add_argument("--out", required=True, help="report file (JSON)")
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_cv)

    s = sub.add_parser("synth", help="sample a synthetic epoch CSV", epilog=SYNTH_HELP, formatter_class=fmt)
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="epoch CSV")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        return args.func(args)
    except (UsageError, FormatError, ValidationError, OSError) as exc:
        print(f"agenet {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, CvError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"agenet {args.command}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
