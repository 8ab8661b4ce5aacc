"""Command-line front end: ``gfcf {fit,eval,recommend,sweep,verify}``.

Exit status: 0 success, 2 input/IO error, 3 validation or dimension error,
4 non-finite numbers detected.
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import theory
from .errors import InputError, NumericError, ParseError, ValidationError
from .evaluation import (
    _read_lines,
    evaluate_cutoffs,
    holdout_split,
    load_split,
    split_from_rows,
    write_reports,
)
from .recommend import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_DIM,
    DEFAULT_MU,
    Kind,
    fit_model,
    load_model,
    read_manifest,
    recommend,
    save_model,
)
from .sparse import DEFAULT_DENSE_CAP, normalize
from .spectral import GpmConfig
from .synthetic import random_interactions

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3, 4

# (default, parser) for every option that a --config file may supply
OVERLAY = {
    "alpha": (DEFAULT_ALPHA, float),
    "beta": (None, str),
    "K": (None, int),
    "mu": (DEFAULT_MU, float),
    "dim": (DEFAULT_DIM, int),
    "seed": (0, int),
    "max_iter": (1000, int),
    "tol": (1e-10, float),
    "dense_cap": (DEFAULT_DENSE_CAP, int),
    "k": ("20", str),
    "topn": (20, int),
    "workers": (None, int),
}


def _float_list(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None


def read_config(path):
    out = {}
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        for tok in line.split():
            key, sep, val = tok.partition("=")
            if not sep:
                raise ParseError(f"expected key=value, got {tok!r}", path=path, line=no)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _resolve(args):
    """Fill unset options from ``--config`` and then from the defaults."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for name, (default, conv) in OVERLAY.items():
        if not hasattr(args, name):
            continue
        if getattr(args, name) is None:
            if name in cfg:
                try:
                    setattr(args, name, conv(cfg[name]))
                except ValueError:
                    raise ParseError(f"bad value for {name}: {cfg[name]!r}", path=args.config) from None
            else:
                setattr(args, name, default)
    for key in ("train", "test", "method", "model", "out"):
        if hasattr(args, key) and getattr(args, key) is None and key in cfg:
            setattr(args, key, cfg[key])
    return args


def _beta(args):
    if args.beta is not None:
        beta = _float_list(args.beta)
    elif args.K is not None:
        beta = [1.0] * args.K
    else:
        beta = list(DEFAULT_BETA)
    if args.K is not None and len(beta) != args.K:
        raise ValidationError(f"--beta has {len(beta)} entries but --K is {args.K}")
    if not beta:
        raise ValidationError("--beta must not be empty")
    return tuple(beta)


def _set_workers(n):
    if n is None:
        return
    if n < 1:
        raise ValidationError("--workers must be >= 1")
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:  # pragma: no cover
        pass


def _train_matrix(train_path, n_users=None, n_items=None):
    if train_path is None:
        raise ValidationError("--train is required")
    return split_from_rows(_read_lines(train_path), {}, n_users, n_items).train


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_fit(args, out=sys.stdout):
    if args.method is None or args.out is None:
        raise ValidationError("fit needs --method and --out")
    kind = Kind(args.method)
    beta = _beta(args)
    if args.test:
        train = load_split(args.train, args.test).train
    else:
        train = _train_matrix(args.train)
    gpm = GpmConfig(k=args.dim, max_iterations=args.max_iter, tolerance=args.tol, seed=args.seed)
    model = fit_model(
        kind,
        train,
        alpha=args.alpha,
        beta=beta,
        mu=args.mu,
        dim=args.dim,
        normalized_input=args.normalized_input,
        dense_cap=args.dense_cap,
        gpm=gpm,
    )
    if model.basis is not None:
        _check_finite(model.basis.vectors, "spectral basis")
    save_model(args.out, model, train_path=Path(args.train).resolve())
    if args.test:
        with open(str(args.out) + ".manifest", "a") as fh:
            fh.write(f"test={Path(args.test).resolve()}\n")
    # kept apart so the basis and manifest stay byte-identical across runs
    Path(str(args.out) + ".timing").write_text(f"fit_seconds={model.fit_seconds!r}\n")
    print(f"fit {kind.value}: {model.n_users} users x {model.n_items} items, nnz={train.nnz}", file=out)
    if model.basis is not None:
        b = model.basis
        print(
            f"spectral basis: k={b.k} iterations={b.iterations_used} "
            f"residual={b.residual:.3e} converged={b.converged}"
            + (" (rank-deficient: truncated)" if b.rank_deficient else ""),
            file=out,
        )
    print(f"fit time: {model.fit_seconds * 1e3:.1f} ms", file=out)
    return EXIT_OK


def _model_and_split(args):
    meta = read_manifest(args.model)
    train_path = args.train or meta.get("train")
    test_path = getattr(args, "test", None) or meta.get("test")
    if train_path is None:
        raise ValidationError("training file unknown: pass --train")
    n_users, n_items = int(meta["n_users"]), int(meta["n_items"])
    test_rows = _read_lines(test_path) if test_path else {}
    data = split_from_rows(_read_lines(train_path), test_rows, n_users, n_items)
    model = load_model(args.model, data.train)
    return model, data, meta


def _recorded_fit_seconds(model_path):
    try:
        text = Path(str(model_path) + ".timing").read_text()
        return float(text.strip().partition("=")[2])
    except (OSError, ValueError):
        return float("nan")


def cmd_eval(args, out=sys.stdout):
    if args.model is None:
        raise ValidationError("eval needs --model")
    model, data, meta = _model_and_split(args)
    if not data.test:
        raise ValidationError("no test interactions: pass --test")
    ks = _int_list(args.k)
    reports = evaluate_cutoffs(model, data, ks, dataset=args.dataset or "", method=model.kind.value)
    fit_seconds = _recorded_fit_seconds(args.model)
    for r in reports:
        r.wall_time_fit = fit_seconds
        if not (math.isfinite(r.recall) and math.isfinite(r.ndcg)):
            raise NumericError("non-finite metric")
    write_reports(reports, args.csv, args.json, timings=not args.omit_timings)
    for r in reports:
        print(
            f"{r.method} k={r.k}: recall={r.recall:.4f} ndcg={r.ndcg:.4f} "
            f"(users={r.users_evaluated}, skipped={r.users_skipped}, eval {r.wall_time_eval:.3f}s)",
            file=out,
        )
    return EXIT_OK


def cmd_recommend(args, out=sys.stdout):
    if args.model is None:
        raise ValidationError("recommend needs --model")
    model, _, _ = _model_and_split(args)
    users = np.arange(model.n_users) if args.users in (None, "all") else np.array(_int_list(args.users))
    slates = recommend(model, users, n=args.topn)
    lines = [f"{s.user}\t{i}\t{v:.9g}\n" for s in slates for i, v in zip(s.item_ids, s.scores)]
    text = "user\titem\tscore\n" + "".join(lines)
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_sweep(args, out=sys.stdout):
    alphas = _float_list(args.alphas)
    if not alphas:
        raise ValidationError("empty alpha grid")
    if any(a < 0 for a in alphas):
        raise ValidationError("alpha must be >= 0")
    train = _train_matrix(args.train)
    data = holdout_split(train, args.holdout, args.seed)
    gpm = GpmConfig(k=args.dim, max_iterations=args.max_iter, tolerance=args.tol, seed=args.seed)
    base = fit_model(Kind.GFCF, data.train, alpha=0.0, dim=args.dim, dense_cap=args.dense_cap, gpm=gpm,
                     normalized_input=args.normalized_input)
    k = _int_list(args.k)[0]
    rows = []
    for a in alphas:
        rep = evaluate_cutoffs(base.with_params(alpha=a), data, (k,), method=f"gfcf(alpha={a:g})")[0]
        rows.append((a, rep))
    best_alpha, best = max(rows, key=lambda t: (t[1].recall, -t[0]))
    text = "alpha,k,recall,ndcg\n" + "".join(
        f"{a:g},{r.k},{r.recall:.6f},{r.ndcg:.6f}\n" for a, r in rows
    )
    text += f"best,{best.k},{best.recall:.6f},{best.ndcg:.6f}\n"
    if args.csv:
        Path(args.csv).write_text(text)
    out.write(text)
    print(f"best alpha: {best_alpha:g}", file=out)
    return EXIT_OK


def _spectrum_rows(args):
    reports = []
    ok = True
    for s in range(args.seeds):
        rng = np.random.default_rng((args.seed, s))
        n_items = int(rng.integers(2, args.items + 1))
        n_users = int(rng.integers(2, args.users + 1)) if args.users else n_items
        density = float(rng.uniform(args.density_min, args.density_max))
        g = normalize(random_interactions(n_users, n_items, density, seed=(args.seed, s)))
        rep = theory.verify_spectrum(g, args.dense_cap)
        ok &= rep.ok
        reports.append(
            theory.TheoryReport(
                experiment="spectrum",
                d=n_items,
                seed=s,
                coherence_bound=float(rep.item_eigenvalues.max()) if rep.item_eigenvalues.size else 0.0,
                ordering_success_rate=1.0 if rep.ok else 0.0,
            )
        )
    return reports, ok


def cmd_verify(args, out=sys.stdout):
    exp = args.experiment
    if exp == "spectrum":
        reports, ok = _spectrum_rows(args)
        summary = f"spectrum: {sum(r.ordering_success_rate for r in reports):.0f}/{len(reports)} graphs within bounds"
    elif exp == "t1":
        g = normalize(random_interactions(args.users or 30, args.items, args.density_max, args.seed, min_degree=1))
        reports = [theory.verify_theorem1(g, d, args.trials, args.seed) for d in _int_list(args.dims)]
        summary = "\n".join(
            f"t1 d={r.d}: success={r.ordering_success_rate:.3f} median coherence={r.coherence:.4f} "
            f"bound={r.coherence_bound:.4f} violations={r.implication_violations}"
            for r in reports
        )
    elif exp == "t2":
        g = normalize(random_interactions(args.users or 20, args.items, args.density_max, args.seed, min_degree=1))
        reports = theory.verify_theorem2(g, _int_list(args.dims), args.seed)
        summary = "\n".join(
            f"t2 d={r.d}: spearman={r.score_correlation:.4f} rel_frobenius={r.rel_frobenius:.4f}"
            for r in reports
        )
    elif exp == "coherence":
        n = (args.users or 30) + args.items
        reports = []
        for d in _int_list(args.dims):
            frac, limit, values = theory.coherence_experiment(n, d, args.seeds, seed=args.seed)
            for s, v in enumerate(values):
                reports.append(
                    theory.TheoryReport("coherence", d, s, coherence=float(v), coherence_bound=limit,
                                        ordering_success_rate=float(v <= limit))
                )
        summary = f"coherence: {len(reports)} draws"
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown experiment {exp!r}")
    text = theory.theory_reports_to_csv(reports)
    if args.out:
        Path(args.out).write_text(text)
    print(summary, file=out)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="gfcf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_):
        sp_.add_argument("--config", help="key=value file; explicit flags win")
        sp_.add_argument("--workers", type=int, default=None)
        sp_.add_argument("--seed", type=int, default=None)
        sp_.add_argument("--dense-cap", dest="dense_cap", type=int, default=None)

    def model_params(sp_):
        sp_.add_argument("--alpha", type=float, default=None)
        sp_.add_argument("--beta", default=None, help="comma-separated, e.g. 1,1")
        sp_.add_argument("--K", type=int, default=None)
        sp_.add_argument("--mu", type=float, default=None)
        sp_.add_argument("--dim", type=int, default=None)
        sp_.add_argument("--max-iter", dest="max_iter", type=int, default=None)
        sp_.add_argument("--tol", type=float, default=None)
        sp_.add_argument("--normalized-input", dest="normalized_input", action="store_true")

    f = sub.add_parser("fit", help="fit a model and persist it")
    common(f)
    model_params(f)
    f.add_argument("--method", choices=[k.value for k in Kind])
    f.add_argument("--train")
    f.add_argument("--test", help="optional; sizes the model to the train+test id space")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="recall/ndcg of a persisted model")
    common(e)
    e.add_argument("--model")
    e.add_argument("--train")
    e.add_argument("--test")
    e.add_argument("--k", default=None, help="cutoff(s), comma-separated")
    e.add_argument("--dataset", default="")
    e.add_argument("--csv")
    e.add_argument("--json")
    e.add_argument("--omit-timings", dest="omit_timings", action="store_true",
                   help="leave timing fields empty so reports are byte-reproducible")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("recommend", help="top-N slates as TSV")
    common(r)
    r.add_argument("--model")
    r.add_argument("--train")
    r.add_argument("--test")
    r.add_argument("--users", default=None, help="comma-separated ids or 'all'")
    r.add_argument("--topn", type=int, default=None)
    r.add_argument("--out")
    r.set_defaults(func=cmd_recommend)

    s = sub.add_parser("sweep", help="GF-CF alpha grid on a seeded holdout")
    common(s)
    s.add_argument("--train")
    s.add_argument("--alphas", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    s.add_argument("--holdout", type=float, default=0.2)
    s.add_argument("--dim", type=int, default=None)
    s.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    s.add_argument("--tol", type=float, default=None)
    s.add_argument("--k", default=None)
    s.add_argument("--normalized-input", dest="normalized_input", action="store_true")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="Monte-Carlo and spectrum checks")
    common(v)
    v.add_argument("--experiment", required=True, choices=["spectrum", "t1", "t2", "coherence"])
    v.add_argument("--items", type=int, default=200)
    v.add_argument("--users", type=int, default=None)
    v.add_argument("--seeds", type=int, default=100)
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--dims", default="64,512,4096,16384")
    v.add_argument("--density-min", dest="density_min", type=float, default=0.02)
    v.add_argument("--density-max", dest="density_max", type=float, default=0.2)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _resolve(args)
        _set_workers(args.workers)
        return args.func(args, out=out)
    except NumericError as exc:
        print(f"gfcf: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError) as exc:
        print(f"gfcf: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValidationError, ValueError) as exc:
        print(f"gfcf: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
