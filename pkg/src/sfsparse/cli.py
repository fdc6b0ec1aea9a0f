"""Command-line interface: solve one instance, sweep a grid, run the
brute-force oracle, or generate synthetic data.

Exit codes: 0 success, 2 a certificate carries violated chain flags,
1 any other error.  Reports are deterministic given (config, seed); the
``timing.`` lines at the end are the only part excluded from byte
comparisons.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__, model, oracle, spectra
from .certificates import certified_solve, full_rank_bounds
from .model import BALL, CONSTRAINED, LOGISTIC, PENALIZED, PENALTY, QUADRATIC
from .relax import SolverOptions

FORMAT_VERSION = 1

LEUKEMIA_SHAPE = (72, 3751)


class CliError(Exception):
    """User-facing error: message printed to stderr, exit code 1."""


# ---------------------------------------------------------------------------
# CSV input/output


def read_csv_matrix(path):
    """Dense matrix from a comma-separated UTF-8 file.

    An optional single header row is auto-detected (non-numeric first row).
    Ragged rows and unparsable cells are reported with their coordinates.
    """
    rows = []
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        width = None
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            if width is None:
                width = len(row)
                try:
                    rows.append([float(v) for v in row])
                    continue
                except ValueError:
                    # header row: skip it, keep the width
                    continue
            if len(row) != width:
                raise CliError(
                    f"{path}: ragged row {lineno}: {len(row)} fields, expected {width}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                col = next(i for i, v in enumerate(row, start=1)
                           if not _is_float(v))
                raise CliError(
                    f"{path}: parse error at row {lineno}, column {col}: {exc}") from exc
    if not rows:
        raise CliError(f"{path}: no numeric rows found")
    return np.asarray(rows, dtype=float)


def _is_float(v):
    try:
        float(v)
        return True
    except ValueError:
        return False


def read_csv_vector(path):
    a = read_csv_matrix(path)
    if a.shape[1] == 1:
        return a[:, 0]
    if a.shape[0] == 1:
        return a[0, :]
    raise CliError(f"{path}: expected a single column or row, got shape {a.shape}")


def write_csv_matrix(path, a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in a:
            fh.write(",".join(_fmt_float(v) for v in row))
            fh.write("\n")


def _fmt_float(v):
    return repr(float(v))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt_float(v)
    return str(v)


# ---------------------------------------------------------------------------
# Argument parsing helpers


def parse_ridge(text):
    kind, _, val = text.partition(":")
    if kind not in (PENALTY, BALL) or not val:
        raise CliError(f"--ridge must look like penalty:G or ball:G, got {text!r}")
    try:
        return model.RidgeForm(kind, float(val))
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def parse_budget(text):
    kind, _, val = text.partition(":")
    try:
        if kind == "k":
            return model.SparsityBudget.constrained(int(val))
        if kind == "lambda":
            return model.SparsityBudget.penalized(float(val))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    raise CliError(f"--budget must look like k:K or lambda:L, got {text!r}")


def parse_gen_spec(text):
    """Generator spec: comma-separated key=value pairs.

    Keys: n, m, rank, sparsity, beta-std, noise-std, bell (0/1).
    Example: n=1000,m=100,rank=10,sparsity=10,beta-std=5,noise-std=1
    """
    spec = {"n": None, "m": None, "rank": None, "sparsity": 0,
            "beta-std": 5.0, "noise-std": 1.0, "bell": 0}
    for part in text.split(","):
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in spec or not val:
            raise CliError(f"bad generator spec entry {part!r}")
        spec[key] = float(val)
    for key in ("n", "m", "rank"):
        if spec[key] is None:
            raise CliError(f"generator spec is missing {key}=")
    return spec


def parse_grid(text):
    """Grid spec: k:1,2,3 | lambda:1e-4,1e-3 | rank:1..100 | rank:1,5,10."""
    kind, _, body = text.partition(":")
    if kind not in ("k", "lambda", "rank") or not body:
        raise CliError(f"--grid must look like k:..., lambda:... or rank:..., got {text!r}")
    vals = []
    for part in body.split(","):
        if ".." in part:
            a, b = part.split("..")
            vals.extend(range(int(a), int(b) + 1))
        elif kind == "lambda":
            vals.append(float(part))
        else:
            vals.append(int(part))
    if not vals or sorted(vals) != list(vals):
        raise CliError("grid values must be nonempty and sorted ascending")
    return kind, vals


def generate_data(spec, loss, seed):
    """X and y per the experiment data model: y = X beta + eps, logistic
    labels via 2*Round(Sigmoid(X beta + eps)) - 1."""
    n, m, rank = int(spec["n"]), int(spec["m"]), int(spec["rank"])
    if spec["bell"]:
        x = spectra.make_bell_lowrank(n, m, rank, seed=[seed, 0])
    else:
        x = spectra.make_lowrank(n, m, rank, seed=[seed, 0])
    beta = spectra.make_sparse_coef(m, int(spec["sparsity"]), spec["beta-std"],
                                    seed=[seed, 1])
    rng = np.random.default_rng([seed, 2])
    signal = x @ beta + (rng.normal(0.0, spec["noise-std"], n)
                         if spec["noise-std"] > 0 else np.zeros(n))
    if loss == LOGISTIC:
        y = 2.0 * np.round(model.sigmoid(signal)) - 1.0
    else:
        y = signal
    return x, y


def standardize_columns(x):
    """Zero-mean, unit-variance columns (constant columns left centered)."""
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0.0] = 1.0
    return (x - mu) / sd


def _load_data(args, loss):
    if args.gen and (args.x or args.y):
        raise CliError("give either --x/--y or --gen, not both")
    if args.gen:
        return generate_data(parse_gen_spec(args.gen), loss, args.seed)
    if not args.x or not args.y:
        raise CliError("need --x PATH and --y PATH (or --gen SPEC)")
    x = read_csv_matrix(args.x)
    y = read_csv_vector(args.y)
    return x, y


def _svd_for(inst, rank_approx):
    if rank_approx is not None:
        return spectra.compact_svd(inst.x, rank=rank_approx)
    return spectra.compact_svd(inst.x, tol=1e-12)


# ---------------------------------------------------------------------------
# Report writing


def certificate_pairs(prefix, cert):
    pairs = [
        (f"{prefix}.family", cert.family),
        (f"{prefix}.budget_value", cert.budget_value),
        (f"{prefix}.rank_used", cert.rank_used),
        (f"{prefix}.bidual", cert.bidual),
        (f"{prefix}.dual", cert.dual),
        (f"{prefix}.opt", cert.opt),
        (f"{prefix}.opt_card", cert.opt_card),
        (f"{prefix}.lower", cert.lower),
        (f"{prefix}.upper", cert.upper),
        (f"{prefix}.rho", cert.rho),
        (f"{prefix}.zeta", cert.zeta),
        (f"{prefix}.zeta_r", cert.zeta_r),
        (f"{prefix}.slack_used", cert.slack_used),
        (f"{prefix}.opt_dispersion", cert.opt_dispersion),
        (f"{prefix}.converged", cert.converged),
        (f"{prefix}.chain_ok", cert.chain_ok),
    ]
    for check in cert.checks:
        pairs.append((f"{prefix}.check.{check.name}.ok", check.ok))
        pairs.append((f"{prefix}.check.{check.name}.residual", check.residual))
    return pairs


def write_report(out, pairs, timing_pairs=()):
    lines = [f"{k} = {_fmt(v)}" for k, v in pairs]
    lines += [f"timing.{k} = {_fmt(v)}" for k, v in timing_pairs]
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _config_pairs(args, inst, rank_approx):
    return [
        ("format_version", FORMAT_VERSION),
        ("tool", f"sfsparse {__version__}"),
        ("seed", args.seed),
        ("config.loss", inst.loss),
        ("config.ridge", f"{inst.ridge.kind}:{_fmt_float(inst.ridge.gamma)}"),
        ("config.budget", f"k:{inst.budget.k}" if inst.budget.kind == CONSTRAINED
         else f"lambda:{_fmt_float(inst.budget.lam)}"),
        ("config.rank_approx", rank_approx if rank_approx is not None else "full"),
        ("config.trials", args.trials),
        ("config.tol", args.tol),
        ("config.n", inst.n),
        ("config.m", inst.m),
    ]


# ---------------------------------------------------------------------------
# Subcommands


def cmd_solve(args):
    x, y = _load_data(args, args.loss)
    inst = model.ProblemInstance(x, y, args.loss, parse_ridge(args.ridge),
                                 parse_budget(args.budget))
    t0 = time.perf_counter()
    cert, _sol, best = certified_solve(
        inst, _svd_for(inst, args.rank_approx), seed=args.seed,
        trials=args.trials, opts=SolverOptions(tol_obj=args.tol))
    elapsed = time.perf_counter() - t0
    pairs = _config_pairs(args, inst, args.rank_approx) + certificate_pairs("certificate", cert)
    write_report(args.out, pairs, [("solve_seconds", elapsed)])
    if args.out is not None:
        print(f"family {cert.family}  bidual {cert.bidual:.6g}  OPT {cert.opt:.6g} "
              f"(card {cert.opt_card})  bracket [{cert.lower:.6g}, {cert.upper:.6g}]  "
              f"chain {'ok' if cert.chain_ok else 'VIOLATED'}")
    return 0 if cert.chain_ok else 2


SWEEP_COLUMNS = ("grid", "bidual", "dual", "opt", "card", "lower", "upper",
                 "zeta", "zeta_r", "opt_std")


def _sweep_point(inst, grid_kind, value, rank_approx, seed, trials, tol):
    opts = SolverOptions(tol_obj=tol)
    if grid_kind == "k":
        pinst = replace(inst, budget=model.SparsityBudget.constrained(value))
        cert = certified_solve(pinst, _svd_for(pinst, rank_approx), seed=seed,
                               trials=trials, opts=opts)[0]
    elif grid_kind == "lambda":
        pinst = replace(inst, budget=model.SparsityBudget.penalized(value))
        cert = certified_solve(pinst, _svd_for(pinst, rank_approx), seed=seed,
                               trials=trials, opts=opts)[0]
    else:  # rank
        cert = full_rank_bounds(inst, rank_r=value, seed=seed, trials=trials,
                                opts=opts)
    return (value, cert.bidual, cert.dual, cert.opt, cert.opt_card, cert.lower,
            cert.upper, cert.zeta, cert.zeta_r, cert.opt_dispersion), cert.chain_ok


def _run_sweep(inst, grid_kind, grid, rank_approx, seed, trials, tol, workers):
    def point(idx_value):
        idx, value = idx_value
        return _sweep_point(inst, grid_kind, value, rank_approx, seed + idx,
                            trials, tol)

    items = list(enumerate(grid))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(point, items))
    else:
        results = [point(it) for it in items]
    rows = [r for r, _ok in results]
    all_ok = all(ok for _r, ok in results)
    return rows, all_ok


def _write_sweep_csv(path, header_pairs, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in header_pairs:
            fh.write(f"# {k} = {_fmt(v)}\n")
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


PRESETS = ("exp1-regression", "exp1-logistic", "exp2", "exp3")


def cmd_sweep(args):
    if args.preset and args.preset not in PRESETS:
        raise CliError(f"unknown preset {args.preset!r}; choose from {PRESETS}")
    if args.preset == "exp1-regression":
        args.loss = QUADRATIC
        args.ridge = args.ridge or "penalty:0.01"
        args.gen = args.gen or "n=1000,m=100,rank=10,sparsity=10,beta-std=5,noise-std=1"
        grid_kind, grid = parse_grid(args.grid or "lambda:1e-4,1e-3,1e-2,1e-1")
    elif args.preset == "exp1-logistic":
        args.loss = LOGISTIC
        args.ridge = args.ridge or "penalty:0.01"
        args.gen = args.gen or "n=1000,m=100,rank=10,sparsity=10,beta-std=5,noise-std=1"
        grid_kind, grid = parse_grid(args.grid or "k:1,2,3,5,8,10,15,20")
    elif args.preset == "exp2":
        args.loss = QUADRATIC
        args.ridge = args.ridge or "ball:30"
        args.gen = args.gen or "n=1000,m=100,rank=10,sparsity=10,beta-std=5,noise-std=1,bell=1"
        grid_kind, grid = parse_grid(args.grid or "rank:1..100")
        args.budget = args.budget or "lambda:1e-4"  # overridden per lambda below
    elif args.preset == "exp3":
        args.loss = LOGISTIC
        args.ridge = args.ridge or "ball:50"
        args.budget = args.budget or "lambda:0.1"
        if not args.x or not args.y:
            raise CliError(
                "preset exp3 needs the Leukemia data supplied as --x X.csv --y y.csv "
                f"(expected shape {LEUKEMIA_SHAPE[0]}x{LEUKEMIA_SHAPE[1]} plus binary labels); "
                "this tool does not download datasets")
        grid_kind, grid = None, None
    else:
        if not args.grid:
            raise CliError("--grid is required without a preset")
        grid_kind, grid = parse_grid(args.grid)
    if args.out is None:
        raise CliError("sweep needs --out PATH for the tabular output")

    if args.preset == "exp2":
        lambdas = [1e-4, 1e-3, 1e-2] if args.budget == "lambda:1e-4" else \
            [parse_budget(args.budget).lam]
        x, y = _load_data(args, args.loss)
        ridge = parse_ridge(args.ridge)
        all_ok = True
        for lam in lambdas:
            inst = model.ProblemInstance(x, y, args.loss, ridge,
                                         model.SparsityBudget.penalized(lam))
            rows, ok = _run_sweep(inst, grid_kind, grid, None, args.seed,
                                  args.trials, args.tol, args.workers)
            all_ok &= ok
            out = args.out if len(lambdas) == 1 else \
                _suffixed(args.out, f"-lam{_fmt_float(lam)}")
            header = [("format_version", FORMAT_VERSION), ("preset", "exp2"),
                      ("lambda", lam), ("seed", args.seed), ("grid", args.grid or "rank:1..100")]
            _write_sweep_csv(out, header, rows)
            print(f"wrote {out} ({len(rows)} rows)")
        return 0 if all_ok else 2

    if args.preset == "exp3":
        x = read_csv_matrix(args.x)
        y = read_csv_vector(args.y)
        if x.shape != LEUKEMIA_SHAPE:
            print(f"note: data shape {x.shape} differs from the documented "
                  f"{LEUKEMIA_SHAPE}", file=sys.stderr)
        x = standardize_columns(x)
        y = np.where(y > np.median(np.unique(y)) - 1e-12, 1.0, -1.0) if \
            not np.all(np.isin(y, (-1.0, 1.0))) else y
        inst = model.ProblemInstance(x, y, args.loss, parse_ridge(args.ridge),
                                     parse_budget(args.budget))
        grid_kind, grid = parse_grid(args.grid or f"rank:1..{min(x.shape)}")
        rows, ok = _run_sweep(inst, grid_kind, grid, None, args.seed,
                              args.trials, args.tol, args.workers)
        header = [("format_version", FORMAT_VERSION), ("preset", "exp3"),
                  ("seed", args.seed)]
        _write_sweep_csv(args.out, header, rows)
        print(f"wrote {args.out} ({len(rows)} rows)")
        return 0 if ok else 2

    x, y = _load_data(args, args.loss)
    if grid_kind == "rank" and not args.budget:
        raise CliError("rank sweeps need a fixed --budget")
    budget = parse_budget(args.budget) if args.budget else \
        model.SparsityBudget.constrained(grid[0]) if grid_kind == "k" else \
        model.SparsityBudget.penalized(grid[0])
    inst = model.ProblemInstance(x, y, args.loss, parse_ridge(args.ridge), budget)
    rows, ok = _run_sweep(inst, grid_kind, grid, args.rank_approx, args.seed,
                          args.trials, args.tol, args.workers)
    header = [("format_version", FORMAT_VERSION), ("seed", args.seed),
              ("loss", args.loss), ("ridge", args.ridge),
              ("rank_used", _svd_for(inst, args.rank_approx).rank),
              ("grid", args.grid or "")]
    if args.preset:
        header.insert(1, ("preset", args.preset))
    _write_sweep_csv(args.out, header, rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0 if ok else 2


def _suffixed(path, suffix):
    if path.endswith(".csv"):
        return path[: -len(".csv")] + suffix + ".csv"
    return path + suffix


def cmd_oracle(args):
    x, y = _load_data(args, args.loss)
    inst = model.ProblemInstance(x, y, args.loss, parse_ridge(args.ridge),
                                 parse_budget(args.budget))
    count = oracle.enumeration_count(inst.m, inst.budget)
    if count > args.cap:
        raise CliError(
            f"enumeration of {count} supports exceeds the cap of {args.cap}; "
            "raise --cap or shrink the instance")
    res = oracle.exact_solve(inst, cap=args.cap)
    print(f"oracle value = {res.value!r}")
    print(f"oracle support = {','.join(str(i) for i in res.support) or '-'}")
    print(f"subproblems solved = {res.subproblems_solved}")
    if not args.cross_check:
        return 0
    cert, _sol, _best = certified_solve(
        inst, _svd_for(inst, args.rank_approx), seed=args.seed,
        trials=args.trials, opts=SolverOptions(tol_obj=args.tol))
    tol = 1e-6 * (1.0 + abs(res.value))
    ok = cert.chain_ok and cert.bidual <= res.value + tol
    if inst.budget.kind == PENALIZED:
        ok = ok and res.value <= cert.opt + 1e-6 * (1.0 + abs(cert.opt))
    elif cert.opt_card <= inst.budget.k:
        ok = ok and res.value <= cert.opt + 1e-6 * (1.0 + abs(cert.opt))
    print(f"cross-check: bidual {cert.bidual!r} <= oracle <= OPT {cert.opt!r} "
          f"-> {'ok' if ok else 'VIOLATED'}")
    return 0 if ok else 2


def cmd_gen(args):
    spec = {"n": args.n, "m": args.m, "rank": args.rank, "sparsity": args.sparsity,
            "beta-std": args.beta_std, "noise-std": args.noise_std,
            "bell": 1 if args.bell else 0}
    x, y = generate_data(spec, args.loss, args.seed)
    write_csv_matrix(args.x_out, x)
    write_csv_matrix(args.y_out, y[:, None])
    print(f"wrote {args.x_out} ({x.shape[0]}x{x.shape[1]}) and {args.y_out}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_data_args(sp):
    sp.add_argument("--x", help="design matrix CSV (rows = samples)")
    sp.add_argument("--y", help="response vector CSV")
    sp.add_argument("--gen", help="generator spec, e.g. n=100,m=20,rank=5,sparsity=5")
    sp.add_argument("--loss", choices=(QUADRATIC, LOGISTIC), default=QUADRATIC)
    sp.add_argument("--seed", type=int, default=0)


def _add_solver_args(sp):
    sp.add_argument("--ridge", help="penalty:G or ball:G")
    sp.add_argument("--budget", help="k:K or lambda:L")
    sp.add_argument("--rank-approx", type=int, default=None, dest="rank_approx")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--tol", type=float, default=1e-7)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sfsparse",
        description="Certified sparse regression on low-rank data",
    )
    parser.add_argument("--version", action="version",
                        version=f"sfsparse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="certify one budget point")
    _add_data_args(sp)
    _add_solver_args(sp)
    sp.add_argument("--out", help="report path (default: stdout)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="grid sweep; one CSV row per point")
    _add_data_args(sp)
    _add_solver_args(sp)
    sp.add_argument("--grid", help="k:1,2,3 | lambda:1e-4,1e-3 | rank:1..100")
    sp.add_argument("--preset", help="|".join(PRESETS))
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", help="output CSV path")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="exact small-instance solve by enumeration")
    _add_data_args(sp)
    _add_solver_args(sp)
    sp.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP)
    sp.add_argument("--cross-check", action="store_true", dest="cross_check")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("gen", help="write synthetic X/y CSV files")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--rank", type=int, required=True)
    sp.add_argument("--sparsity", type=int, default=0)
    sp.add_argument("--beta-std", type=float, default=5.0, dest="beta_std")
    sp.add_argument("--noise-std", type=float, default=1.0, dest="noise_std")
    sp.add_argument("--bell", action="store_true")
    sp.add_argument("--loss", choices=(QUADRATIC, LOGISTIC), default=QUADRATIC)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--x-out", required=True, dest="x_out")
    sp.add_argument("--y-out", required=True, dest="y_out")
    sp.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, oracle.EnumerationTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
