"""Command-line experiment runner.

    bfinito generate --problem pr-squared-l1 --n 64 --d 5 --seed 7 --out inst.txt
    bfinito run --problem pr-squared-l1 --instance inst.txt --algo bfinito --sampler cyclic --out trace.csv
    bfinito compare --problem pr-squared-l1 --runs bfinito:cyclic,bfinito:uniform,lowmem,smd --out cmp.csv

Options may also come from a ``key=value`` file given with ``--config``;
command-line flags take precedence.
"""
import argparse
import concurrent.futures
import csv
import io
import os
import sys
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import datagen
from .diagnostics import CsvTraceSink
from .errors import BFinitoError, UsageError
from .model import Regularizer, poisson_problem, quadratic_problem, squared_loss_problem
from .sampler import make_sampler, spawn_seeds
from .solver_bfinito import bfinito_run
from .solver_lowmem import cyclic_inner, lowmem_run, shuffled_inner
from .solver_md import md_config, md_run

PROBLEMS = ("pr-squared-l1", "pr-squared-l0", "pr-poisson-l1", "toy-quadratic")
ALGOS = ("bfinito", "lowmem", "md", "smd")
# keys that pin down the instance; compare requires them to agree across runs
INSTANCE_KEYS = ("problem", "instance", "n", "d", "N", "seed", "p_corrupt", "lam", "kappa",
                 "gamma_scale", "init")


@dataclass(frozen=True)
class RunConfig:
    problem: str = "pr-squared-l1"
    algo: str = "bfinito"
    sampler: str = "cyclic"
    seed: int = 0
    max_epochs: float = 100.0
    tol: float = 0.0
    lam: Optional[float] = None
    kappa: Optional[int] = None
    alpha: Optional[float] = None
    gamma_scale: float = 0.99
    n: Optional[int] = None
    N: Optional[int] = None
    d: Optional[int] = None
    p_corrupt: Optional[float] = None
    instance: Optional[str] = None
    init: Optional[str] = None
    out: Optional[str] = None
    clock: bool = True

    def validate(self):
        if self.problem not in PROBLEMS:
            raise UsageError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        if self.algo not in ALGOS:
            raise UsageError(f"unknown algo {self.algo!r}; choose from {', '.join(ALGOS)}")
        if self.kappa is not None and self.problem != "pr-squared-l0":
            raise UsageError("--kappa only applies to pr-squared-l0")
        if self.alpha is not None and self.algo != "smd":
            raise UsageError("--alpha only applies to smd")
        if self.alpha is not None and self.alpha <= 0:
            raise UsageError("--alpha must be positive")
        if not 0 < self.gamma_scale < 1:
            raise UsageError("--gamma-scale must lie in (0, 1)")
        if self.max_epochs < 0 or self.tol < 0:
            raise UsageError("--max-epochs and --tol must be nonnegative")
        if self.lam is not None and self.lam < 0:
            raise UsageError("--lambda must be nonnegative")
        if self.init not in (None, "spectral", "random"):
            raise UsageError("--init must be spectral or random")
        return self


# ---------------------------------------------------------------------------
# building instances and problems


def build_instance(cfg):
    if cfg.problem == "toy-quadratic":
        return None
    if cfg.instance and os.path.exists(cfg.instance):
        inst = datagen.load_instance(cfg.instance)
        expected = "poisson" if cfg.problem == "pr-poisson-l1" else "squared"
        if inst.family != expected:
            raise UsageError(f"{cfg.instance}: {inst.family} instance cannot be used for {cfg.problem}")
        return inst
    if cfg.instance:
        raise UsageError(f"instance file {cfg.instance} does not exist")
    if cfg.problem == "pr-poisson-l1":
        n = cfg.n or 32
        N = cfg.N or 4 * n
        p = 1 / 10 if cfg.p_corrupt is None else cfg.p_corrupt
        return datagen.make_poisson_instance(n, N, seed=cfg.seed, p_corrupt=p)
    n = cfg.n or 64
    d = cfg.d or 5
    p = 1 / 50 if cfg.p_corrupt is None else cfg.p_corrupt
    return datagen.make_squared_instance(n, d, p_corrupt=p, seed=cfg.seed)


def build_problem(cfg, inst):
    """Problem and starting point for a configuration."""
    if cfg.problem == "toy-quadratic":
        prob = quadratic_problem([[0.0], [2.0]], [1.0, 1.0], gamma_scale=cfg.gamma_scale)
        return prob, np.zeros(1)
    N = inst.N
    lam = 0.1 / N if cfg.lam is None else cfg.lam
    if cfg.problem == "pr-poisson-l1":
        prob = poisson_problem(inst.A, inst.b, lam, gamma_scale=cfg.gamma_scale)
    elif cfg.problem == "pr-squared-l0":
        kappa = cfg.kappa or max(1, int(np.count_nonzero(inst.x_true)))
        if kappa > inst.n:
            raise UsageError(f"--kappa {kappa} exceeds n={inst.n}")
        prob = squared_loss_problem(inst.A, inst.b, Regularizer.l0ball(kappa),
                                    gamma_scale=cfg.gamma_scale)
    else:
        prob = squared_loss_problem(inst.A, inst.b, Regularizer.l1(lam), gamma_scale=cfg.gamma_scale)
    init = cfg.init or ("random" if cfg.problem == "pr-poisson-l1" else "spectral")
    if init == "spectral":
        x0 = datagen.spectral_init(inst, seed=cfg.seed)
    else:
        x0 = datagen.random_init(inst, seed=cfg.seed)
    if cfg.problem == "pr-squared-l0":
        x0 = _project_init(x0, prob.regularizer.kappa)
    return prob, x0


def _project_init(x, kappa):
    from .model import project_l0_ball
    return project_l0_ball(x, kappa)


def execute(cfg, prob, x0, algo_seed, sink=None):
    if cfg.algo == "bfinito":
        sampler = make_sampler(cfg.sampler, prob.N, algo_seed)
        return bfinito_run(prob, sampler, x0, max_epochs=cfg.max_epochs, tol=cfg.tol, sink=sink)
    if cfg.algo == "lowmem":
        inner = shuffled_inner(algo_seed) if cfg.sampler.startswith("shuffled") else cyclic_inner
        return lowmem_run(prob, x0, inner, max_epochs=cfg.max_epochs, tol=cfg.tol,
                          lyapunov=True, sink=sink)
    mode = "full" if cfg.algo == "md" else "stochastic"
    conf = md_config(prob, mode, 1.0 if cfg.alpha is None else cfg.alpha)
    return md_run(prob, conf, x0, max_epochs=cfg.max_epochs, tol=cfg.tol, seed=algo_seed, sink=sink)


def run_label(cfg):
    if cfg.algo == "bfinito":
        return f"bfinito-{cfg.sampler}"
    if cfg.algo == "lowmem" and cfg.sampler.startswith("shuffled"):
        return "lowmem-shuffled"
    return cfg.algo


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg):
    if cfg.problem == "toy-quadratic":
        raise UsageError("toy-quadratic has no instance file")
    if not cfg.out:
        raise UsageError("--out is required")
    inst = build_instance(replace(cfg, instance=None))
    try:
        datagen.save_instance(inst, cfg.out)
    except OSError as exc:
        raise UsageError(f"cannot write {cfg.out}: {exc.strerror}") from None
    print(f"wrote {cfg.out} n={inst.n} N={inst.N} family={inst.family}")
    return inst


def cmd_run(cfg, stdout=None):
    stdout = stdout or sys.stdout
    inst = build_instance(cfg)
    prob, x0 = build_problem(cfg, inst)
    seed = spawn_seeds(cfg.seed, 1)[0]
    fh = open(cfg.out, "w", newline="") if cfg.out else io.StringIO()
    try:
        result = execute(cfg, prob, x0, seed, sink=CsvTraceSink(fh, clock=cfg.clock))
    finally:
        if cfg.out:
            fh.close()
    last = result.trace[-1] if result.trace else None
    summary = (f"algo={run_label(cfg)} final_cost={_g(last.cost if last else None)} "
               f"final_residual={_g(last.residual if last else None)} "
               f"epochs={_g(result.epochs)} iterations={result.iterations} "
               f"converged={str(result.converged).lower()}")
    print(summary, file=stdout)
    return result


def _g(v):
    return "nan" if v is None else format(float(v), ".17g")


def _run_member(args):
    cfg, seed = args
    inst = build_instance(cfg)
    prob, x0 = build_problem(cfg, inst)
    result = execute(cfg, prob, x0, seed)
    return [(r.epochs, r.residual) for r in result.trace]


def cmd_compare(configs, out=None, threads=None):
    """Residual-vs-epoch for several runs on one shared instance, one column per run."""
    if not configs:
        raise UsageError("compare needs at least one run")
    base = configs[0]
    for c in configs[1:]:
        for key in INSTANCE_KEYS:
            if getattr(c, key) != getattr(base, key):
                raise UsageError(f"runs disagree on instance setting {key!r}")
    labels = [run_label(c) for c in configs]
    if len(set(labels)) != len(labels):
        raise UsageError("duplicate runs in compare")
    seeds = spawn_seeds(base.seed, len(configs))
    if threads is None:
        threads = int(os.environ.get("BFINITO_THREADS", "1") or 1)
    jobs = list(zip(configs, seeds))
    if threads > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(min(threads, len(jobs))) as pool:
            traces = list(pool.map(_run_member, jobs))
    else:
        traces = [_run_member(j) for j in jobs]

    grid = range(int(np.floor(base.max_epochs)) + 1)
    rows = []
    for e in grid:
        row = [str(e)]
        for tr in traces:
            vals = [res for ep, res in tr if ep <= e + 1e-9 and res is not None]
            stopped = tr and tr[-1][0] < e - 1e-9
            row.append("" if not vals or stopped else format(vals[-1], ".17g"))
        rows.append(row)
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epochs"] + labels)
        w.writerows(rows)
    finally:
        if out:
            fh.close()
    return labels, rows


# ---------------------------------------------------------------------------
# argument parsing


def read_config_file(path):
    """``key=value`` lines; ``#`` starts a comment.  Keys use flag names."""
    out = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key=value")
                k, v = (t.strip() for t in line.split("=", 1))
                out[_canon(k)] = v
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return out


def _canon(key):
    key = key.lstrip("-").replace("-", "_")
    return {"lambda": "lam"}.get(key, key)


_TYPES = {"seed": int, "max_epochs": float, "tol": float, "lam": float, "kappa": int,
          "alpha": float, "gamma_scale": float, "n": int, "N": int, "d": int, "p_corrupt": float}


def _coerce(values):
    out = {}
    for k, v in values.items():
        if k not in RunConfig.__dataclass_fields__:
            raise UsageError(f"unknown setting {k!r}")
        if k == "clock":
            out[k] = v if isinstance(v, bool) else str(v).lower() not in ("0", "false", "no")
            continue
        try:
            out[k] = _TYPES[k](v) if k in _TYPES and v is not None else v
        except ValueError:
            raise UsageError(f"bad value {v!r} for {k}") from None
    return out


def _add_common(p):
    p.add_argument("--config", help="key=value file with defaults")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--N", dest="N", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--p-corrupt", dest="p_corrupt", type=float)
    p.add_argument("--instance")
    p.add_argument("--out")


def _add_solver(p):
    p.add_argument("--sampler")
    p.add_argument("--max-epochs", dest="max_epochs", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--kappa", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma-scale", dest="gamma_scale", type=float)
    p.add_argument("--init", choices=("spectral", "random"))
    p.add_argument("--no-clock", dest="clock", action="store_const", const=False,
                   help="write 0 in the time_s column so traces are byte-reproducible")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def make_parser():
    parser = _Parser(prog="bfinito", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    g = sub.add_parser("generate", help="write a synthetic instance file")
    _add_common(g)
    r = sub.add_parser("run", help="run one solver and write its trace CSV")
    _add_common(r)
    _add_solver(r)
    r.add_argument("--algo", choices=ALGOS)
    c = sub.add_parser("compare", help="residual-vs-epoch table for several runs")
    _add_common(c)
    _add_solver(c)
    c.add_argument("--runs", default="bfinito:cyclic,bfinito:uniform,lowmem,smd",
                   help="comma-separated algo[:sampler] list")
    c.add_argument("--run-config", dest="run_configs", action="append", default=[],
                   help="per-run key=value file (repeatable); replaces --runs")
    for sp in (g, r, c):
        sp.error = parser.error
    return parser


def config_from_args(ns, extra=None):
    flags = {k: v for k, v in vars(ns).items()
             if v is not None and k in RunConfig.__dataclass_fields__}
    values = {}
    if getattr(ns, "config", None):
        values.update(read_config_file(ns.config))
    if extra:
        values.update(extra)
    values.update(flags)
    return RunConfig(**_coerce(values)).validate()


def _parse_runs(text):
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        algo, _, sampler = item.partition(":")
        out.append({"algo": algo, **({"sampler": sampler} if sampler else {})})
    return out


def main(argv=None):
    try:
        ns = make_parser().parse_args(argv)
        if ns.command == "generate":
            cmd_generate(config_from_args(ns))
        elif ns.command == "run":
            cmd_run(config_from_args(ns))
        else:
            if ns.run_configs:
                members = [read_config_file(p) for p in ns.run_configs]
            else:
                members = _parse_runs(ns.runs)
            configs = [config_from_args(ns, m) for m in members]
            base = configs[0]
            cmd_compare(configs, out=base.out)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except BFinitoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
