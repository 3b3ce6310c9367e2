"""Command-line surface: generate, sample, estimate, benchmark, slope, verify.

All outputs are LF-terminated CSV.  Benchmark trials derive their seeds from
the master seed with a splitmix-style hash, so results are byte-identical
across reruns and independent of parallel scheduling.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    GroundTruth,
    apply_permutations,
    frob_error,
    gen_noisy_sorting,
    gen_random_biso,
    gen_sst,
    read_matrix_csv,
    write_matrix_csv,
)
from .estimators import (
    DEFAULT_THRESHOLD_SCALE,
    DEFAULT_ZETA,
    EstimatorConfig,
    estimate_borda,
    estimate_exact_n,
    estimate_oracle,
    estimate_tds,
)
from .isotonic import ProjectionConfig
from .sampling import (
    NoiseSpec,
    read_observations_csv,
    sample_poissonized,
    write_observations_csv,
)
from .theory import check_l2_tv_l1, check_threshold_sort, empirical_parsum_check

__all__ = [
    "BenchmarkConfig",
    "ResultsRow",
    "RESULTS_HEADER",
    "derive_seed",
    "run_benchmark",
    "write_results_csv",
    "read_results_csv",
    "fit_rate_slope",
    "main",
    "entry_point",
]

RESULTS_HEADER = "n,N,trial,estimator,frob_err_sq_norm,runtime_ms,seed"

_ESTIMATOR_INDEX = {"tds": 0, "borda": 1, "oracle": 2}
_GENERATOR_KINDS = ("biso-random", "noisy-sorting", "sst-random")

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master: int, *parts: int) -> int:
    """Deterministic per-task seed from the master seed and integer labels."""
    h = _splitmix64(master & _MASK64)
    for p in parts:
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return h


@dataclass(frozen=True)
class ResultsRow:
    n: int
    num_obs: int
    trial: int
    estimator: str
    error: float
    runtime_ms: float
    seed: int

    def __post_init__(self):
        if self.error < 0:
            raise ValueError("error must be nonnegative")


@dataclass(frozen=True)
class BenchmarkConfig:
    """Monte Carlo grid for the rate benchmark.

    ``budget`` maps a size n to the sample budget N (full rate N = n^2 by
    default).  ``ensemble`` selects the ground-truth generator; ``lam`` is
    its level-gap parameter where applicable.
    """

    sizes: tuple[int, ...] = (64, 128, 256, 512)
    trials: int = 10
    estimators: tuple[str, ...] = ("tds", "borda", "oracle")
    noise: NoiseSpec = field(default_factory=NoiseSpec.bernoulli)
    ensemble: str = "noisy-sorting"
    lam: float = 0.3
    budget: Callable[[int], int] = lambda n: n * n
    zeta: float = DEFAULT_ZETA
    master_seed: int = 0
    threshold_scale: float = DEFAULT_THRESHOLD_SCALE
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    jobs: int = 1
    record_timings: bool = False

    def __post_init__(self):
        if not self.sizes or any(
            b <= a for a, b in zip(self.sizes, self.sizes[1:])
        ):
            raise ValueError("sizes must be nonempty and strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = set(self.estimators) - set(_ESTIMATOR_INDEX)
        if not self.estimators or unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if self.ensemble not in _GENERATOR_KINDS:
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def _make_truth(kind: str, n1: int, n2: int, lam: float, seed: int) -> GroundTruth:
    if kind == "biso-random":
        return gen_random_biso(n1, n2, seed)
    if kind == "noisy-sorting":
        if n1 != n2:
            raise ValueError("noisy-sorting requires square dimensions")
        return gen_noisy_sorting(n1, lam, seed)
    if kind == "sst-random":
        if n1 != n2:
            raise ValueError("sst-random requires square dimensions")
        return gen_sst(n1, seed)
    raise ValueError(f"unknown generator kind {kind!r}")


def _run_one_trial(config: BenchmarkConfig, n: int, trial: int, estimator: str) -> ResultsRow:
    seed = derive_seed(config.master_seed, n, trial, _ESTIMATOR_INDEX[estimator])
    truth = _make_truth(config.ensemble, n, n, config.lam, derive_seed(seed, 1))
    num_obs = config.budget(n)
    obs = sample_poissonized(truth, num_obs, config.noise, derive_seed(seed, 2))
    est_cfg = EstimatorConfig(
        projection=config.projection, threshold_scale=config.threshold_scale
    )
    est_seed = derive_seed(seed, 3)
    start = time.perf_counter()
    if estimator == "tds":
        estimate = estimate_tds(obs, zeta=config.zeta, seed=est_seed, cfg=est_cfg)
    elif estimator == "borda":
        estimate = estimate_borda(obs, seed=est_seed, cfg=est_cfg)
    else:
        estimate = estimate_oracle(obs, truth.row_perm, truth.col_perm, cfg=est_cfg)
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    return ResultsRow(
        n=n,
        num_obs=num_obs,
        trial=trial,
        estimator=estimator,
        error=frob_error(estimate, truth.observable()),
        runtime_ms=elapsed_ms if config.record_timings else 0.0,
        seed=seed,
    )


def run_benchmark(config: BenchmarkConfig) -> list[ResultsRow]:
    """Run every (size, trial, estimator) cell; rows sorted by (n, estimator, trial)."""
    tasks = [
        (n, trial, estimator)
        for n in config.sizes
        for estimator in config.estimators
        for trial in range(config.trials)
    ]
    if config.jobs == 1:
        rows = [_run_one_trial(config, *task) for task in tasks]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(lambda t: _run_one_trial(config, *t), tasks))
    rows.sort(key=lambda r: (r.n, r.estimator, r.trial))
    return rows


def write_results_csv(rows: Sequence[ResultsRow], path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for r in rows:
            fh.write(
                f"{r.n},{r.num_obs},{r.trial},{r.estimator},"
                f"{r.error!r},{r.runtime_ms!r},{r.seed}\n"
            )


def read_results_csv(path) -> list[ResultsRow]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != RESULTS_HEADER:
            raise ValueError(f"{path}: unexpected results header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            toks = line.split(",")
            if len(toks) != 7:
                raise ValueError(f"{path}: malformed line {lineno}")
            rows.append(
                ResultsRow(
                    n=int(toks[0]),
                    num_obs=int(toks[1]),
                    trial=int(toks[2]),
                    estimator=toks[3],
                    error=float(toks[4]),
                    runtime_ms=float(toks[5]),
                    seed=int(toks[6]),
                )
            )
    return rows


def fit_rate_slope(rows: Sequence[ResultsRow], estimator: str) -> tuple[float, float]:
    """Least-squares slope/intercept of log(mean error) against log(n).

    Mean error is taken per size before logs.
    """
    by_size: dict[int, list[float]] = {}
    for r in rows:
        if r.estimator == estimator:
            by_size.setdefault(r.n, []).append(r.error)
    if len(by_size) < 2:
        raise ValueError(
            f"need results at >= 2 sizes for estimator {estimator!r}, got {len(by_size)}"
        )
    sizes = sorted(by_size)
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray([np.mean(by_size[n]) for n in sizes]))
    xc = x - x.mean()
    slope = float((xc @ (y - y.mean())) / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    return slope, intercept


# ---------------------------------------------------------------------------
# Subcommands


def _write_perms_csv(truth: GroundTruth, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(str(int(i) + 1) for i in truth.row_perm) + "\n")
        fh.write(",".join(str(int(i) + 1) for i in truth.col_perm) + "\n")


def read_perms_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) != 2:
        raise ValueError(f"{path}: expected two permutation lines")
    row = np.asarray([int(t) - 1 for t in lines[0].split(",")], dtype=np.int64)
    col = np.asarray([int(t) - 1 for t in lines[1].split(",")], dtype=np.int64)
    return row, col


def _cmd_gen(args) -> int:
    truth = _make_truth(args.kind, args.n1, args.n2 or args.n1, args.lam, args.seed)
    write_matrix_csv(truth.base, f"{args.out}.base.csv")
    _write_perms_csv(truth, f"{args.out}.perms.csv")
    write_matrix_csv(truth.observable(), f"{args.out}.mstar.csv")
    print(f"gen,{args.kind},{truth.n1},{truth.n2},{args.out}")
    return 0


def _cmd_sample(args) -> int:
    mstar = read_matrix_csv(f"{args.truth}.mstar.csv")
    n1, n2 = mstar.shape
    truth = GroundTruth(
        base=mstar, row_perm=np.arange(n1), col_perm=np.arange(n2), sst=False
    )
    noise = NoiseSpec.parse(args.noise)
    obs = sample_poissonized(truth, args.num_obs, noise, args.seed)
    write_observations_csv(obs, args.out)
    print(f"sample,{n1},{n2},{args.num_obs},{len(obs)},{args.out}")
    return 0


def _cmd_estimate(args) -> int:
    obs = read_observations_csv(args.obs)
    cfg = EstimatorConfig(
        projection=ProjectionConfig(tol=args.proj_tol, max_iters=args.proj_max_iters),
        threshold_scale=args.threshold_scale,
    )
    if args.estimator == "oracle":
        if args.truth is None:
            raise ValueError("oracle estimation requires --truth for the permutations")
        row_perm, col_perm = read_perms_csv(f"{args.truth}.perms.csv")
        estimate = estimate_oracle(obs, row_perm, col_perm, cfg=cfg)
    elif args.estimator == "tds":
        estimate = estimate_tds(obs, zeta=args.zeta, seed=args.seed, cfg=cfg)
    elif args.estimator == "borda":
        estimate = estimate_borda(obs, seed=args.seed, cfg=cfg)
    else:
        estimate = estimate_exact_n(obs, zeta=args.zeta, seed=args.seed, cfg=cfg)
    write_matrix_csv(estimate, args.out)
    line = f"{args.estimator},{obs.n1},{obs.n2},{obs.nominal_n}"
    if args.truth is not None:
        mstar = read_matrix_csv(f"{args.truth}.mstar.csv")
        line += f",{frob_error(estimate, mstar)!r}"
    print(line)
    return 0


def _cmd_benchmark(args) -> int:
    config = BenchmarkConfig(
        sizes=tuple(int(t) for t in args.sizes.split(",")),
        trials=args.trials,
        estimators=tuple(args.estimators.split(",")),
        noise=NoiseSpec.parse(args.noise),
        ensemble=args.ensemble,
        lam=args.lam,
        zeta=args.zeta,
        master_seed=args.seed,
        threshold_scale=args.threshold_scale,
        projection=ProjectionConfig(tol=args.proj_tol, max_iters=args.proj_max_iters),
        jobs=args.jobs,
        record_timings=args.timings,
    )
    rows = run_benchmark(config)
    write_results_csv(rows, args.out)
    print(f"benchmark,{len(rows)},{args.out}")
    return 0


def _cmd_slope(args) -> int:
    rows = read_results_csv(args.results)
    slope, intercept = fit_rate_slope(rows, args.estimator)
    print(f"{args.estimator},{slope!r},{intercept!r}")
    return 0


def _cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0

    checked = 0
    ok = True
    for _ in range(10_000):
        size = int(rng.integers(1, 51))
        v = rng.normal(scale=rng.uniform(0.1, 10.0), size=size)
        checked += 1
        if not check_l2_tv_l1(v):
            ok = False
            break
    print(f"{'PASS' if ok else 'FAIL'},l2-tv-l1,{checked} vectors")
    failures += not ok

    import itertools

    ok = True
    count = 0
    for _ in range(20):
        a = np.sort(rng.uniform(0, 1, size=4))
        for perm in itertools.permutations(range(4)):
            for tau in (0.05, 0.2, 0.5, 1.0, 2.0):
                count += 1
                if not check_threshold_sort(a, np.asarray(perm), tau):
                    ok = False
    print(f"{'PASS' if ok else 'FAIL'},threshold-sort,{count} cases")
    failures += not ok

    truth = gen_noisy_sorting(8, 0.3, args.seed)
    pairs = [(i, 0) for i in range(8)]
    report = empirical_parsum_check(
        truth, 64, NoiseSpec.bernoulli(), pairs, trials=200, seed=args.seed
    )
    ok = report.violation_rate <= 0.01
    print(
        f"{'PASS' if ok else 'FAIL'},partial-sum-concentration,"
        f"{report.violations}/{report.trials} violations,bound={report.bound_used:.4g}"
    )
    failures += not ok

    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoperm",
        description="Estimate bivariate isotonic matrices under unknown permutations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a ground truth and write its files")
    p.add_argument("kind", choices=_GENERATOR_KINDS)
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, default=None, help="defaults to n1")
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output file prefix")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("sample", help="sample observations from a generated truth")
    p.add_argument("--truth", required=True, help="prefix written by gen")
    p.add_argument("--num-obs", type=int, required=True)
    p.add_argument("--noise", default="bernoulli")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("estimate", help="run an estimator on an observation file")
    p.add_argument("obs")
    p.add_argument(
        "--estimator", required=True, choices=("tds", "borda", "oracle", "exact-n")
    )
    p.add_argument("--zeta", type=float, default=DEFAULT_ZETA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", default=None, help="prefix written by gen")
    p.add_argument("--threshold-scale", type=float, default=DEFAULT_THRESHOLD_SCALE)
    p.add_argument("--proj-tol", type=float, default=1e-8)
    p.add_argument("--proj-max-iters", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("benchmark", help="Monte Carlo error benchmark over sizes")
    p.add_argument("--sizes", default="64,128,256,512")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--estimators", default="tds,borda,oracle")
    p.add_argument("--noise", default="bernoulli")
    p.add_argument("--ensemble", default="noisy-sorting", choices=_GENERATOR_KINDS)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.3)
    p.add_argument("--zeta", type=float, default=DEFAULT_ZETA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold-scale", type=float, default=DEFAULT_THRESHOLD_SCALE)
    p.add_argument("--proj-tol", type=float, default=1e-8)
    p.add_argument("--proj-max-iters", type=int, default=2000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument(
        "--timings",
        action="store_true",
        help="record wall-clock runtimes (off by default so output is reproducible)",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("slope", help="fit a log-log rate slope from benchmark results")
    p.add_argument("results")
    p.add_argument("--estimator", required=True)
    p.set_defaults(func=_cmd_slope)

    p = sub.add_parser("verify", help="run the lemma oracles and concentration checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
