"""Command-line experiment runner: ``bmlearn {learn, check-separability, class-info}``."""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .classes.decision_list import (
    DecisionListClass,
    dl_auto_k,
    learn_decision_list,
    log2_count_bound,
    random_decision_list,
)
from .classes.equal_piece import EqualPieceClass, default_alpha, learn_equal_piece, piece_table
from .classes.threshold import ThresholdClass, learn_threshold
from .core import as_fraction, disagreement
from .errors import BMLError, InputError, MemoryBudgetExceeded
from .general import auto_k, run_general
from .oracle import (
    EXHAUSTIVE_CAP,
    BruteForceOracle,
    ThresholdOracle,
    check_separability,
    format_verdict,
    verdict_problems,
)
from .runtime import Stream, noise_inflation

KINDS = ("threshold", "equal-piece", "decision-list")
LEARNERS = ("general", "threshold", "equal-piece", "decision-list")
CSV_HEADER = ["trial", "seed", "samples", "bits_semantic", "bits_physical",
              "distance_num", "distance_den", "success", "ms"]
ALL_T_CAP = 16  # check-separability enumerates 2^|H| candidate sets


# -- class files --------------------------------------------------------------


@dataclass(frozen=True)
class ClassSpec:
    kind: str
    n: int
    p: Optional[Fraction] = None
    seed_class: int = 0

    def build(self):
        if self.kind == "threshold":
            return ThresholdClass(self.n)
        if self.kind == "equal-piece":
            return EqualPieceClass(self.n, self.p)
        return DecisionListClass(self.n)


def parse_class_text(text: str) -> ClassSpec:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ("kind", "n", "p", "seed-class"):
            raise InputError(f"line {lineno}: unknown key {key!r}")
        if key in fields:
            raise InputError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value
    kind = fields.get("kind")
    if kind not in KINDS:
        raise InputError(f"kind must be one of {', '.join(KINDS)}")
    try:
        n = int(fields["n"])
    except (KeyError, ValueError):
        raise InputError("n must be given as an integer") from None
    if n < 1:
        raise InputError("n must be positive")
    p = None
    if kind == "equal-piece":
        if "p" not in fields:
            raise InputError("equal-piece classes need p")
        try:
            p = Fraction(fields["p"])
        except (ValueError, ZeroDivisionError):
            raise InputError(f"p must be a rational like 1/4, got {fields['p']!r}") from None
        if not 0 < p < 1:
            raise InputError("p must lie in (0, 1)")
    try:
        seed_class = int(fields.get("seed-class", "0"))
    except ValueError:
        raise InputError("seed-class must be an integer") from None
    return ClassSpec(kind, n, p, seed_class)


def read_class_file(path: str) -> ClassSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_class_text(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read class file: {exc}") from None


# -- targets ------------------------------------------------------------------


def random_target(spec: ClassSpec, cls, trial: int, seed: int):
    """Target for one trial: a class index or an explicit truth table."""
    rng = np.random.default_rng([spec.seed_class, seed])
    if spec.kind == "threshold":
        return int(rng.integers(cls.count))
    if spec.kind == "decision-list":
        return random_decision_list(rng, spec.n).table(spec.n)
    top = cls._max_start()
    if trial % 2 == 0 or cls._next_free(0) > top:
        starts = (int(rng.integers(top + 1)),)
    else:
        first = int(rng.integers(top - cls._next_free(0) + 1))
        second = int(rng.integers(cls._next_free(first), top + 1))
        starts = (first, second)
    return piece_table(spec.n, spec.p, [Fraction(s, spec.n) for s in starts])


# -- trials -------------------------------------------------------------------


@dataclass
class TrialReport:
    trial: int
    seed: int
    learner: str
    samples: int
    bits_semantic: Optional[int]
    bits_physical: Optional[int]
    distance: Optional[Fraction]
    success: bool
    ms: Optional[float]
    error: str = ""

    def row(self, timing: bool) -> list:
        d = self.distance
        return [
            self.trial,
            self.seed,
            self.samples,
            "" if self.bits_semantic is None else self.bits_semantic,
            "" if self.bits_physical is None else self.bits_physical,
            "" if d is None else d.numerator,
            "" if d is None else d.denominator,
            int(self.success),
            f"{self.ms:.3f}" if timing and self.ms is not None else "",
        ]


@dataclass(frozen=True)
class Job:
    spec: ClassSpec
    learner: str
    epsilon: Fraction
    alpha: Optional[Fraction]
    k: Optional[int]
    noise: Fraction
    accept: Fraction
    oracle: str
    budget: Optional[int]


def _table(cls, h):
    return cls.truth_table(h) if isinstance(h, (int, np.integer)) else h


def run_trial(job: Job, trial: int, seed: int) -> TrialReport:
    spec = job.spec
    cls = spec.build()
    target = random_target(spec, cls, trial, seed)
    target_tab = _table(cls, target)
    stream = Stream(cls, target_tab, noise=job.noise, seed=seed)
    t0 = time.perf_counter()
    sem = phys = None
    try:
        if job.learner == "general":
            oracle = (ThresholdOracle(cls, job.alpha, job.epsilon) if job.oracle == "structured"
                      else BruteForceOracle(cls, job.alpha, job.epsilon, seed=seed))
            rep = run_general(cls, oracle, stream, job.alpha, job.epsilon, job.k)
            out_tab = cls.truth_table(rep.hypothesis)
            sem, phys = rep.bits_semantic, rep.bits_physical
        elif job.learner == "threshold":
            rep = learn_threshold(stream, job.epsilon)
            out_tab = cls.truth_table(rep.output)
            sem, phys = rep.max_bits, rep.max_physical_bits
        elif job.learner == "equal-piece":
            rep = learn_equal_piece(stream, spec.p, job.epsilon, job.alpha)
            out_tab = piece_table(spec.n, spec.p, rep.output)
            sem, phys = rep.max_bits, rep.max_physical_bits
        else:
            rep, _ = learn_decision_list(stream, spec.n, job.epsilon, job.k)
            out_tab = rep.output.table(spec.n)
            sem, phys = rep.max_bits, rep.max_physical_bits
        if job.budget is not None and sem > job.budget:
            raise MemoryBudgetExceeded(sem, job.budget)
    except (BMLError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        ms = (time.perf_counter() - t0) * 1000
        return TrialReport(trial, seed, job.learner, stream.draws, sem, phys, None, False, ms,
                           error=f"{type(exc).__name__}: {exc}")
    ms = (time.perf_counter() - t0) * 1000
    dist = disagreement(out_tab, target_tab)
    return TrialReport(trial, seed, job.learner, stream.draws, sem, phys, dist,
                       dist <= job.accept, ms)


def _run_star(args):
    return run_trial(*args)


def worker_count() -> int:
    raw = os.environ.get("BML_WORKERS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise InputError("BML_WORKERS must be a positive integer") from None
    if value < 1:
        raise InputError("BML_WORKERS must be a positive integer")
    return value


def run_trials(job: Job, trials: int, seed: int, workers: int = 1) -> list[TrialReport]:
    """Trial ``i`` uses seed ``seed + i``; results come back in trial order."""
    args = [(job, i, seed + i) for i in range(trials)]
    if workers <= 1 or trials <= 1:
        return [run_trial(*a) for a in args]
    with ProcessPoolExecutor(max_workers=min(workers, trials)) as pool:
        return list(pool.map(_run_star, args, chunksize=max(1, trials // (4 * workers))))


def render_csv(reports: list[TrialReport], timing: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow(r.row(timing))
    return buf.getvalue()


# -- argument helpers -----------------------------------------------------------


def _rational(text: str) -> Fraction:
    try:
        return as_fraction(text if "/" in text else Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _k_value(text: str):
    if text == "auto":
        return text
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("k must be a positive integer or 'auto'") from None
    if k < 1:
        raise argparse.ArgumentTypeError("k must be a positive integer or 'auto'")
    return k


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bmlearn", description="Bounded-memory learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    learn = sub.add_parser("learn", help="run seeded learning trials and write a CSV")
    learn.add_argument("--class", dest="class_file", required=True)
    learn.add_argument("--learner", choices=LEARNERS, required=True)
    learn.add_argument("--epsilon", type=_rational, required=True)
    learn.add_argument("--alpha", type=_rational)
    learn.add_argument("--k", type=_k_value, default="auto")
    learn.add_argument("--trials", type=int, default=100)
    learn.add_argument("--seed", type=int, default=0)
    learn.add_argument("--noise", type=_rational, default=Fraction(0))
    learn.add_argument("--out", help="CSV path (default: stdout)")
    learn.add_argument("--min-success", type=_rational, default=Fraction(9, 10))
    learn.add_argument("--accept-distance", type=_rational,
                       help="success threshold on the final distance (default 3*epsilon)")
    learn.add_argument("--confidence", type=_rational, default=Fraction(9, 10),
                       help="target confidence for --k auto")
    learn.add_argument("--oracle", choices=("brute-force", "structured"), default="brute-force")
    learn.add_argument("--budget", type=int, help="fail trials whose state exceeds this many bits")
    learn.add_argument("--timing", action="store_true", help="fill the ms column")

    sep = sub.add_parser("check-separability", help="audit the separability of a class")
    sep.add_argument("--class", dest="class_file", required=True)
    sep.add_argument("--alpha", type=_rational, required=True)
    sep.add_argument("--epsilon", type=_rational, required=True)
    sep.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
    sep.add_argument("--budget", type=int, default=200)
    sep.add_argument("--seed", type=int, default=0)
    sep.add_argument("--log", help="write the witness log here instead of stdout")

    info = sub.add_parser("class-info", help="sizes and, for small classes, the hypotheses graph")
    info.add_argument("--class", dest="class_file", required=True)
    return parser


# -- commands -------------------------------------------------------------------


def resolve_k(args, spec: ClassSpec, cls) -> tuple[Optional[int], str]:
    """k for the learner plus a note for the summary."""
    if args.learner in ("threshold", "equal-piece"):
        return None, ""
    if args.k != "auto":
        return args.k, f"k={args.k}"
    if args.learner == "general":
        base = auto_k(cls.count, args.alpha, args.confidence)
    else:
        base = dl_auto_k(spec.n, args.epsilon, 1 - args.confidence)
    if args.noise:
        factor = noise_inflation(args.noise)
        k = math.ceil(base * factor)
        return k, f"k={k} (auto {base}, noise-inflated by {float(factor):.4f})"
    return base, f"k={base} (auto)"


def cmd_learn(args, out=None) -> int:
    out = out or sys.stdout
    spec = read_class_file(args.class_file)
    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    if not 0 < args.epsilon < 1:
        raise InputError("--epsilon must lie in (0, 1)")
    if not 0 <= args.noise < Fraction(1, 2):
        raise InputError("--noise must lie in [0, 1/2)")
    if not 0 < args.confidence < 1:
        raise InputError("--confidence must lie in (0, 1)")
    if args.learner in ("threshold", "equal-piece", "decision-list") and args.learner != spec.kind:
        raise InputError(f"learner {args.learner} needs a {args.learner} class file")
    if args.learner == "general":
        if args.alpha is None or not 0 < args.alpha <= 1:
            raise InputError("the general learner needs --alpha in (0, 1]")
        if args.oracle == "structured" and spec.kind != "threshold":
            raise InputError("the structured oracle drives the general learner on thresholds only")
    cls = spec.build()
    alpha = args.alpha
    if args.learner == "equal-piece":
        alpha = default_alpha(spec.p, args.epsilon) if alpha is None else alpha
        if alpha <= Fraction(2, spec.n):
            raise InputError(f"alpha={alpha} must exceed 2/n={Fraction(2, spec.n)}; pass --alpha")
    if args.learner == "general" and args.oracle == "brute-force" and cls.count > 4096:
        raise InputError("the brute-force oracle is limited to classes of at most 4096 hypotheses")
    k, k_note = resolve_k(args, spec, cls)
    accept = args.accept_distance if args.accept_distance is not None else 3 * args.epsilon
    job = Job(spec, args.learner, args.epsilon, alpha, k, args.noise, accept,
              args.oracle, args.budget)
    reports = run_trials(job, args.trials, args.seed, worker_count())
    text = render_csv(reports, timing=args.timing)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    rate = Fraction(sum(r.success for r in reports), len(reports))
    samples = statistics.median(r.samples for r in reports)
    bits = max((r.bits_semantic or 0) for r in reports)
    errors = sum(1 for r in reports if r.error)
    summary = (f"success rate {float(rate):.3f} ({sum(r.success for r in reports)}/{len(reports)}), "
               f"median samples {samples:g}, max bits {bits}")
    if k_note:
        summary += f", {k_note}"
    if errors:
        summary += f", {errors} trial(s) failed with errors"
    print(summary, file=sys.stderr if not args.out else out)
    return 0 if rate >= args.min_success else 1


def cmd_check_separability(args, out=None) -> int:
    out = out or sys.stdout
    spec = read_class_file(args.class_file)
    cls = spec.build()
    if args.budget < 0:
        raise InputError("--budget must be non-negative")
    if not 0 < args.alpha <= 1 or not 0 <= args.epsilon <= 1:
        raise InputError("--alpha must lie in (0, 1] and --epsilon in [0, 1]")
    if args.mode == "exhaustive":
        if cls.count > ALL_T_CAP or cls.domain.size > EXHAUSTIVE_CAP:
            raise InputError(f"exhaustive audits need |H| <= {ALL_T_CAP} and |X| <= {EXHAUSTIVE_CAP}")
        family = (T for r in range(1, cls.count + 1)
                  for T in itertools.combinations(range(cls.count), r))
    else:
        rng = np.random.default_rng(args.seed)

        def sampled():
            for _ in range(args.budget):
                pick = np.flatnonzero(rng.random(cls.count) < 0.5)
                if pick.size == 0:
                    pick = np.array([int(rng.integers(cls.count))])
                yield tuple(pick.tolist())

        family = sampled()
    lines = []
    counterexample = None
    for T in family:
        v = check_separability(cls, T, args.alpha, args.epsilon, args.mode,
                               seed=args.seed, budget=args.budget)
        problems = verdict_problems(cls, v, args.alpha, args.epsilon)
        if problems:
            raise BMLError(f"internal witness failed revalidation: {problems}")
        lines.append(format_verdict(v))
        if v.kind == "counterexample":
            counterexample = v
            break
    if counterexample is None:
        lines.append("verified" if args.mode == "exhaustive"
                     else f"no counterexample found among {args.budget} sampled sets "
                          "(sampled audit: evidence, not proof)")
    else:
        lines.append(f"counterexample: {format_verdict(counterexample)}")
    text = "\n".join(lines) + "\n"
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(lines[-1], file=out)
    else:
        out.write(text)
    return 0 if counterexample is None else 1


def cmd_class_info(args, out=None) -> int:
    out = out or sys.stdout
    spec = read_class_file(args.class_file)
    cls = spec.build()
    print(f"kind: {spec.kind}", file=out)
    print(f"|X| = {cls.domain.size}", file=out)
    print(f"|H| = {cls.count}", file=out)
    print(f"log2|H| = {math.log2(cls.count):.4f}", file=out)
    if spec.kind == "decision-list":
        print(f"bound n log2 n + 2n = {log2_count_bound(spec.n):.4f}", file=out)
    if cls.count * cls.domain.size <= 1024:
        print("hypotheses graph (row h: labels on x_1..x_|X|, then d(X, {h})):", file=out)
        for h in range(cls.count):
            row = cls.truth_table(h)
            d = Fraction(int(row.sum()), row.size)
            print(f"  {cls.describe(h):>24}  {''.join(map(str, row))}  {d}", file=out)
    return 0


COMMANDS = {
    "learn": cmd_learn,
    "check-separability": cmd_check_separability,
    "class-info": cmd_class_info,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"bmlearn: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
