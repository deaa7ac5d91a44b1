"""Mean-based reconstruction, mean-trace separation and certification."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import binomtest

from .bits import all_strings, as_bits, bits_to_str, input_poly_eval, lex_key
from .channel import ChannelSpec
from .errors import ConvergenceError, DomainError
from .genfun import ArcSpec, arc_max, eval_pgf, invert_on_arc, pgf_of_W
from .mean_trace import (
    choose_truncation,
    estimate_mean_trace,
    mean_trace_matrix,
    tail_power_sum_bound,
)
from .streams import STAGE_INPUT, STAGE_PAIRS, ordered_map, substream

__all__ = [
    "CandidateSet",
    "input_poly_eval",
    "nearest_candidate",
    "reconstruct",
    "SeparationReport",
    "pairwise_separation",
    "Certification",
    "certify_lower_bound",
    "separation_scaling",
    "run_trials",
    "trace_complexity_experiment",
]

MAX_EXHAUSTIVE_N = 12


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Search space for the reconstruction argmin, kept in lexicographic
    order (-1 < +1) so that the first minimiser is the tie-break winner."""

    strings: np.ndarray
    kind: str = "explicit"

    @classmethod
    def exhaustive(cls, n: int) -> CandidateSet:
        return cls(all_strings(n), "exhaustive")

    @classmethod
    def explicit(cls, strings) -> CandidateSet:
        rows = [as_bits(s) for s in strings]
        if not rows:
            raise DomainError("empty candidate set")
        if len({len(r) for r in rows}) != 1:
            raise DomainError("candidates must share one length")
        keys = sorted({lex_key(r) for r in rows})
        if len(keys) != len(rows):
            raise DomainError("duplicate candidates")
        return cls(np.array(keys, dtype=np.int8), "explicit")

    @property
    def n(self) -> int:
        return self.strings.shape[1]

    def __len__(self):
        return self.strings.shape[0]


def nearest_candidate(mu_hat, candidate_means) -> int:
    """Index of the row of ``candidate_means`` L1-closest to ``mu_hat``
    (first one on ties)."""
    d = np.abs(np.asarray(candidate_means) - np.asarray(mu_hat)[None, :]).sum(axis=1)
    return int(np.argmin(d))


def reconstruct(mu_hat, spec: ChannelSpec, candidates: CandidateSet, N: int | None = None) -> np.ndarray:
    """Return the candidate whose exact truncated mean trace is L1-closest to ``mu_hat``."""
    mu_hat = np.asarray(getattr(mu_hat, "values", mu_hat), dtype=float)
    if len(candidates) == 0:
        raise DomainError("empty candidate set")
    N = len(mu_hat) if N is None else int(N)
    if len(mu_hat) != N:
        raise DomainError(f"mu_hat has length {len(mu_hat)}, expected N={N}")
    means = mean_trace_matrix(spec, candidates.strings, N)
    return candidates.strings[nearest_candidate(mu_hat, means)].copy()


# ---------------------------------------------------------------------------
# separation

_HIST_EDGES = np.arange(-16.0, 1.5, 0.5)


@dataclass(frozen=True, eq=False)
class SeparationReport:
    n: int
    N: int
    min_l1: float
    argmin_pair: tuple
    num_pairs: int
    max_l1: float
    mean_l1: float
    hist_edges: np.ndarray = field(repr=False)
    hist_counts: np.ndarray = field(repr=False)
    mode: str = "all_pairs"


def _all_pairs(spec, n, N, threads):
    strings = all_strings(n)
    means = mean_trace_matrix(spec, strings, N)
    total = len(strings)
    half = total // 2
    block = max(1, min(half, (1 << 20) // total))
    blocks = [np.arange(s, min(half, s + block)) for s in range(0, half, block)]
    cols = np.arange(total)

    # a pair and its global negation are equally far apart, so only rows
    # whose first bit is -1 are computed, and one pair per orbit is kept
    def run(rows):
        d = cdist(means[rows], means, "cityblock")
        i = rows[:, None]
        keep = (cols[None, :] > i) & ((cols[None, :] < half) | (i + cols[None, :] <= total - 1))
        vals = np.where(keep, d, np.inf)
        k = int(np.argmin(vals))
        kept = d[keep]
        counts, _ = np.histogram(np.log10(np.maximum(kept, 1e-300)), bins=_HIST_EDGES)
        return (
            float(vals.flat[k]),
            (int(rows[k // total]), int(k % total)),
            int(keep.sum()),
            float(kept.max()) if kept.size else -np.inf,
            math.fsum(kept),
            counts,
        )

    parts = ordered_map(run, blocks, threads)
    best, pair = np.inf, None
    count, mx, acc = 0, -np.inf, 0.0
    counts = np.zeros(len(_HIST_EDGES) - 1, dtype=np.int64)
    for p_min, p_pair, p_count, p_max, p_sum, p_counts in parts:
        if p_min < best:
            best, pair = p_min, p_pair
        count += p_count
        mx = max(mx, p_max)
        acc += p_sum
        counts += p_counts
    x, xp = strings[pair[0]], strings[pair[1]]
    return best, (bits_to_str(x), bits_to_str(xp)), count, mx, acc / count, counts


def _hard_pairs(n):
    alt = np.array([1 if i % 2 == 0 else -1 for i in range(n)], dtype=np.int8)
    ones = np.ones(n, dtype=np.int8)
    pairs = [(alt, -alt)]
    for base in (alt, ones):
        for i in range(n):
            other = base.copy()
            other[i] = -other[i]
            pairs.append((base, other))
    return pairs


def _sampled_pairs(spec, n, N, k, seed):
    rng = substream(seed, STAGE_PAIRS, n)
    pairs = _hard_pairs(n)
    target = len(pairs) + k
    while len(pairs) < target:
        a = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
        b = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
        if not np.array_equal(a, b):
            pairs.append((a, b))
    A = mean_trace_matrix(spec, np.array([p[0] for p in pairs]), N)
    B = mean_trace_matrix(spec, np.array([p[1] for p in pairs]), N)
    d = np.abs(A - B).sum(axis=1)
    k_min = int(np.argmin(d))
    counts, _ = np.histogram(np.log10(np.maximum(d, 1e-300)), bins=_HIST_EDGES)
    pair = (bits_to_str(pairs[k_min][0]), bits_to_str(pairs[k_min][1]))
    return float(d[k_min]), pair, len(d), float(d.max()), math.fsum(d) / len(d), counts


def pairwise_separation(
    spec: ChannelSpec,
    n: int,
    N: int | None = None,
    mode: str = "all_pairs",
    pairs: int = 1000,
    seed: int = 0,
    threads: int = 1,
) -> SeparationReport:
    """Minimum L1 distance between truncated mean traces of distinct inputs.

    ``all_pairs`` enumerates {-1,+1}^n (n <= 12).  ``sampled`` draws ``pairs``
    random pairs and adds the alternating-string pair and all single-flip
    neighbours of the alternating and all-ones strings.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if N is None:
        N = choose_truncation(spec, n, 1e-12)
    if mode == "all_pairs":
        if n > MAX_EXHAUSTIVE_N:
            raise DomainError(f"all_pairs is limited to n <= {MAX_EXHAUSTIVE_N}; use sampled mode")
        res = _all_pairs(spec, n, N, threads)
    elif mode == "sampled":
        res = _sampled_pairs(spec, n, N, pairs, seed)
    else:
        raise DomainError(f"unknown separation mode {mode!r}")
    min_l1, pair, count, mx, mean, counts = res
    return SeparationReport(n, int(N), min_l1, pair, count, mx, mean, _HIST_EDGES, counts, mode)


@dataclass(frozen=True)
class ScalingFit:
    rows: list  # (n, N, min_l1, x, x')
    C: float  # slope of ln(1/min_l1) against n^(1/3)
    intercept: float


def separation_scaling(spec: ChannelSpec, n_values, N_rule=None, threads: int = 1) -> ScalingFit:
    """Exhaustive minimum separations over ``n_values`` and a least-squares
    fit of ln(1/min_l1) = C n^(1/3) + b."""
    rows = []
    for n in n_values:
        if not 2 <= n <= MAX_EXHAUSTIVE_N:
            raise DomainError(f"n={n} outside [2, {MAX_EXHAUSTIVE_N}]")
        N = N_rule(n) if N_rule is not None else None
        rep = pairwise_separation(spec, n, N, threads=threads)
        rows.append((n, rep.N, rep.min_l1, *rep.argmin_pair))
    if len(rows) >= 2:
        u = np.array([r[0] for r in rows], dtype=float) ** (1.0 / 3.0)
        v = -np.log([r[2] for r in rows])
        C, b = np.polyfit(u, v, 1)
    else:
        C, b = math.nan, math.nan
    return ScalingFit(rows, float(C), float(b))


# ---------------------------------------------------------------------------
# certification of the power-series lower bound


@dataclass(frozen=True)
class Certification:
    lhs: float  # exact ||mu_x^N - mu_x'^N||_1
    rhs: float  # |z|^-N (|Pbar_x(z) - Pbar_x'(z)| - tail)
    passed: bool
    z_star: complex
    phi_star: float
    L: float
    N: int
    series_gap: float  # lower bound on |Pbar_x(z) - Pbar_x'(z)|
    tail_term: float
    arc_value: float  # max of |A| on the arc, A = (P_x - P_x') / 2

    @property
    def vacuous(self) -> bool:
        return self.rhs <= 0.0


def certify_lower_bound(
    spec: ChannelSpec, x, x_prime, L: float | None = None, N: int | None = None
) -> Certification:
    """Check ||mu_x^N - mu_x'^N||_1 >= |z|^-N (|Pbar_x(z) - Pbar_x'(z)| - tail).

    The right-hand side is built from generating functions only: the arc
    maximum of the halved difference polynomial gives w* = e^{i phi*},
    z* solves g_M(z*) = w*, and the change of variable gives
    ``|Pbar_x(z*) - Pbar_x'(z*)| = |C1| |g_W(z*)| 2 |A(w*)|``.  The left-hand
    side comes from position weights.
    """
    x, xp = as_bits(x), as_bits(x_prime)
    if len(x) != len(xp):
        raise DomainError("strings must have equal length")
    if np.array_equal(x, xp):
        raise DomainError("strings must differ")
    n = len(x)
    L = n ** (1.0 / 3.0) if L is None else float(L)
    if N is None:
        N = choose_truncation(spec, n, 1e-12)
    coeffs = (x.astype(int) - xp.astype(int)) // 2
    am = arc_max(coeffs, ArcSpec(L))
    try:
        z = invert_on_arc(spec, am.phi_star)
    except ConvergenceError as exc:
        raise ConvergenceError(f"{exc} [arc L={L:.6g}, phi*={am.phi_star:.6g}, |A|={am.max_abs:.6g}]") from exc
    r = max(1.0, abs(z))
    gw = eval_pgf(pgf_of_W(spec), z, 1e-14)
    c1 = abs(spec.signal * spec.expected_replications)
    gap = c1 * max(0.0, abs(gw.value) - gw.error) * 2.0 * am.max_abs
    tail = 2.0 * spec.signal * tail_power_sum_bound(spec, n, N, r)
    rhs = r ** (-N) * (gap - tail) if math.isfinite(tail) else -math.inf
    means = mean_trace_matrix(spec, np.stack([x, xp]), N)
    lhs = math.fsum(np.abs(means[0] - means[1]))
    return Certification(lhs, rhs, lhs >= rhs - 1e-9, z, am.phi_star, L, int(N), gap, tail, am.max_abs)


# ---------------------------------------------------------------------------
# trace-complexity experiments


@dataclass(frozen=True)
class TrialResult:
    trial: int
    t: int
    x: str
    x_hat: str
    success: bool
    l1_error: float  # ||mu_hat^N - mu_x^N||_1


@dataclass(frozen=True)
class SuccessPoint:
    t: int
    successes: int
    trials: int
    ci_lo: float
    ci_hi: float


def run_trials(
    spec: ChannelSpec,
    n: int,
    t: int,
    trials: int,
    seed: int,
    N: int | None = None,
    threads: int = 1,
    t_index: int = 0,
) -> list:
    """Reconstruct a fresh uniform input from ``t`` traces, ``trials`` times.

    Trial ``i`` draws its input from ``substream(seed, STAGE_INPUT, i)`` and its
    traces from chunks keyed ``(i, t_index, chunk)``.
    """
    if not 1 <= n <= MAX_EXHAUSTIVE_N:
        raise DomainError(f"n={n} outside [1, {MAX_EXHAUSTIVE_N}]")
    if N is None:
        N = choose_truncation(spec, n, 1e-12)
    cands = CandidateSet.exhaustive(n)
    means = mean_trace_matrix(spec, cands.strings, N)

    def run(i):
        x = substream(seed, STAGE_INPUT, i).choice(np.array([-1, 1], dtype=np.int8), size=n)
        est = estimate_mean_trace(spec, x, t, N, seed, key=(i, t_index))
        k = nearest_candidate(est.values, means)
        truth = int(np.flatnonzero((cands.strings == x).all(axis=1))[0])
        err = math.fsum(np.abs(est.values - means[truth]))
        return TrialResult(i, t, bits_to_str(x), bits_to_str(cands.strings[k]), k == truth, err)

    return ordered_map(run, range(trials), threads)


def wilson_interval(successes: int, trials: int, level: float = 0.95):
    ci = binomtest(successes, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class ExperimentResult:
    curve: list  # SuccessPoint per t
    trials: list  # TrialResult per (t, trial)


def trace_complexity_experiment(
    spec: ChannelSpec,
    n: int,
    t_grid,
    trials: int,
    seed: int,
    N: int | None = None,
    threads: int = 1,
) -> ExperimentResult:
    if trials < 20:
        raise DomainError("trace-complexity experiments need at least 20 trials")
    curve, records = [], []
    for k, t in enumerate(t_grid):
        res = run_trials(spec, n, int(t), trials, seed, N, threads, t_index=k)
        wins = sum(r.success for r in res)
        curve.append(SuccessPoint(int(t), wins, trials, *wilson_interval(wins, trials)))
        records.extend(res)
    return ExperimentResult(curve, records)


# ---------------------------------------------------------------------------
# CSV output


def _f(v) -> str:
    return repr(float(v))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_separation_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["n", "N", "mode", "num_pairs", "min_l1", "mean_l1", "max_l1", "x", "x_prime"])
        for r in reports:
            w.writerow([r.n, r.N, r.mode, r.num_pairs, _f(r.min_l1), _f(r.mean_l1), _f(r.max_l1), *r.argmin_pair])


def write_success_csv(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["t", "successes", "trials", "ci_lo", "ci_hi"])
        for p in curve:
            w.writerow([p.t, p.successes, p.trials, _f(p.ci_lo), _f(p.ci_hi)])


def write_trials_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["t", "trial", "x", "x_hat", "success", "l1_error"])
        for r in records:
            w.writerow([r.t, r.trial, r.x, r.x_hat, int(r.success), _f(r.l1_error)])


def write_certification_csv(path, rows) -> None:
    """``rows`` holds (x, x_prime, Certification) triples."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["pair", "x", "x_prime", "N", "L", "phi_star", "z_re", "z_im", "lhs", "rhs", "pass"])
        for k, (x, xp, c) in enumerate(rows):
            w.writerow(
                [
                    k,
                    bits_to_str(x),
                    bits_to_str(xp),
                    c.N,
                    _f(c.L),
                    _f(c.phi_star),
                    _f(c.z_star.real),
                    _f(c.z_star.imag),
                    _f(c.lhs),
                    _f(c.rhs),
                    int(c.passed),
                ]
            )
