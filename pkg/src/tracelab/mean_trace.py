"""Exact and empirical mean traces.

Coordinate ``j`` (1-based) of the mean trace of ``x`` is::

    mu_x[j] = (1 - 2 p_flip) * sum_i x_i * Pr[j in R_i]

where ``R_i`` holds the output positions that replicate bit ``i``.  With
``S_k = M_1 + ... + M_k``,
``Pr[j in R_i] = sum_{j'} Pr[S_{i-1} = j'] r(j - j')`` and ``r`` the
replication profile, so a single pass of dense convolutions yields every
weight.  Tail quantities beyond a truncation point ``N`` are bounded with
``|mu_x[j]| <= (1 - 2 p_flip) Pr[S_n >= j]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly

from .bits import as_bits, input_poly_eval
from .channel import ChannelSpec, TraceBatch, m_pmf, replication_profile, sample_traces
from .errors import DomainError
from .genfun import eval_pgf, pgf_of_M, pgf_of_W
from .streams import CHUNK_TRACES, STAGE_TRACES, ordered_map, substream

# s-grid resolution for Chernoff bounds
_CHERNOFF_GRID = 400
# numerical slack added to every residual budget
ROUNDING_SLACK = 1e-9


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PositionWeights:
    """``matrix[i, j-1] = Pr[j in R_{i+1}]`` for an n-bit input, j = 1..N.

    ``overflow[i]`` is Pr[S_i >= N], the mass of block starts that fall
    beyond the window.
    """

    matrix: np.ndarray
    overflow: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.matrix.shape[1]


@lru_cache(maxsize=64)
def position_weights(spec: ChannelSpec, n: int, N: int) -> PositionWeights:
    if n < 1 or N < 1:
        raise DomainError("n and N must be >= 1")
    pmf = np.asarray(m_pmf(spec, N - 1))
    r = np.asarray(replication_profile(spec, N).r)
    start = np.zeros(N)
    start[0] = 1.0
    V = np.empty((n, N))
    overflow = np.empty(n + 1)
    for i in range(n):
        overflow[i] = max(0.0, 1.0 - math.fsum(start))
        V[i] = np.convolve(start, r)[:N]
        start = np.convolve(start, pmf)[:N]
    overflow[n] = max(0.0, 1.0 - math.fsum(start))
    return PositionWeights(_frozen(V), _frozen(overflow))


@lru_cache(maxsize=64)
def partial_sum_pmf(spec: ChannelSpec, n: int, K: int) -> np.ndarray:
    """Pr[S_n = k] for k = 0..K (exact entries)."""
    pmf = np.asarray(m_pmf(spec, K))
    out = np.zeros(K + 1)
    out[0] = 1.0
    for _ in range(n):
        out = np.convolve(out, pmf)[: K + 1]
    return _frozen(out)


def _tail_probs(pmf):
    """Pr[S >= i] = 1 - Pr[S < i] for i = 0..len(pmf)-1."""
    cdf = np.concatenate(([0.0], np.cumsum(pmf)[:-1]))
    return np.maximum(0.0, 1.0 - cdf)


def _log_mgf(spec: ChannelSpec, s: float) -> float:
    return math.log(spec.law.pgf_m(math.exp(s)).real)


def _s_grid(lo: float, hi: float) -> np.ndarray:
    k = np.arange(1, _CHERNOFF_GRID + 1)
    return lo + (hi - lo) * k / (_CHERNOFF_GRID + 1)


def chernoff_power_tail(spec: ChannelSpec, n: int, K: int, r: float = 1.0) -> float:
    """Bound on sum_{i > K} Pr[S_n >= i] r^(i-1) via Pr[S_n >= i] <= E[e^{s S_n}] e^{-s i}.

    Minimised over a grid of s in (ln r, alpha); infinite when that range is empty.
    """
    if spec.support_max is not None:
        hi = math.log(r) + 8.0
    else:
        hi = spec.alpha
    lo = math.log(r)
    if hi <= lo:
        return math.inf
    best = math.inf
    for s in _s_grid(lo, hi):
        q = r * math.exp(-s)
        log_term = n * _log_mgf(spec, s) - math.log(r) + (K + 1) * math.log(q) - math.log1p(-q)
        best = min(best, log_term)
    return math.exp(best) if best < 700 else math.inf


def tail_power_sum_bound(spec: ChannelSpec, n: int, N: int, r: float = 1.0) -> float:
    """Upper bound on sum_{i > N} Pr[S_n >= i] r^(i-1), for r >= 1.

    Exact for finite-support M; otherwise exact up to 2N + 64 and Chernoff
    beyond.
    """
    r = max(1.0, float(r))
    mbar = spec.support_max
    if mbar is not None:
        top = n * mbar
        if N >= top:
            return 0.0
        tails = _tail_probs(partial_sum_pmf(spec, n, top))
        i = np.arange(N + 1, top + 1)
        return math.fsum(tails[i] * r ** (i - 1.0))
    K = 2 * N + 64
    tails = _tail_probs(partial_sum_pmf(spec, n, K))
    i = np.arange(N + 1, K + 1)
    with np.errstate(over="ignore"):
        exact = math.fsum(tails[i] * r ** (i - 1.0))
    return exact + chernoff_power_tail(spec, n, K, r)


def choose_truncation(spec: ChannelSpec, n: int, eps: float = 1e-12) -> int:
    """Smallest N with sum_{i > N} Pr[S_n >= i] <= eps by the Chernoff bound.

    For each s on a grid in (0, alpha) the bound
    ``E[e^{s S_n}] e^{-s(N+1)} / (1 - e^{-s})`` is solved for N and the
    smallest solution is kept.  The sum dominates every
    ``sum_{i > N} |mu_x[i] - mu_x'[i]| / (2 (1 - 2 p_flip))``.  When M has
    finite support with maximum mbar the window n * mbar is exact and is
    returned.
    """
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    if n < 1:
        raise DomainError("n must be >= 1")
    if spec.support_max is not None:
        return n * spec.support_max
    best = math.inf
    for s in _s_grid(0.0, spec.alpha):
        try:
            lg = _log_mgf(spec, s)
        except (ValueError, ZeroDivisionError, OverflowError):
            continue
        need = (n * lg - math.log(eps) - math.log1p(-math.exp(-s))) / s - 1.0
        best = min(best, need)
    if not math.isfinite(best):
        return exact_truncation(spec, n, eps)
    return max(1, math.ceil(best))


def exact_truncation(spec: ChannelSpec, n: int, eps: float) -> int:
    """Smallest N with sum_{i > N} Pr[S_n >= i] <= eps, from the convolved pmf.

    The window grows until Pr[S_n >= K] is negligible next to eps.
    """
    K = max(16, 4 * n)
    while True:
        tails = _tail_probs(partial_sum_pmf(spec, n, K))
        if spec.support_max is not None and K >= n * spec.support_max or tails[K] <= eps * 1e-6:
            after = np.concatenate((np.cumsum(tails[::-1])[::-1][1:], [0.0]))
            return max(1, int(np.flatnonzero(after <= eps)[0]))
        K *= 2


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeanTrace:
    values: np.ndarray  # values[j-1] = E[(Y'_x)_j]
    n: int
    N: int
    tail_bound: float  # bound on sum_{j > N} |mu_x[j]|


def exact_mean_trace(spec: ChannelSpec, x, N: int | None = None) -> MeanTrace:
    x = as_bits(x)
    n = len(x)
    if N is None:
        N = choose_truncation(spec, n)
    V = position_weights(spec, n, int(N)).matrix
    values = spec.signal * (x.astype(float) @ V)
    tail = spec.signal * tail_power_sum_bound(spec, n, N)
    return MeanTrace(_frozen(values), n, int(N), tail)


def mean_trace_matrix(spec: ChannelSpec, strings: np.ndarray, N: int) -> np.ndarray:
    """Exact truncated mean traces of many strings at once, one per row."""
    strings = np.asarray(strings)
    V = position_weights(spec, strings.shape[1], int(N)).matrix
    return spec.signal * (strings.astype(float) @ V)


@dataclass(frozen=True, eq=False)
class EmpiricalMeanTrace:
    values: np.ndarray
    stderr: np.ndarray
    t: int
    N: int


class MeanTraceAccumulator:
    """Running integer sums of zero-padded traces.

    Sums are exact integers, so merging partial accumulators in any order
    gives identical results.
    """

    def __init__(self, N: int):
        self.N = int(N)
        self.t = 0
        self.total = np.zeros(self.N, dtype=np.int64)
        self.nonzero = np.zeros(self.N, dtype=np.int64)

    def add_padded(self, mat: np.ndarray) -> None:
        mat = np.asarray(mat)
        self.t += mat.shape[0]
        self.total += mat.sum(axis=0, dtype=np.int64)
        self.nonzero += (mat != 0).sum(axis=0, dtype=np.int64)

    def add_batch(self, batch: TraceBatch) -> None:
        self.add_padded(batch.padded(self.N))

    def merge(self, other: MeanTraceAccumulator) -> None:
        self.t += other.t
        self.total += other.total
        self.nonzero += other.nonzero

    def result(self) -> EmpiricalMeanTrace:
        if self.t == 0:
            raise DomainError("no traces accumulated")
        t = self.t
        mean = self.total / t
        # symbols are in {-1, 0, 1}, so the sum of squares is the nonzero count
        if t > 1:
            var = (self.nonzero - t * mean**2) / (t - 1)
            stderr = np.sqrt(np.maximum(var, 0.0) / t)
        else:
            stderr = np.full(self.N, np.nan)
        return EmpiricalMeanTrace(_frozen(mean), _frozen(stderr), t, self.N)


def empirical_mean_trace(traces, N: int) -> EmpiricalMeanTrace:
    """Coordinate-wise mean of traces zero-padded (or cut) to length N."""
    acc = MeanTraceAccumulator(N)
    if isinstance(traces, TraceBatch):
        acc.add_batch(traces)
    else:
        rows = [np.asarray(getattr(tr, "symbols", tr)) for tr in traces]
        mat = np.zeros((len(rows), N), dtype=np.int8)
        for j, row in enumerate(rows):
            k = min(N, len(row))
            mat[j, :k] = row[:k]
        acc.add_padded(mat)
    return acc.result()


def estimate_mean_trace(
    spec: ChannelSpec,
    x,
    t: int,
    N: int,
    seed: int,
    key: tuple = (),
    threads: int = 1,
) -> EmpiricalMeanTrace:
    """Sample ``t`` traces of ``x`` in chunks and average them.

    Chunk ``c`` draws from ``substream(seed, STAGE_TRACES, *key, c)``.
    """
    x = as_bits(x)
    chunks = [(c, min(CHUNK_TRACES, t - c * CHUNK_TRACES)) for c in range(math.ceil(t / CHUNK_TRACES))]

    def run(chunk):
        c, size = chunk
        acc = MeanTraceAccumulator(N)
        acc.add_batch(sample_traces(spec, x, size, substream(seed, STAGE_TRACES, *key, c)))
        return acc

    total = MeanTraceAccumulator(N)
    for part in ordered_map(run, chunks, threads):
        total.merge(part)
    return total.result()


def write_mean_trace_csv(path, exact: MeanTrace | None, empirical: EmpiricalMeanTrace | None) -> None:
    N = exact.N if exact is not None else empirical.N
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "exact", "empirical", "stderr"])
        for j in range(N):
            w.writerow(
                [
                    j + 1,
                    repr(float(exact.values[j])) if exact is not None else "",
                    repr(float(empirical.values[j])) if empirical is not None else "",
                    repr(float(empirical.stderr[j])) if empirical is not None else "",
                ]
            )


# ---------------------------------------------------------------------------
# the mean-trace power series and the change of variable


@dataclass(frozen=True)
class SeriesValue:
    value: complex
    tail_bound: float
    N: int


def _check_series_z(spec: ChannelSpec, z: complex) -> None:
    r = abs(z)
    if r < 1.0 - 1e-12:
        raise DomainError(f"|z|={r:.6g} < 1")
    if spec.support_max is None and r > math.sqrt(spec.radius):
        raise DomainError(f"|z|={r:.6g} exceeds e^(alpha/2)={math.sqrt(spec.radius):.6g}")


def series_eval(spec: ChannelSpec, x, z, N: int | None = None) -> SeriesValue:
    """Truncated sum_{i<=N} mu_x[i] z^(i-1) with a bound on the rest.

    Requires 1 <= |z|, and |z| <= e^(alpha/2) when M has unbounded support.
    """
    z = complex(z)
    _check_series_z(spec, z)
    mt = exact_mean_trace(spec, x, N)
    value = complex(npoly.polyval(z, mt.values))
    tail = spec.signal * tail_power_sum_bound(spec, mt.n, mt.N, abs(z))
    return SeriesValue(value, tail, mt.N)


@dataclass(frozen=True)
class ChangeVarCheck:
    residual: float
    budget: float
    series: complex
    identity: complex
    N: int

    @property
    def ok(self) -> bool:
        return self.residual <= self.budget + ROUNDING_SLACK


def verify_changevar(spec: ChannelSpec, x, z, N: int | None = None) -> ChangeVarCheck:
    """Compare the mean-trace series at ``z`` with
    ``(1 - 2 p_flip) E|R| g_W(z) P_x(g_M(z))``.

    The budget adds the series tail bound to the propagated PGF truncation
    errors.
    """
    x = as_bits(x)
    z = complex(z)
    if N is None:
        N = choose_truncation(spec, len(x), 1e-12)
    lhs = series_eval(spec, x, z, N)
    gm = eval_pgf(pgf_of_M(spec), z, 1e-14)
    gw = eval_pgf(pgf_of_W(spec), z, 1e-14)
    c1 = spec.signal * spec.expected_replications
    p_val = input_poly_eval(x, gm.value)
    rhs = c1 * gw.value * p_val

    # |P_x(a) - P_x(b)| <= |a - b| sum_i (i-1) R^(i-2), R = |g_M| + err
    R = abs(gm.value) + gm.error
    lip = math.fsum((i - 1) * R ** (i - 2) for i in range(2, len(x) + 1))
    p_err = lip * gm.error
    budget = lhs.tail_bound + abs(c1) * (gw.error * (abs(p_val) + p_err) + abs(gw.value) * p_err)
    return ChangeVarCheck(abs(lhs.value - rhs), budget, lhs.value, rhs, int(N))
