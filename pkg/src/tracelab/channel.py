"""Replication-insertion channels.

A channel maps every input bit ``x_i`` independently to a block of ``m``
output symbols.  A subset ``R`` of the block positions carries copies of
``x_i`` (each flipped with probability ``p_flip``); the remaining positions
carry uniformly random bits.  The joint law of ``(M, R)`` is described by one
of the law classes below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import jsonschema
import numpy as np

from .bits import as_bits, bits_to_str
from .errors import ChannelValidationError, ConfigError, DomainError

# quantile used to bound the tail-certificate verification grid
_CERT_QUANTILE_TAIL = 1e-12
# alpha chosen for the certificate of finite-support laws
_FINITE_ALPHA = 1.0


def _check_prob(name, value, lo=0.0, hi=1.0, hi_open=True, lo_open=False):
    value = float(value)
    bad = (
        not math.isfinite(value)
        or (value <= lo if lo_open else value < lo)
        or (value >= hi if hi_open else value > hi)
    )
    if bad:
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise DomainError(f"{name}={value} outside {lb}{lo}, {hi}{rb}")
    return value


def _frozen(arr):
    arr = np.asarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class Law:
    """Joint law of the block length M and replication set R.

    Subclasses either describe a finite table of outcomes through
    :meth:`rows` (the defaults below then apply) or override the closed-form
    methods.
    """

    kind = "law"

    def rows(self):
        """Outcomes ``(m, positions, prob)`` for finite-support laws, else None."""
        return None

    @property
    def support_max(self):
        rows = self.rows()
        if rows is None:
            return None
        return max(m for m, _, p in rows if p > 0)

    def m_pmf(self, N: int) -> np.ndarray:
        p = np.zeros(N + 1)
        for m, _, prob in self.rows():
            if m <= N:
                p[m] += prob
        return p

    def tail(self, k: int) -> float:
        """Pr[M >= k]."""
        return float(sum(prob for m, _, prob in self.rows() if m >= k))

    def profile(self, K: int) -> np.ndarray:
        """Replication profile r(1..K) with r(k) = Pr[k in R]."""
        r = np.zeros(K)
        for _, positions, prob in self.rows():
            for k in positions:
                if k <= K:
                    r[k - 1] += prob
        return r

    def expected_replications(self) -> float:
        return float(sum(prob * len(pos) for _, pos, prob in self.rows()))

    def mean_length(self) -> float:
        return float(sum(prob * m for m, _, prob in self.rows()))

    def natural_certificate(self):
        mbar = self.support_max
        kappa = 1.0
        for k in range(1, mbar + 1):
            kappa = max(kappa, self.tail(k) * math.exp(_FINITE_ALPHA * k))
        return (kappa, _FINITE_ALPHA)

    def pgf_m(self, z):
        return sum(prob * z**m for m, _, prob in self.rows())

    def pgf_w(self, z):
        r = self.profile(self.support_max)
        return np.polynomial.polynomial.polyval(z, r) / self.expected_replications()

    def sample(self, rng: np.random.Generator, size: int):
        """Draw ``size`` i.i.d. outcomes.

        Returns the block lengths and a flat boolean vector, in block order,
        marking which output symbols are replications.
        """
        rows = self.rows()
        probs = np.array([p for _, _, p in rows])
        lengths = np.array([m for m, _, _ in rows], dtype=np.int64)
        width = max(1, int(lengths.max()))
        masks = np.zeros((len(rows), width), dtype=bool)
        for i, (_, positions, _) in enumerate(rows):
            for k in positions:
                masks[i, k - 1] = True
        idx = rng.choice(len(rows), size=size, p=probs / probs.sum())
        m = lengths[idx]
        block = np.repeat(idx, m)
        starts = np.cumsum(m) - m
        offset = np.arange(int(m.sum())) - np.repeat(starts, m)
        return m, masks[block, offset]

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}


@dataclass(frozen=True)
class Deletion(Law):
    """Each bit is deleted with probability ``q`` and kept otherwise."""

    q: float
    kind = "deletion"

    def __post_init__(self):
        q = _check_prob("q", self.q, hi_open=False)
        if q == 1.0:
            raise ChannelValidationError("Deletion(q=1) never outputs a symbol: Pr[M>0] = 0")
        object.__setattr__(self, "q", q)

    def rows(self):
        rows = [(0, (), self.q), (1, (1,), 1.0 - self.q)]
        return tuple(r for r in rows if r[2] > 0)

    def pgf_m(self, z):
        return self.q + (1.0 - self.q) * z

    def pgf_w(self, z):
        return 1.0 + 0.0 * z

    def params(self):
        return {"q": self.q}


class _GeometricBlock(Law):
    """M = G + B with G ~ Geom0(s) inserted symbols, then the bit (kept w.p. k).

    ``R = {G + 1}`` when the bit is kept and empty otherwise.
    """

    def _sk(self):
        raise NotImplementedError

    def rows(self):
        s, k = self._sk()
        if s < 1.0:
            return None
        rows = [(0, (), 1.0 - k), (1, (1,), k)]
        return tuple(r for r in rows if r[2] > 0)

    def m_pmf(self, N):
        s, k = self._sk()
        if s == 1.0:
            return super().m_pmf(N)
        u = 1.0 - s
        j = np.arange(N + 1)
        p = (1.0 - k) * s * u**j
        p[1:] += k * s * u ** (j[1:] - 1)
        return p

    def tail(self, k_):
        s, k = self._sk()
        if s == 1.0:
            return super().tail(k_)
        if k_ <= 0:
            return 1.0
        u = 1.0 - s
        return u**k_ + k * s * u ** (k_ - 1)

    def profile(self, K):
        s, k = self._sk()
        return k * s * (1.0 - s) ** np.arange(K)

    def expected_replications(self):
        return self._sk()[1]

    def mean_length(self):
        s, k = self._sk()
        return (1.0 - s) / s + k

    def natural_certificate(self):
        s, k = self._sk()
        if s == 1.0:
            return super().natural_certificate()
        u = 1.0 - s
        return (1.0 + k * s / u, -math.log(u))

    def pgf_m(self, z):
        s, k = self._sk()
        return (1.0 - k + k * z) * s / (1.0 - (1.0 - s) * z)

    def pgf_w(self, z):
        s, _ = self._sk()
        return s / (1.0 - (1.0 - s) * z)

    def sample(self, rng, size):
        s, k = self._sk()
        g = rng.geometric(s, size=size) - 1
        keep = rng.random(size) < k
        return _single_position_blocks(g, keep)


def _single_position_blocks(g, keep):
    m = g + keep
    rep = np.zeros(int(m.sum()), dtype=bool)
    starts = np.cumsum(m) - m
    rep[starts[keep] + g[keep]] = True
    return m, rep


@dataclass(frozen=True)
class GeoInsDel(_GeometricBlock):
    """Prepend Geom0(sigma) random symbols, then delete the bit w.p. delta."""

    sigma: float
    delta: float
    kind = "geo_ins_del"

    def __post_init__(self):
        object.__setattr__(self, "sigma", _check_prob("sigma", self.sigma, hi_open=False, lo_open=True))
        delta = _check_prob("delta", self.delta, hi_open=False)
        if delta == 1.0:
            raise ChannelValidationError("GeoInsDel(delta=1) never replicates: Pr[R nonempty] = 0")
        object.__setattr__(self, "delta", delta)

    def _sk(self):
        return self.sigma, 1.0 - self.delta

    def params(self):
        return {"sigma": self.sigma, "delta": self.delta}


@dataclass(frozen=True)
class GeoInsBefore(_GeometricBlock):
    """Insert Geom0(sigma) random symbols before the bit, then pass the whole
    block through a deletion channel with deletion probability q.

    Thinning a Geom0(sigma) count keeps it geometric, with success probability
    ``sigma / (1 - (1 - sigma) q)``; the closed forms use that parameter while
    sampling follows the two-stage mechanism literally.
    """

    sigma: float
    q: float
    kind = "geo_ins_before"

    def __post_init__(self):
        object.__setattr__(self, "sigma", _check_prob("sigma", self.sigma, hi_open=False, lo_open=True))
        q = _check_prob("q", self.q, hi_open=False)
        if q == 1.0:
            raise ChannelValidationError("GeoInsBefore(q=1) deletes everything: Pr[M>0] = 0")
        object.__setattr__(self, "q", q)

    @property
    def thinned_sigma(self) -> float:
        return self.sigma / (1.0 - (1.0 - self.sigma) * self.q)

    def _sk(self):
        return self.thinned_sigma, 1.0 - self.q

    def sample(self, rng, size):
        g = rng.geometric(self.sigma, size=size) - 1
        survivors = rng.binomial(g, 1.0 - self.q)
        keep = rng.random(size) >= self.q
        return _single_position_blocks(survivors, keep)

    def params(self):
        return {"sigma": self.sigma, "q": self.q}


@dataclass(frozen=True)
class Duplication(Law):
    """The bit is copied M >= 1 times; every output position is a replication.

    The length law is either a finite table ``lengths = ((m, prob), ...)`` or
    ``M = 1 + Geom0(sigma)``.
    """

    lengths: tuple = ()
    sigma: float | None = None
    kind = "duplication"

    def __post_init__(self):
        if self.sigma is not None:
            if self.lengths:
                raise DomainError("give either lengths or sigma, not both")
            sigma = _check_prob("sigma", self.sigma, hi_open=False, lo_open=True)
            object.__setattr__(self, "sigma", sigma)
            if sigma == 1.0:
                object.__setattr__(self, "sigma", None)
                object.__setattr__(self, "lengths", ((1, 1.0),))
            return
        if not self.lengths:
            raise DomainError("Duplication needs a length law")
        lengths = tuple(sorted((int(m), float(p)) for m, p in self.lengths))
        for m, p in lengths:
            if m < 1:
                raise DomainError(f"duplication length {m} outside {{1, 2, ...}}")
            _check_prob("length probability", p, hi_open=False)
        if abs(sum(p for _, p in lengths) - 1.0) > 1e-12:
            raise ChannelValidationError("duplication length probabilities must sum to 1")
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def uniform(cls, values) -> Duplication:
        values = list(values)
        return cls(lengths=tuple((m, 1.0 / len(values)) for m in values))

    def rows(self):
        if self.sigma is not None:
            return None
        return tuple((m, tuple(range(1, m + 1)), p) for m, p in self.lengths if p > 0)

    def m_pmf(self, N):
        if self.sigma is None:
            return super().m_pmf(N)
        s = self.sigma
        j = np.arange(N + 1)
        p = s * (1.0 - s) ** np.maximum(j - 1, 0)
        p[0] = 0.0
        return p

    def tail(self, k):
        if self.sigma is None:
            return super().tail(k)
        return 1.0 if k <= 1 else (1.0 - self.sigma) ** (k - 1)

    def profile(self, K):
        return np.array([self.tail(k) for k in range(1, K + 1)])

    def expected_replications(self):
        return self.mean_length()

    def mean_length(self):
        if self.sigma is None:
            return super().mean_length()
        return 1.0 / self.sigma

    def natural_certificate(self):
        if self.sigma is None:
            return super().natural_certificate()
        u = 1.0 - self.sigma
        return (1.0 / u, -math.log(u))

    def pgf_m(self, z):
        if self.sigma is None:
            return super().pgf_m(z)
        return self.sigma * z / (1.0 - (1.0 - self.sigma) * z)

    def pgf_w(self, z):
        if self.sigma is None:
            return super().pgf_w(z)
        return self.sigma / (1.0 - (1.0 - self.sigma) * z)

    def sample(self, rng, size):
        if self.sigma is None:
            return super().sample(rng, size)
        m = rng.geometric(self.sigma, size=size).astype(np.int64)
        return m, np.ones(int(m.sum()), dtype=bool)

    def params(self):
        if self.sigma is not None:
            return {"sigma": self.sigma}
        return {"lengths": [[m, p] for m, p in self.lengths]}


@dataclass(frozen=True)
class ExplicitTable(Law):
    """Arbitrary finite-support law given as rows ``(m, positions, prob)``.

    ``positions`` lists the 1-based replication positions inside the block.
    """

    entries: tuple
    kind = "explicit_table"

    def __post_init__(self):
        entries = []
        for row in self.entries:
            try:
                m, positions, prob = row
            except (TypeError, ValueError):
                raise ChannelValidationError(f"table row {row!r} is not (m, positions, prob)") from None
            m = int(m)
            if m < 0:
                raise ChannelValidationError(f"table row has negative length {m}")
            positions = tuple(sorted(int(k) for k in positions))
            if len(set(positions)) != len(positions) or any(not 1 <= k <= m for k in positions):
                raise ChannelValidationError(f"replication positions {positions} not a subset of [{m}]")
            prob = float(prob)
            if not 0.0 <= prob <= 1.0:
                raise ChannelValidationError(f"row probability {prob} outside [0, 1]")
            entries.append((m, positions, prob))
        if not entries:
            raise ChannelValidationError("explicit table is empty")
        if abs(sum(p for _, _, p in entries) - 1.0) > 1e-12:
            raise ChannelValidationError("table probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "entries", tuple(entries))

    def rows(self):
        return tuple(r for r in self.entries if r[2] > 0)

    def params(self):
        return {"rows": [[m, list(pos), p] for m, pos, p in self.entries]}


_KINDS = {
    "deletion": Deletion,
    "geo_ins_del": GeoInsDel,
    "geo_ins_before": GeoInsBefore,
    "duplication": Duplication,
    "explicit_table": ExplicitTable,
}
_ALIASES = {
    "Deletion": "deletion",
    "GeoInsDel": "geo_ins_del",
    "GeoInsBefore": "geo_ins_before",
    "Duplication": "duplication",
    "ExplicitTable": "explicit_table",
}


@dataclass(frozen=True)
class ChannelSpec:
    """Immutable description of a replication-insertion channel.

    ``tail_certificate = (kappa, alpha)`` asserts Pr[M >= tau] <= kappa
    exp(-alpha tau) for every tau >= 0.  When omitted it is derived in closed
    form from the law; when given it is verified.
    """

    law: Law
    p_flip: float = 0.0
    tail_certificate: tuple | None = field(default=None)

    def __post_init__(self):
        if not isinstance(self.law, Law):
            raise ChannelValidationError(f"not a channel law: {self.law!r}")
        p = float(self.p_flip)
        if not 0.0 <= p < 0.5:
            raise DomainError(f"p_flip={p} outside [0, 1/2)")
        object.__setattr__(self, "p_flip", p)
        if self.law.m_pmf(0)[0] >= 1.0:
            raise ChannelValidationError("Pr[M > 0] = 0")
        if not self.law.expected_replications() > 0.0:
            raise ChannelValidationError("Pr[R nonempty] = 0")
        if self.tail_certificate is None:
            cert = self.law.natural_certificate()
        else:
            cert = tuple(float(v) for v in self.tail_certificate)
            check_tail_certificate(self.law, *cert)
        object.__setattr__(self, "tail_certificate", cert)

    @property
    def kappa(self) -> float:
        return self.tail_certificate[0]

    @property
    def alpha(self) -> float:
        return self.tail_certificate[1]

    @property
    def support_max(self):
        return self.law.support_max

    @property
    def radius(self) -> float:
        """Lower bound on the radius of convergence of the PGF of M."""
        if self.support_max is not None:
            return math.inf
        return math.exp(self.alpha)

    @property
    def signal(self) -> float:
        """1 - 2 p_flip, the mean of a replicated symbol relative to its source."""
        return 1.0 - 2.0 * self.p_flip

    @property
    def expected_replications(self) -> float:
        return self.law.expected_replications()

    @property
    def mean_length(self) -> float:
        return self.law.mean_length()


def check_tail_certificate(law: Law, kappa: float, alpha: float) -> None:
    """Verify Pr[M >= tau] <= kappa e^{-alpha tau} on integers up to the
    1 - 1e-12 quantile of M.

    The tail is a step function that is constant on (k-1, k], where the bound
    is smallest at tau = k, so integer points suffice.
    """
    if not (kappa >= 1.0 and alpha > 0.0):
        raise ChannelValidationError(f"tail certificate ({kappa}, {alpha}) needs kappa >= 1, alpha > 0")
    k = 0
    while True:
        tail = law.tail(k)
        if tail > kappa * math.exp(-alpha * k) * (1.0 + 1e-12):
            raise ChannelValidationError(
                f"tail certificate ({kappa}, {alpha}) fails at tau={k}: Pr[M>={k}]={tail:.3e}"
            )
        if tail <= _CERT_QUANTILE_TAIL or k > 10**6:
            return
        k += 1


def make_builtin(kind: str, params: dict | None = None, p_flip: float = 0.0) -> ChannelSpec:
    """Build one of the named channel instantiations.

    >>> make_builtin("Deletion", {"q": 0.5}).law.m_pmf(1).tolist()
    [0.5, 0.5]
    """
    key = _ALIASES.get(kind, kind)
    if key not in _KINDS:
        raise DomainError(f"unknown channel kind {kind!r}")
    params = dict(params or {})
    if key == "duplication":
        if "lengths" in params:
            params["lengths"] = tuple(tuple(row) for row in params["lengths"])
        if "values" in params:
            return ChannelSpec(Duplication.uniform(params["values"]), p_flip)
    if key == "explicit_table":
        params = {"entries": tuple(tuple(r) for r in params.get("rows", params.get("entries", ())))}
    try:
        law = _KINDS[key](**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {key}: {exc}") from None
    return ChannelSpec(law, p_flip)


def identity_channel() -> ChannelSpec:
    return ChannelSpec(Deletion(0.0))


# ---------------------------------------------------------------------------
# marginal statistics


@lru_cache(maxsize=256)
def _cached_pmf(law: Law, N: int) -> np.ndarray:
    return _frozen(law.m_pmf(N))


def m_pmf(spec: ChannelSpec, N: int) -> np.ndarray:
    """Pr[M = j] for j = 0..N (exact entries; mass above N is simply absent)."""
    if N < 0:
        raise DomainError("N must be >= 0")
    return _cached_pmf(spec.law, int(N))


@dataclass(frozen=True)
class ReplicationProfile:
    r: np.ndarray  # r[k-1] = Pr[k in R]
    e_r: float  # E|R|
    tail_bound: float  # bound on sum_{k > K} r(k)


def replication_profile(spec: ChannelSpec, K: int) -> ReplicationProfile:
    if K < 1:
        raise DomainError("K must be >= 1")
    r = _frozen(spec.law.profile(int(K)))
    e_r = spec.expected_replications
    if spec.support_max is not None and K >= spec.support_max:
        bound = 0.0
    else:
        # r(k) <= Pr[M >= k] <= kappa e^{-alpha k}
        a = spec.alpha
        bound = spec.kappa * math.exp(-a * (K + 1)) / (1.0 - math.exp(-a))
    return ReplicationProfile(r, e_r, bound)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class PerBitOutcome:
    m: int
    r_set: frozenset

    def __post_init__(self):
        if any(not 1 <= k <= self.m for k in self.r_set):
            raise DomainError("replication set must be a subset of [m]")


@dataclass(frozen=True, eq=False)
class Trace:
    symbols: np.ndarray

    def __len__(self):
        return len(self.symbols)

    def __eq__(self, other):
        return isinstance(other, Trace) and np.array_equal(self.symbols, other.symbols)

    def __str__(self):
        return bits_to_str(self.symbols)


@dataclass(frozen=True, eq=False)
class TraceBatch:
    """``t`` traces stored back to back.

    ``block_lengths[j, i]`` is the number of output symbols input bit ``i``
    produced in trace ``j``.
    """

    symbols: np.ndarray
    offsets: np.ndarray
    block_lengths: np.ndarray

    def __len__(self):
        return len(self.offsets) - 1

    def __getitem__(self, j) -> Trace:
        return Trace(self.symbols[self.offsets[j] : self.offsets[j + 1]])

    def __iter__(self):
        return (self[j] for j in range(len(self)))

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def padded(self, N: int) -> np.ndarray:
        """(t, N) int8 matrix of traces, zero-padded or cut at N."""
        t = len(self)
        out = np.zeros((t, N), dtype=np.int8)
        lengths = self.lengths
        tid = np.repeat(np.arange(t), lengths)
        pos = np.arange(len(self.symbols)) - np.repeat(self.offsets[:-1], lengths)
        keep = pos < N
        out[tid[keep], pos[keep]] = self.symbols[keep]
        return out


def sample_blocks(spec: ChannelSpec, rng: np.random.Generator, size: int):
    return spec.law.sample(rng, size)


def sample_per_bit(spec: ChannelSpec, rng: np.random.Generator) -> PerBitOutcome:
    m, rep = sample_blocks(spec, rng, 1)
    return PerBitOutcome(int(m[0]), frozenset(int(k) + 1 for k in np.flatnonzero(rep)))


def sample_traces(spec: ChannelSpec, x, t: int, rng: np.random.Generator) -> TraceBatch:
    """Send ``x`` through the channel ``t`` times.

    A replication symbol is ``x_i`` negated with probability ``p_flip``; an
    insertion symbol is ``x_i`` negated with probability 1/2, which is a
    uniform bit independent of ``x_i``.  Writing both as ``x_i`` times a sign
    makes the trace of ``-x`` the exact negation of the trace of ``x`` under a
    shared generator.
    """
    x = as_bits(x)
    n = len(x)
    if t < 0:
        raise DomainError("t must be >= 0")
    m, rep = sample_blocks(spec, rng, t * n)
    src = np.repeat(np.tile(x, t), m)
    threshold = np.where(rep, spec.p_flip, 0.5)
    sign = np.where(rng.random(len(src)) < threshold, -1, 1).astype(np.int8)
    block_lengths = m.reshape(t, n)
    offsets = np.zeros(t + 1, dtype=np.int64)
    np.cumsum(block_lengths.sum(axis=1), out=offsets[1:])
    return TraceBatch((src * sign).astype(np.int8), offsets, block_lengths)


def apply_channel(spec: ChannelSpec, x, rng: np.random.Generator) -> Trace:
    return sample_traces(spec, x, 1, rng)[0]


# ---------------------------------------------------------------------------
# JSON

_PROB = {"type": "number", "minimum": 0, "maximum": 1}

CHANNEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["law"],
    "additionalProperties": False,
    "properties": {
        "p_flip": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
        "tail_certificate": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
        },
        "law": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": sorted(_KINDS) + sorted(_ALIASES)}},
            "allOf": [
                {
                    "if": {"properties": {"kind": {"enum": ["deletion", "Deletion"]}}},
                    "then": {"required": ["q"], "properties": {"q": _PROB}},
                },
                {
                    "if": {"properties": {"kind": {"enum": ["geo_ins_del", "GeoInsDel"]}}},
                    "then": {
                        "required": ["sigma", "delta"],
                        "properties": {"sigma": _PROB, "delta": _PROB},
                    },
                },
                {
                    "if": {"properties": {"kind": {"enum": ["geo_ins_before", "GeoInsBefore"]}}},
                    "then": {
                        "required": ["sigma", "q"],
                        "properties": {"sigma": _PROB, "q": _PROB},
                    },
                },
                {
                    "if": {"properties": {"kind": {"enum": ["duplication", "Duplication"]}}},
                    "then": {
                        "oneOf": [{"required": ["lengths"]}, {"required": ["sigma"]}],
                        "properties": {
                            "sigma": _PROB,
                            "lengths": {
                                "type": "array",
                                "minItems": 1,
                                "items": {
                                    "type": "array",
                                    "prefixItems": [{"type": "integer", "minimum": 1}, _PROB],
                                    "minItems": 2,
                                    "maxItems": 2,
                                },
                            },
                        },
                    },
                },
                {
                    "if": {"properties": {"kind": {"enum": ["explicit_table", "ExplicitTable"]}}},
                    "then": {
                        "required": ["rows"],
                        "properties": {
                            "rows": {
                                "type": "array",
                                "minItems": 1,
                                "items": {
                                    "type": "array",
                                    "prefixItems": [
                                        {"type": "integer", "minimum": 0},
                                        {"type": "array", "items": {"type": "integer", "minimum": 1}},
                                        _PROB,
                                    ],
                                    "minItems": 3,
                                    "maxItems": 3,
                                },
                            }
                        },
                    },
                },
            ],
        },
    },
}


def validate_channel_dict(doc, path=()) -> None:
    validator = jsonschema.Draft202012Validator(CHANNEL_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, tuple(path) + tuple(err.absolute_path))


def channel_from_dict(doc: dict) -> ChannelSpec:
    validate_channel_dict(doc)
    law = dict(doc["law"])
    kind = law.pop("kind")
    spec = make_builtin(kind, law, doc.get("p_flip", 0.0))
    if "tail_certificate" in doc:
        spec = ChannelSpec(spec.law, spec.p_flip, tuple(doc["tail_certificate"]))
    return spec


def channel_to_dict(spec: ChannelSpec) -> dict:
    return {
        "p_flip": spec.p_flip,
        "law": spec.law.to_dict(),
        "tail_certificate": list(spec.tail_certificate),
    }
