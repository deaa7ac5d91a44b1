import csv
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import deletion_rows, enumerate_mean_trace
from tracelab.bits import all_strings, input_poly_eval
from tracelab.channel import ChannelSpec, Deletion, apply_channel, identity_channel
from tracelab.errors import DomainError
from tracelab.mean_trace import choose_truncation, exact_mean_trace, mean_trace_matrix
from tracelab.reconstruction import (
    CandidateSet,
    certify_lower_bound,
    pairwise_separation,
    reconstruct,
    run_trials,
    separation_scaling,
    trace_complexity_experiment,
    wilson_interval,
    write_certification_csv,
    write_separation_csv,
    write_success_csv,
)
from tracelab.streams import substream

from conftest import BUILTINS


def test_input_poly_examples():
    assert input_poly_eval([1, 1, 1], 1) == 3
    assert input_poly_eval([1, -1], 0) == 1
    assert input_poly_eval([1, -1], 1j) == 1 - 1j


@given(x=st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=30), re=st.floats(-2, 2), im=st.floats(-2, 2))
@settings(max_examples=60, deadline=None)
def test_input_poly_against_power_sum(x, re, im):
    w = complex(re, im)
    ref = sum(v * w**i for i, v in enumerate(x))
    assert abs(input_poly_eval(x, w) - ref) <= 1e-9 * (1 + abs(ref))


def test_candidate_sets():
    assert len(CandidateSet.exhaustive(3)) == 8
    assert CandidateSet.explicit(["+-", "--"]).strings.tolist() == [[-1, -1], [1, -1]]
    with pytest.raises(DomainError):
        CandidateSet.explicit(["+-", "+-"])
    with pytest.raises(DomainError):
        CandidateSet.explicit(["+-", "+"])


def test_reconstruct_identity_one_trace():
    x = np.array([1, -1, -1, 1, 1], dtype=np.int8)
    tr = apply_channel(identity_channel(), x, substream(0))
    assert np.array_equal(reconstruct(tr.symbols.astype(float), identity_channel(), CandidateSet.exhaustive(5), 5), x)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_zero_noise_reconstruction(name):
    spec = BUILTINS[name]
    n = 8
    N = choose_truncation(spec, n, 1e-12)
    assert pairwise_separation(spec, n, N).min_l1 > 0
    cands = CandidateSet.exhaustive(n)
    means = mean_trace_matrix(spec, cands.strings, N)
    for x, mu in zip(cands.strings, means):
        assert np.array_equal(reconstruct(mu, spec, cands, N), x)


def test_tie_break_lexicographic():
    spec = ChannelSpec(Deletion(0.3))
    cands = CandidateSet.explicit(["++", "--"])
    mu = np.zeros(2)  # equidistant from both
    assert reconstruct(mu, spec, cands, 2).tolist() == [-1, -1]


def test_reconstruct_rejects_bad_length():
    with pytest.raises(DomainError):
        reconstruct(np.zeros(3), identity_channel(), CandidateSet.exhaustive(2), 2)


@given(scale=st.floats(0.01, 100), seed=st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_argmin_scale_invariance(scale, seed):
    spec = BUILTINS["Deletion(0.3)"]
    rng = np.random.default_rng(seed)
    strings = all_strings(5)
    means = mean_trace_matrix(spec, strings, 5)
    mu = rng.normal(size=5) * 0.5
    d = np.abs(means - mu).sum(axis=1)
    ds = np.abs(scale * means - scale * mu).sum(axis=1)
    if np.sort(d)[1] - d.min() > 1e-9:  # skip numerical near-ties
        assert np.argmin(d) == np.argmin(ds)


def test_separation_deletion_half_n2():
    rep = pairwise_separation(ChannelSpec(Deletion(0.5)), 2, 2)
    assert rep.min_l1 == pytest.approx(1.0, abs=1e-12)
    # six unordered pairs reduce to three under global negation
    mus = {s: enumerate_mean_trace(deletion_rows(0.5), 0.0, s, 2) for s in itertools.product((-1, 1), repeat=2)}
    ref = min(np.abs(mus[a] - mus[b]).sum() for a, b in itertools.combinations(mus, 2))
    assert ref == pytest.approx(1.0)


def test_separation_identity():
    for n in (2, 5, 9):
        assert pairwise_separation(identity_channel(), n).min_l1 == 2


def test_separation_against_bruteforce():
    spec = BUILTINS["Duplication{1,2,3}"]
    n, N = 5, 15
    rep = pairwise_separation(spec, n, N)
    means = mean_trace_matrix(spec, all_strings(n), N)
    d = [np.abs(means[i] - means[j]).sum() for i in range(32) for j in range(i + 1, 32)]
    assert rep.min_l1 == pytest.approx(min(d), abs=1e-12)
    assert rep.max_l1 == pytest.approx(max(d), abs=1e-12)


def test_separation_sign_symmetry():
    spec = BUILTINS["GeoInsBefore(0.5,0.3)"]
    rng = np.random.default_rng(9)
    for _ in range(20):
        x, y = rng.choice([-1, 1], size=(2, 7))
        a = exact_mean_trace(spec, x, 30).values - exact_mean_trace(spec, y, 30).values
        b = exact_mean_trace(spec, -x, 30).values - exact_mean_trace(spec, -y, 30).values
        assert np.abs(a).sum() == pytest.approx(np.abs(b).sum(), abs=1e-14)


def test_separation_cap_and_sampled():
    spec = BUILTINS["Deletion(0.3)"]
    with pytest.raises(DomainError, match="use sampled mode"):
        pairwise_separation(spec, 13)
    rep = pairwise_separation(spec, 16, mode="sampled", pairs=200, seed=3)
    assert rep.min_l1 > 0 and rep.mode == "sampled"
    small = pairwise_separation(spec, 8, mode="sampled", pairs=50, seed=1)
    assert small.min_l1 >= pairwise_separation(spec, 8).min_l1 - 1e-12


def test_separation_thread_independent():
    spec = BUILTINS["GeoInsDel(0.5,0.25)"]
    a = pairwise_separation(spec, 9, threads=1)
    b = pairwise_separation(spec, 9, threads=4)
    assert a.min_l1 == b.min_l1 and a.argmin_pair == b.argmin_pair


def test_scaling_identity_slope_zero():
    fit = separation_scaling(identity_channel(), [2, 4, 6, 8])
    assert all(row[2] == 2 for row in fit.rows)
    assert abs(fit.C) <= 1e-12


def test_scaling_deletion_half_monotone():
    fit = separation_scaling(ChannelSpec(Deletion(0.5)), range(2, 11))
    mins = [row[2] for row in fit.rows]
    assert mins[0] == pytest.approx(1.0)
    assert all(b <= a + 1e-15 for a, b in zip(mins, mins[1:]))


def test_certify_vacuous_pair_passes():
    spec = BUILTINS["GeoInsDel(0.5,0.25)"]
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y = rng.choice([-1, 1], size=(2, 10))
        if (x == y).all():
            continue
        c = certify_lower_bound(spec, x, y)
        assert c.passed
        if c.rhs <= 0:
            assert c.vacuous


def test_certify_deletion_ratio_recorded():
    spec = BUILTINS["Deletion(0.3)"]
    rng = np.random.default_rng(8)
    x, y = rng.choice([-1, 1], size=(2, 8))
    y[0] = -x[0]
    c = certify_lower_bound(spec, x, y)
    assert c.L == pytest.approx(2.0)
    assert c.passed and c.rhs > 0 and c.lhs / c.rhs >= 1 - 1e-9


def test_certify_rejects_equal_pair():
    with pytest.raises(DomainError):
        certify_lower_bound(BUILTINS["Deletion(0.3)"], [1, -1], [1, -1])


def test_identity_one_trace_always_succeeds():
    res = run_trials(identity_channel(), 6, 1, 20, seed=4)
    assert all(r.success for r in res)


def test_experiment_requires_trials():
    with pytest.raises(DomainError):
        trace_complexity_experiment(identity_channel(), 4, [1], 10, seed=0)


def test_success_nondecreasing_up_to_ci():
    spec = BUILTINS["Deletion(0.3)"]
    res = trace_complexity_experiment(spec, 8, [10, 100, 1000, 4000], 40, seed=6)
    for a, b in zip(res.curve, res.curve[1:]):
        assert b.ci_hi >= a.ci_lo


def test_wilson_interval():
    lo, hi = wilson_interval(50, 50)
    assert hi == 1.0 and lo == pytest.approx(0.9286, abs=1e-4)


def test_delta_quarter_ball_implication():
    spec = BUILTINS["Deletion(0.3)"]
    n = 8
    N = choose_truncation(spec, n, 1e-12)
    delta = pairwise_separation(spec, n, N).min_l1
    res = run_trials(spec, n, 1000, 100, seed=17, N=N)
    inside = [r for r in res if r.l1_error <= delta / 4]
    assert inside and all(r.success for r in inside)


@pytest.mark.xfail(strict=True, reason="at n/delta^2 traces the L1 error is about 2 delta, not delta/4")
def test_quarter_ball_at_n_over_delta_squared():
    spec = BUILTINS["Deletion(0.3)"]
    n = 8
    N = choose_truncation(spec, n, 1e-12)
    delta = pairwise_separation(spec, n, N).min_l1
    res = run_trials(spec, n, math.ceil(n / delta**2), 100, seed=18, N=N)
    assert sum(r.l1_error <= delta / 4 for r in res) >= 95


@pytest.mark.xfail(strict=True, reason="success rate at n/delta^2 traces is about 0.7 for n = 8")
def test_success_at_n_over_delta_squared():
    spec = BUILTINS["Deletion(0.3)"]
    n = 8
    N = choose_truncation(spec, n, 1e-12)
    delta = pairwise_separation(spec, n, N).min_l1
    res = run_trials(spec, n, math.ceil(n / delta**2), 100, seed=19, N=N)
    assert sum(r.success for r in res) >= 95


def test_csv_writers(tmp_path):
    spec = BUILTINS["Deletion(0.3)"]
    write_separation_csv(tmp_path / "s.csv", [pairwise_separation(spec, 4)])
    rows = list(csv.DictReader((tmp_path / "s.csv").open()))
    assert rows[0]["n"] == "4" and float(rows[0]["min_l1"]) > 0
    res = trace_complexity_experiment(identity_channel(), 3, [1], 20, seed=0)
    write_success_csv(tmp_path / "c.csv", res.curve)
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "t,successes,trials,ci_lo,ci_hi"
    c = certify_lower_bound(spec, [1, -1, 1], [1, 1, 1])
    write_certification_csv(tmp_path / "cert.csv", [([1, -1, 1], [1, 1, 1], c)])
    row = next(csv.DictReader((tmp_path / "cert.csv").open()))
    assert row["x"] == "+-+" and row["pass"] == "1"


def test_trace_complexity_frozen_baseline():
    import json
    from pathlib import Path

    from tracelab.channel import channel_from_dict

    base = json.loads((Path(__file__).parent / "baselines.json").read_text())["trace_complexity"]
    spec = channel_from_dict(base["channel"])
    res = trace_complexity_experiment(spec, base["n"], [base["t"]], base["trials"], seed=base["seed"])
    point = res.curve[0]
    assert point.successes == base["successes"]
    assert point.successes / point.trials >= 0.95
