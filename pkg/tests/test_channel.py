import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import geometric_block_pmf
from tracelab.channel import (
    ChannelSpec,
    Deletion,
    Duplication,
    ExplicitTable,
    GeoInsBefore,
    GeoInsDel,
    TraceBatch,
    apply_channel,
    channel_from_dict,
    channel_to_dict,
    identity_channel,
    m_pmf,
    make_builtin,
    replication_profile,
    sample_per_bit,
    sample_traces,
    validate_channel_dict,
)
from tracelab.errors import ChannelValidationError, ConfigError, DomainError
from tracelab.streams import substream

from conftest import BUILTINS


def test_identity_is_point_mass():
    spec = make_builtin("Deletion", {"q": 0.0})
    assert spec.law.rows() == ((1, (1,), 1.0),)
    assert m_pmf(spec, 3).tolist() == [0.0, 1.0, 0.0, 0.0]


def test_deletion_half_rows():
    rows = make_builtin("Deletion", {"q": 0.5}).law.rows()
    assert sorted(rows) == [(0, (), 0.5), (1, (1,), 0.5)]


def test_geoinsdel_zero_length_probability():
    spec = make_builtin("GeoInsDel", {"sigma": 0.5, "delta": 0.25})
    assert m_pmf(spec, 2)[0] == pytest.approx(0.125, abs=1e-15)


def test_geoinsdel_pmf_against_convolution():
    spec = make_builtin("GeoInsDel", {"sigma": 0.5, "delta": 0.25})
    ref = geometric_block_pmf(0.5, 0.75, 40)
    assert np.allclose(m_pmf(spec, 40), ref, atol=1e-15)


def test_m_pmf_examples():
    assert np.allclose(m_pmf(ChannelSpec(Deletion(0.3)), 3), [0.3, 0.7, 0, 0])
    table = ChannelSpec(ExplicitTable(((2, (1, 2), 1.0),)))
    assert m_pmf(table, 5).tolist() == [0, 0, 1, 0, 0, 0]


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_m_pmf_mass_bound(name):
    spec = BUILTINS[name]
    for N in (0, 1, 3, 10, 40):
        p = m_pmf(spec, N)
        assert (p >= 0).all()
        assert p.sum() >= 1 - spec.kappa * math.exp(-spec.alpha * (N + 1)) - 1e-15


def test_replication_profile_examples():
    prof = replication_profile(ChannelSpec(Deletion(0.3)), 4)
    assert np.allclose(prof.r, [0.7, 0, 0, 0]) and prof.e_r == pytest.approx(0.7)
    s, d = 0.4, 0.2
    prof = replication_profile(ChannelSpec(GeoInsDel(s, d)), 6)
    assert np.allclose(prof.r, (1 - d) * s * (1 - s) ** np.arange(6), atol=1e-15)
    assert prof.e_r == pytest.approx(1 - d)
    prof = replication_profile(ChannelSpec(ExplicitTable(((3, (2,), 1.0),))), 3)
    assert prof.r.tolist() == [0, 1, 0] and prof.e_r == 1


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_profile_below_length_tail(name):
    spec = BUILTINS[name]
    K = 30
    r = replication_profile(spec, K).r
    pmf = m_pmf(spec, K + 200)
    tail = pmf[::-1].cumsum()[::-1]
    assert (r <= tail[1 : K + 1] + 1e-15).all()


def test_geoinsdel_profile_matches_sampling():
    spec = ChannelSpec(GeoInsDel(0.5, 0.25))
    m, rep = spec.law.sample(substream(1, 99), 10**6)
    starts = np.repeat(np.cumsum(m) - m, m)
    pos = np.arange(len(rep)) - starts
    counts = np.bincount(pos[rep], minlength=5)[:5] / 10**6
    expected = 0.75 * 0.5 * 0.5 ** np.arange(5)
    sd = np.sqrt(expected * (1 - expected) / 10**6)
    assert (np.abs(counts - expected) <= 5 * sd).all()


def test_rejects_bad_parameters():
    with pytest.raises(ChannelValidationError):
        make_builtin("Deletion", {"q": 1.0})
    with pytest.raises(DomainError):
        make_builtin("Deletion", {"q": -0.1})
    with pytest.raises(DomainError):
        make_builtin("GeoInsDel", {"sigma": 0.0, "delta": 0.1})
    with pytest.raises(DomainError):
        ChannelSpec(Deletion(0.1), p_flip=0.5)
    with pytest.raises(ChannelValidationError):
        ExplicitTable(((2, (3,), 1.0),))
    with pytest.raises(ChannelValidationError):
        ExplicitTable(((1, (1,), 0.5), (0, (), 0.4)))
    with pytest.raises(ChannelValidationError):
        ChannelSpec(ExplicitTable(((2, (), 1.0),)))


def test_tail_certificate_checked():
    law = GeoInsDel(0.5, 0.25)
    ChannelSpec(law, tail_certificate=(1.75, math.log(2)))
    with pytest.raises(ChannelValidationError):
        ChannelSpec(law, tail_certificate=(1.0, 1.0))


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_natural_certificate_holds(name):
    spec = BUILTINS[name]
    tail = m_pmf(spec, 400)[::-1].cumsum()[::-1]
    tau = np.arange(len(tail))
    assert (tail <= spec.kappa * np.exp(-spec.alpha * tau) * (1 + 1e-12)).all()


def test_sample_per_bit_point_masses():
    rng = substream(5)
    assert sample_per_bit(identity_channel(), rng) == sample_per_bit(identity_channel(), rng)
    out = sample_per_bit(ChannelSpec(ExplicitTable(((2, (1, 2), 1.0),))), rng)
    assert out.m == 2 and out.r_set == frozenset({1, 2})


def test_deletion_kept_frequency():
    m, _ = ChannelSpec(Deletion(0.5)).law.sample(substream(7), 10**6)
    assert abs((m == 1).mean() - 0.5) <= 0.002


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_per_bit_frequencies(name):
    spec = BUILTINS[name]
    size = 10**5
    m, _ = spec.law.sample(substream(11, len(name)), size)
    pmf = m_pmf(spec, 8)
    counts = np.bincount(m, minlength=9)[:9] / size
    sd = np.sqrt(pmf * (1 - pmf) / size)
    assert (np.abs(counts - pmf) <= 5 * sd + 1e-12).all()


def test_apply_channel_identity():
    tr = apply_channel(identity_channel(), [1, -1, 1], substream(0))
    assert tr.symbols.tolist() == [1, -1, 1]
    assert str(tr) == "+-+"


def test_apply_channel_empty_input():
    with pytest.raises(DomainError):
        apply_channel(identity_channel(), [], substream(0))


def test_deletion_pattern_frequency():
    batch = sample_traces(ChannelSpec(Deletion(0.5)), [1, -1], 10**6, substream(3))
    padded = batch.padded(2)
    hit = (batch.lengths == 2) & (padded[:, 0] == 1) & (padded[:, 1] == -1)
    assert abs(hit.mean() - 0.25) <= 0.002


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_trace_length_is_block_sum(name):
    batch = sample_traces(BUILTINS[name], [1, -1, -1, 1, 1], 200, substream(2))
    assert isinstance(batch, TraceBatch)
    assert (batch.lengths == batch.block_lengths.sum(axis=1)).all()
    assert set(np.unique(batch.symbols)) <= {-1, 1}


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_sign_symmetry_matched_seed(name):
    spec = ChannelSpec(BUILTINS[name].law, p_flip=0.1)
    x = np.array([1, -1, 1, 1, -1], dtype=np.int8)
    a = sample_traces(spec, x, 500, substream(4, 1))
    b = sample_traces(spec, -x, 500, substream(4, 1))
    assert np.array_equal(a.symbols, -b.symbols)
    assert np.array_equal(a.offsets, b.offsets)


def test_flip_rate():
    spec = ChannelSpec(Deletion(0.0), p_flip=0.2)
    batch = sample_traces(spec, [1] * 10, 20000, substream(9))
    frac = (batch.symbols == -1).mean()
    assert abs(frac - 0.2) <= 5 * math.sqrt(0.16 / 200000)


def test_geoinsbefore_thinning_law():
    # insertions counted before thinning; survivors must again be geometric
    law = GeoInsBefore(0.5, 0.3)
    m, rep = law.sample(substream(21), 2 * 10**5)
    pmf = law.m_pmf(6)
    counts = np.bincount(m, minlength=7)[:7] / len(m)
    sd = np.sqrt(pmf * (1 - pmf) / len(m))
    assert (np.abs(counts - pmf) <= 5 * sd).all()
    assert rep.sum() / len(m) == pytest.approx(0.7, abs=5 * math.sqrt(0.21 / len(m)))


def test_duplication_geometric_lengths():
    law = Duplication(sigma=0.4)
    pmf = law.m_pmf(5)
    assert pmf[0] == 0 and pmf[1] == pytest.approx(0.4) and pmf[2] == pytest.approx(0.24)
    with pytest.raises(DomainError):
        Duplication(lengths=((0, 1.0),))


def test_json_roundtrip_and_schema_paths():
    doc = {"p_flip": 0.1, "law": {"kind": "explicit_table", "rows": [[2, [1], 0.5], [1, [1], 0.5]]}}
    spec = channel_from_dict(doc)
    assert channel_from_dict(channel_to_dict(spec)) == spec
    with pytest.raises(ConfigError) as err:
        validate_channel_dict({"p_flip": 0.1, "law": {"kind": "deletion", "q": 2}})
    assert "law/q" in str(err.value)
    with pytest.raises(ConfigError):
        validate_channel_dict({"law": {"kind": "nope"}})


@given(q=st.floats(0, 0.95), p=st.floats(0, 0.49))
@settings(max_examples=40, deadline=None)
def test_spec_hashable_and_equal(q, p):
    a = ChannelSpec(Deletion(q), p)
    b = ChannelSpec(Deletion(q), p)
    assert a == b and hash(a) == hash(b)


@given(sigma=st.floats(0.05, 1.0), delta=st.floats(0.0, 0.9))
@settings(max_examples=40, deadline=None)
def test_geometric_profile_bounded_by_tail(sigma, delta):
    spec = ChannelSpec(GeoInsDel(sigma, delta))
    r = replication_profile(spec, 20).r
    tail = np.array([spec.law.tail(k) for k in range(1, 21)])
    assert (r <= tail + 1e-15).all()
