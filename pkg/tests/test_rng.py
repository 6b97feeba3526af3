import math

import numpy as np
import pytest

from pdflow.rng import SplitMix64

MASK = (1 << 64) - 1


def reference_stream(seed, count):
    # independent pure-int transcription of the published SplitMix64 algorithm
    out = []
    state = seed & MASK
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


# first outputs for seed 0, matching the published test vector of the
# reference C implementation (first value 0xe220a8397b1dcdaf)
SEED0_VECTOR = [
    0xE220A8397B1DCDAF,
    0x6E789E6AA1B965F4,
    0x06C45D188009454F,
    0xF88BB8A8724C81EC,
]

SEED42_VECTOR = [
    0xBDD732262FEB6E95,
    0x28EFE333B266F103,
    0x47526757130F9F52,
    0x581CE1FF0E4AE394,
]


def test_known_answer_seed0():
    g = SplitMix64(0)
    assert [g.next_u64() for _ in range(4)] == SEED0_VECTOR


def test_known_answer_seed42():
    g = SplitMix64(42)
    assert [g.next_u64() for _ in range(4)] == SEED42_VECTOR


@pytest.mark.parametrize("seed", [0, 1, 42, 1234567, 2**63, MASK])
def test_matches_reference_transcription(seed):
    g = SplitMix64(seed)
    assert [g.next_u64() for _ in range(32)] == reference_stream(seed, 32)


def test_uniforms_range_and_values():
    g = SplitMix64(42)
    u = g.uniforms(4)
    expect = [
        0.7415648787718233,
        0.1599103928769201,
        0.27860113025513866,
        0.34419071652363753,
    ]
    assert u.tolist() == expect
    big = SplitMix64(7).uniforms(10000)
    assert np.all(big >= 0.0) and np.all(big < 1.0)


def test_normals_box_muller_values():
    g = SplitMix64(42)
    z = g.normals(5)
    expect = [
        0.4147197504315305,
        0.6526812221519427,
        -0.8918862136277562,
        1.3268335628141064,
        1.7295930879374015,
    ]
    assert z.tolist() == expect


def test_normals_consume_whole_pairs():
    # an odd-length request burns the unused half of the last pair, so the
    # next call starts on a fresh pair regardless of the previous length
    a = SplitMix64(9)
    first = a.normals(3)
    b = SplitMix64(9)
    both = b.normals(4)
    assert first.tolist() == both[:3].tolist()
    assert a.normals(1)[0] != both[3]


def test_normals_roughly_standard():
    z = SplitMix64(123).normals(40000)
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1.0) < 0.02


def test_seed_determinism():
    a = SplitMix64(555).normals(100)
    b = SplitMix64(555).normals(100)
    assert a.tolist() == b.tolist()
    c = SplitMix64(556).normals(100)
    assert a.tolist() != c.tolist()


def test_uniform_resolution():
    # 53-bit mantissa construction: values are multiples of 2^-53
    u = SplitMix64(1).uniforms(100)
    scaled = u * 2.0**53
    assert np.all(scaled == np.floor(scaled))


def test_normal_formula_spot_check():
    raw = reference_stream(42, 2)
    u1 = ((raw[0] >> 11) + 1) * 2.0**-53
    u2 = (raw[1] >> 11) * 2.0**-53
    z0 = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
    assert SplitMix64(42).normals(1)[0] == z0
