from hypothesis import given, strategies as st

from hybridsfe.coins import Coins


def test_same_seed_same_stream():
    assert Coins(7, "x").bytes(64) == Coins(7, "x").bytes(64)
    assert Coins(7, "x").bytes(64) != Coins(7, "y").bytes(64)
    assert Coins(7, "x").bytes(64) != Coins(8, "x").bytes(64)


def test_fork_is_independent_of_parent_progress():
    a = Coins(3, "p")
    b = Coins(3, "p")
    b.bytes(100)
    assert a.fork("child").bytes(32) == b.fork("child").bytes(32)


def test_from_root_replays():
    c = Coins(11, "alice")
    want = c.bytes(40)
    assert Coins.from_root(c.root, "alice").bytes(40) == want


@given(st.integers(1, 10**6), st.integers(0, 2**32))
def test_randbelow_range(m, seed):
    c = Coins(seed, "rb")
    for _ in range(5):
        assert 0 <= c.randbelow(m) < m


def test_randbelow_roughly_uniform():
    c = Coins(0, "uniform")
    counts = [0] * 6
    for _ in range(6000):
        counts[c.randbelow(6)] += 1
    assert min(counts) > 850 and max(counts) < 1150
