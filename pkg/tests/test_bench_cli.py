import csv
import io

import pytest
from hypothesis import given, strategies as st

from hybridsfe import cli
from hybridsfe.bench import BenchMismatch, BenchResult, Workload, direction, from_csv, mean_ci, run_bench, to_csv


def test_direction_rules():
    assert direction([1, 1.1, 0.9], [5, 5.1, 4.9]) == "holds"
    assert direction([5, 5.1, 4.9], [1, 1.1, 0.9]) == "reversed"
    assert direction([2, 3, 4, 1, 5], [2.5, 3, 2, 3.5, 2]) == "overlap"


@given(st.lists(st.floats(0.1, 1e4), min_size=2, max_size=30))
def test_ci_contains_mean(xs):
    m, lo, hi = mean_ci(xs)
    assert lo <= m + 1e-9 and m <= hi + 1e-9


def test_csv_roundtrip():
    res, times = run_bench("millionaires", "sgx", iters=3, bits=32)
    assert len(times) == 3
    back = from_csv(to_csv([res]))
    assert back == [res]
    assert list(csv.DictReader(io.StringIO(to_csv([res]))))[0]["mode"] == "sgx"


def test_bench_catches_wrong_answers(monkeypatch):
    wl = Workload("millionaires", "sgx", bits=8)
    a, b, check = wl.draw(0)
    with pytest.raises(BenchMismatch):
        check(b"\x07", b"")


def test_desk_caps():
    with pytest.raises(ValueError):
        Workload("dijkstra", "sgx", nodes="1000")
    with pytest.raises(ValueError):
        Workload("database", "sgx", entries=5000)


def test_cli_bench(capsys):
    assert cli.main(["bench", "--app", "database", "--mode", "hybrid", "--entries", "16", "--queries", "20",
                     "--iters", "2"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["config"] == "Database16x20" and rows[0]["iters"] == "2"
    assert set(rows[0]) == set(BenchResult.columns())


def test_cli_trace(capsys):
    assert cli.main(["trace", "--store", "unblinded", "--entries", "5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "step,slot,op" and [l.split(",")[1] for l in lines[1:]] == ["0", "1", "2", "3", "4"]


def test_cli_bad_size_exit_code():
    assert cli.main(["bench", "--app", "dijkstra", "--mode", "sgx", "--nodes", "10000"]) == 1


def test_cli_role_requires_tcp():
    assert cli.main(["bench", "--app", "millionaires", "--mode", "sgx", "--role", "alice", "--bits", "8"]) == 1
