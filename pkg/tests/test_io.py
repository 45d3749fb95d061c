import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsquant.grid import SampledFunction, make_grid
from gsquant.io import (MAGIC, dumps, from_bytes, loads, read_gsq1, to_bytes, to_json_dict,
                        write_gsq1)


@given(st.integers(min_value=1, max_value=2), st.sampled_from([2, 4, 8]),
       st.floats(min_value=0.1, max_value=50.0), st.integers(min_value=0, max_value=2 ** 31))
def test_binary_round_trip(d, n, L, seed):
    rng = np.random.default_rng(seed)
    g = make_grid(d, n, L)
    f = SampledFunction(g, rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size))
    back = from_bytes(to_bytes(f))
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_file_round_trip(tmp_path):
    g = make_grid(2, 4, (1.0, 2.5))
    f = SampledFunction(g, np.arange(16) * (1 - 2j))
    write_gsq1(tmp_path / "f.gsq", f)
    assert (tmp_path / "f.gsq").read_bytes()[:8] == MAGIC
    assert np.array_equal(read_gsq1(tmp_path / "f.gsq").values, f.values)


@pytest.mark.parametrize("mangle", [
    lambda b: b"XXXXXXXX" + b[8:],
    lambda b: b[:-1],
    lambda b: b + b"\0" * 16,
])
def test_binary_rejects_corruption(mangle):
    f = SampledFunction(make_grid(1, 4, 1.0), np.ones(4))
    with pytest.raises(ValueError):
        from_bytes(mangle(to_bytes(f)))


def test_json_round_trip_and_limit():
    f = SampledFunction(make_grid(1, 8, 2.0), np.linspace(0, 1, 8) + 0.5j, "ramp")
    back = loads(dumps(f))
    assert back.label == "ramp"
    assert np.array_equal(back.values, f.values)
    big = SampledFunction(make_grid(2, 512, 1.0), np.zeros(512 * 512))
    with pytest.raises(ValueError):
        to_json_dict(big)
