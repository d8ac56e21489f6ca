import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from uswb._util import data_path, fmt_float, load_toml, substream


def test_substream_is_reproducible():
    a = substream(7, 1, 2).random(5)
    b = substream(7, 1, 2).random(5)
    assert np.array_equal(a, b)


def test_substreams_with_different_keys_differ():
    assert not np.array_equal(substream(7, 1, 2).random(5), substream(7, 2, 1).random(5))
    assert not np.array_equal(substream(7, 1).random(5), substream(8, 1).random(5))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_float_round_trips(x):
    assert float(fmt_float(x)) == x


def test_bundled_tissue_file_loads():
    raw = load_toml(data_path("tissues.toml"))
    assert {"muscle", "fat", "skin", "bone"} <= set(raw["tissue"])
