import numpy as np
import pytest
from hypothesis import strategies as st

from cuefusion.geometry import BBox

coord = st.floats(min_value=-500.0, max_value=500.0, allow_nan=False, allow_infinity=False)
size = st.floats(min_value=0.0, max_value=300.0, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw, min_size=0.0):
    x = draw(coord)
    y = draw(coord)
    w = draw(st.floats(min_value=min_size, max_value=300.0, allow_nan=False))
    h = draw(st.floats(min_value=min_size, max_value=300.0, allow_nan=False))
    return BBox(x, y, x + w, y + h)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
