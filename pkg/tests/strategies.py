"""Hypothesis strategies shared by the property tests."""

import numpy as np
from hypothesis import strategies as st


def disk_point(max_modulus: float = 0.9):
    return st.builds(
        lambda r, t: r * np.exp(2j * np.pi * t),
        st.floats(0.0, max_modulus),
        st.floats(0.0, 1.0),
    )


def coin_params(n_min: int = 1, n_max: int = 6, max_modulus: float = 0.9):
    return st.lists(disk_point(max_modulus), min_size=n_min, max_size=n_max).map(tuple)


seeds = st.integers(0, 2 ** 32 - 1)
