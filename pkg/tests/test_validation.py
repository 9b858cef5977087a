import numpy as np
import pytest

from blochkit._validation import as_int_vector, as_vector, choice, positive, positive_int
from blochkit.errors import ConfigError


def test_vectors():
    assert as_vector([1, 2], 2).dtype == float
    assert as_int_vector([1.0, -2.0]).tolist() == [1, -2]
    for bad in ([[1.0]], [np.inf, 0]):
        with pytest.raises(ConfigError):
            as_vector(bad)
    with pytest.raises(ConfigError):
        as_vector([1, 2], 3)
    with pytest.raises(ConfigError):
        as_int_vector([0.5, 1])


@pytest.mark.parametrize("v", [0, -1, "a", np.nan])
def test_positive_rejects(v):
    with pytest.raises(ConfigError):
        positive(v, "v")


def test_scalars():
    assert positive("2.5", "v") == 2.5
    assert positive_int(3.0, "n") == 3
    with pytest.raises(ConfigError):
        positive_int(True, "n")
    with pytest.raises(ConfigError):
        positive_int(2.5, "n")
    assert choice("a", {"a", "b"}, "c") == "a"
    with pytest.raises(ConfigError):
        choice("z", {"a"}, "c")
