import numpy as np
import pytest

from strongdesign.seeding import make_rng


@pytest.fixture
def rng(request):
    # stable per-test stream
    key = sum(map(ord, request.node.name))
    return make_rng(20261016, key)


def rand_op(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def rand_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)
