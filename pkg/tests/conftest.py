import random
from fractions import Fraction

import pytest

from heiscalc.core import GroupParams, Point


@pytest.fixture
def h1():
    return GroupParams(1)


@pytest.fixture
def h2():
    return GroupParams(2)


def rand_fraction(rng: random.Random, span: int = 6, den: int = 4) -> Fraction:
    return Fraction(rng.randint(-span, span), rng.randint(1, den))


def rand_point(rng: random.Random, params: GroupParams) -> Point:
    n = params.n
    return Point.of(
        params,
        [rand_fraction(rng) for _ in range(n)],
        [rand_fraction(rng) for _ in range(n)],
        rand_fraction(rng),
    )


def rand_float_point(rng: random.Random, params: GroupParams, scale: float = 2.0) -> Point:
    n = params.n
    return Point.of(
        params,
        [rng.uniform(-scale, scale) for _ in range(n)],
        [rng.uniform(-scale, scale) for _ in range(n)],
        rng.uniform(-scale, scale),
        exact=False,
    )
