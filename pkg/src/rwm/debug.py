"""Opt-in runtime assertions.

The test suite switches these on for the whole session so that every
iteration anywhere in the suite is checked for mass conservation, and every
partial step for its truncation bound.  They stay off by default because
the partial-step check costs one extra exact step.
"""

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np


@dataclass
class Checks:
    mass: bool = False
    partial_bound: bool = False
    mass_tol: float = 1e-9
    mass_checked: int = 0
    partial_checked: int = 0


checks = Checks()


@contextmanager
def enabled(mass: bool = True, partial_bound: bool = True):
    old = (checks.mass, checks.partial_bound)
    checks.mass, checks.partial_bound = mass, partial_bound
    try:
        yield checks
    finally:
        checks.mass, checks.partial_bound = old


@contextmanager
def disabled():
    with enabled(False, False) as c:
        yield c


def check_mass(vectors, where: str) -> None:
    if not checks.mass:
        return
    for i, x in enumerate(vectors):
        total = float(np.sum(x))
        if abs(total - 1.0) > checks.mass_tol or np.any(x < 0):
            raise AssertionError(f"{where}: layer {i} mass {total!r} (min {x.min()!r})")
    checks.mass_checked += 1


def check_partial(approx, exact, bound: float, where: str) -> None:
    if not checks.partial_bound:
        return
    err = float(np.abs(approx - exact).sum())
    if err > bound + 1e-12:
        raise AssertionError(f"{where}: partial-step error {err!r} exceeds bound {bound!r}")
    checks.partial_checked += 1
