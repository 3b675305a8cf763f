from __future__ import annotations

import numpy as np
import pytest

from sparsepop.poly import GEQ, Constraint, Polynomial, POPInstance, unit

CRITERIA: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = (ok, detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def variables(n: int) -> list[Polynomial]:
    return [Polynomial.variable(n, i) for i in range(n)]


def chain3() -> POPInstance:
    """1 + x1^2 + x2^2 + x3^2 + x1x2 + x2x3 + x3 (two overlapping cliques)."""
    x = variables(3)
    f = 1 + x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[0] * x[1] + x[1] * x[2] + x[2]
    return POPInstance(3, f, name="chain3")


def quartic6() -> POPInstance:
    """1 + sum x_i^4 + x1x2x3 + x3x4x5 + x3x4x6 + x3x5x6 + x4x5x6."""
    x = variables(6)
    f = 1 + sum(xi ** 4 for xi in x)
    f = f + x[0] * x[1] * x[2] + x[2] * x[3] * x[4] + x[2] * x[3] * x[5] + x[2] * x[4] * x[5] + x[3] * x[4] * x[5]
    return POPInstance(6, f, name="quartic6")


def random_pop(seed: int) -> tuple[POPInstance, int]:
    """Seeded banded POP with n <= 8 and relaxation order d <= 2.

    Odd seeds give quadratic objectives over ball-constrained windows (d = 1 or 2),
    even seeds quartic objectives with cubic couplings (d = 2).
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    x = variables(n)
    width = int(rng.integers(2, 4))
    windows = [tuple(range(i, min(n, i + width))) for i in range(n - 1)]
    cons = []
    if seed % 2:
        f = Polynomial(n)
        for w in windows:
            for a in w:
                for b in w:
                    if a <= b:
                        f = f + float(rng.normal()) * x[a] * x[b]
            f = f + float(rng.normal()) * x[w[0]]
        for w in windows:
            cons.append(Constraint(1 - sum((x[i] ** 2 for i in w), Polynomial(n)), GEQ))
        d = int(rng.integers(1, 3))
    else:
        f = sum((xi ** 4 for xi in x), Polynomial(n))
        for w in windows:
            a, b = w[0], w[-1]
            f = f + float(rng.normal()) * x[a] * x[b] + float(rng.normal()) * x[a] ** 2 * x[b]
            f = f + float(rng.normal()) * x[b]
            if len(w) > 2:
                f = f + float(rng.normal()) * x[w[0]] * x[w[1]] * x[w[2]]
        if seed % 4 == 0:
            cons.append(Constraint(Polynomial(n, {(0,) * n: 4.0, unit(n, 0, 2): -1.0, unit(n, 1, 2): -1.0}), GEQ))
        d = 2
    return POPInstance(n, f, tuple(cons), name=f"random{seed}"), d


@pytest.fixture
def ex_chain3() -> POPInstance:
    return chain3()


@pytest.fixture
def ex_quartic6() -> POPInstance:
    return quartic6()
