"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from iv_sensa.distributions import CondDensityTable, JointDiscreteDist
from iv_sensa.bernstein import basis_mean

# closed-form reference values hold to this precision
EXACT = 1e-8


def make_d1() -> JointDiscreteDist:
    """pZ=0.5; pi(1|z)=(0.4,0.6); P(Y=1,X=1|z)=(0.2,0.5); P(Y=1,X=0|z)=(0.3,0.1)."""
    return JointDiscreteDist.binary(0.5, (0.4, 0.6), [[0.3, 0.1], [0.2, 0.5]])


def make_d2() -> JointDiscreteDist:
    """Arm-1 intervals [0.05,0.75] and [0.8,0.9] are disjoint."""
    return JointDiscreteDist.binary(0.5, (0.3, 0.9), [[0.35, 0.05], [0.05, 0.8]])


@pytest.fixture
def d1():
    return make_d1()


@pytest.fixture
def d2():
    return make_d2()


def random_binary_dist(rng, pz_range=(0.1, 0.9)) -> JointDiscreteDist:
    pz1 = rng.uniform(*pz_range)
    pi1 = rng.uniform(0.05, 0.95, size=2)
    pi = np.vstack([1 - pi1, pi1])
    p_y1 = rng.uniform(0, 1, size=(2, 2)) * pi
    return JointDiscreteDist.binary(pz1, pi1, p_y1)


def box_bounds(dist: JointDiscreteDist, arm: int):
    """Per-z interval for P(Y(x)=1 | Z=z) from the data alone."""
    lo = dist.cells[1, arm, :]
    return lo, lo + (1 - dist.pi[arm])


def closed_form_prob(dist, arm, theta_zero: bool):
    """P(Y(x)=1) bounds: box arithmetic (no assumptions) or interval intersection (independence)."""
    lo, hi = box_bounds(dist, arm)
    if not theta_zero:
        return float(dist.pz @ lo), float(dist.pz @ hi)
    a, b = float(lo.max()), float(hi.min())
    return (a, b) if a <= b else None


def closed_form_ate(dist, theta_zero: bool):
    p1 = closed_form_prob(dist, 1, theta_zero)
    p0 = closed_form_prob(dist, 0, theta_zero)
    if p1 is None or p0 is None:
        return None
    return p1[0] - p0[1], p1[1] - p0[0]


def synthetic_table(M: int, seed: int = 0, pi1=(0.3, 0.7), pz1=0.5, tilt=0.3):
    """Table whose conditional densities are exact Bernstein mixtures and whose
    potential-outcome laws do not depend on Z.

    Returns ``(table, u)`` where ``u[x]`` are the simplex weights of the law of
    ``Y(x)``.
    """
    rng = np.random.default_rng(seed)
    pi1 = np.asarray(pi1, dtype=float)
    pi = np.vstack([1 - pi1, pi1])
    xi = np.zeros((2, 2, M + 1))
    u = {}
    for x in (0, 1):
        u[x] = rng.dirichlet(np.full(M + 1, 3.0))
        for z in (0, 1):
            r = u[x] * (1 + tilt * rng.uniform(-1, 1, M + 1))
            r /= r.sum()
            rest = (u[x] - pi[x, z] * r) / (1 - pi[x, z])
            assert rest.min() >= 0
            xi[x, z] = r * (M + 1)
    return CondDensityTable(xi, pi, np.array([1 - pz1, pz1])), u


def true_ate(u, M: int) -> float:
    return float((u[1] - u[0]) @ basis_mean(M))


def refuted_table(M: int, pi1: float = 0.6):
    """Arm-1 densities concentrated at opposite ends for the two instrument values."""
    xi = np.zeros((2, 2, M + 1))
    xi[:, 0, 0] = M + 1
    xi[:, 1, M] = M + 1
    pi = np.array([[1 - pi1, 1 - pi1], [pi1, pi1]])
    return CondDensityTable(xi, pi, np.array([0.5, 0.5]))


# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
