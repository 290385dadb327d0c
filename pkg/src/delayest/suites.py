"""Randomized property suites over the core identities of the package.

Each suite draws ``cases`` random instances from a fixed seed, checks one
identity on every instance and reports the worst deviation. The CLI's
``verify`` command runs all of them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import build_augmented, verify_delay_roots
from .estimator import run_augmented, run_distributed, simulate_plant
from .gain import GainMatrix
from .linalg import TOL, eigenvalues, match_multisets, spectral_radius, verify_shift_roots
from .model import DelayProfile, LtiSystem, SensorNetwork, full_delay_profile


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    cases: int
    worst: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: {self.cases} cases, worst {self.worst:.3g} (tol {self.tolerance:g})"
        return f"{text}; {self.detail}" if self.detail else text


def _rng(seed, tag):
    return np.random.default_rng([int(seed), tag])


def random_stochastic(size: int, rng, density: float = 0.6) -> SensorNetwork:
    """Strongly connected, self-damped network with a random sparsity pattern."""
    edges = {(j, (j + 1) % size) for j in range(size)} if size > 1 else set()
    for j in range(size):
        for i in range(size):
            if i != j and rng.random() < density:
                edges.add((j, i))
    w = np.zeros((size, size))
    np.fill_diagonal(w, rng.uniform(0.1, 1.0, size))
    for j, i in edges:
        w[i, j] = rng.uniform(0.1, 1.0)
    p = w / w.sum(axis=1, keepdims=True)
    p[np.arange(size), np.arange(size)] += 1.0 - p.sum(axis=1)
    return SensorNetwork(p, frozenset(edges))


def random_profile(net: SensorNetwork, tau_bar: int, rng) -> DelayProfile:
    """Per-link delays in ``0..tau_bar`` with at least one link at ``tau_bar``."""
    tau = {(i, j): int(rng.integers(0, tau_bar + 1)) for j, i in sorted(net.edges)}
    if tau and tau_bar > 0:
        key = sorted(tau)[int(rng.integers(len(tau)))]
        tau[key] = tau_bar
    return DelayProfile(tau, tau_bar if tau else 0)


def kron_spectra(cases: int = 50, seed: int = 0, tol: float = TOL.rel) -> SuiteResult:
    """Eigenvalues of ``P kron A`` are the pairwise products of the factors' eigenvalues."""
    rng = _rng(seed, 3)
    worst = 0.0
    for _ in range(cases):
        p = rng.uniform(-1, 1, (rng.integers(1, 6),) * 2)
        a = rng.uniform(-1, 1, (rng.integers(1, 6),) * 2)
        lam = eigenvalues(p).eigenvalues
        mu = eigenvalues(a).eigenvalues
        actual = eigenvalues(np.kron(p, a)).eigenvalues
        scale = max(1.0, spectral_radius(p) * spectral_radius(a))
        worst = max(worst, match_multisets(actual, np.outer(lam, mu).ravel()) / scale)
    return SuiteResult("kronecker spectra", worst <= tol, cases, worst, tol)


def shift_roots(cases: int = 50, seed: int = 0, tol: float = TOL.shift_roots) -> SuiteResult:
    """Spectrum of the single-block shift matrix, for every ``n <= 4``, ``i <= n``, block size ``<= 3``."""
    rng = _rng(seed, 4)
    worst = 0.0
    count = 0
    for _ in range(cases):
        for n in range(1, 5):
            for i in range(1, n + 1):
                size = int(rng.integers(1, 4))
                rep = verify_shift_roots(rng.uniform(-1, 1, (size, size)), n, i, tol)
                worst = max(worst, rep.max_mismatch, rep.poly_mismatch)
                count += 1
    return SuiteResult("shift-matrix roots", worst <= tol, count, worst, tol)


def delayed_radius(cases: int = 50, seed: int = 0, tol: float = TOL.rel) -> SuiteResult:
    """Delay augmentation never raises the root-scaled spectral radius.

    Mixed profiles are drawn on nonnegative matrices, where the bound is
    guaranteed; uniform profiles (every entry, diagonal included) are drawn on
    signed matrices and must hit the bound exactly.
    """
    rng = _rng(seed, 5)
    worst = 0.0
    failures = 0
    for _ in range(cases):
        size = int(rng.integers(1, 6))
        tau_bar = int(rng.integers(0, 6))
        a = rng.uniform(0, 1, (size, size)) * (rng.random((size, size)) < 0.7)
        np.fill_diagonal(a, rng.uniform(0.1, 1.0, size))
        a *= rng.uniform(0.2, 0.99) / spectral_radius(a)
        tau = {(i, j): int(rng.integers(0, tau_bar + 1))
               for i in range(size) for j in range(size) if a[i, j] != 0}
        rep = verify_delay_roots(a, DelayProfile(tau, tau_bar))
        worst = max(worst, rep.rho_augmented - rep.bound)
        failures += not rep.passed

        s = rng.uniform(-1, 1, (size, size))
        s *= rng.uniform(0.2, 0.99) / spectral_radius(s)
        rep = verify_delay_roots(s, full_delay_profile(size, tau_bar))
        worst = max(worst, abs(rep.rho_augmented - rep.bound))
        failures += not rep.passed
    return SuiteResult("delayed spectral radius", failures == 0, 2 * cases, worst, tol)


def stochastic_augmented(cases: int = 50, seed: int = 0) -> SuiteResult:
    """The augmented consensus matrix stays row-stochastic with spectral radius one."""
    rng = _rng(seed, 9)
    row_err = 0.0
    rho_err = 0.0
    for _ in range(cases):
        net = random_stochastic(int(rng.integers(1, 7)), rng)
        prof = random_profile(net, int(rng.integers(0, 6)), rng)
        m = build_augmented(net.p, prof).matrix
        row_err = max(row_err, float(np.max(np.abs(m.sum(axis=1) - 1.0))))
        rho_err = max(rho_err, abs(spectral_radius(m) - 1.0))
    ok = row_err <= TOL.stochastic and rho_err <= TOL.rel
    return SuiteResult("augmented stochasticity", ok, cases, max(row_err, rho_err), TOL.rel,
                       f"row sums {row_err:.3g}, radius {rho_err:.3g}")


def random_instance(rng, max_sensors=5, max_n=6, max_tau=4, noisy=True):
    """Small random plant, network, delay profile and gain for execution-path checks."""
    n_sensors = int(rng.integers(1, max_sensors + 1))
    n = int(rng.integers(1, max_n + 1))
    a = rng.uniform(-1, 1, (n, n))
    a *= rng.uniform(0.5, 1.1) / max(spectral_radius(a), 1e-3)
    c = rng.normal(size=(n_sensors, n))
    q, r = (rng.uniform(0.001, 0.1), rng.uniform(0.001, 0.1)) if noisy else (0.0, 0.0)
    sys = LtiSystem(a, c, q, r)
    net = random_stochastic(n_sensors, rng)
    prof = random_profile(net, int(rng.integers(0, max_tau + 1)), rng)
    # near alpha * C_i / |C_i|^2 the correction I - K_i C_i^T C_i is close to a contraction
    norms = np.sum(c * c, axis=1, keepdims=True)
    l = rng.uniform(0, 1.5, (n_sensors, 1)) * c / norms + rng.normal(0, 0.1, c.shape) / np.sqrt(norms)
    gain = GainMatrix.from_output_gains(l, c)
    return sys, net, prof, gain


def dual_path(cases: int = 50, seed: int = 0, horizon: int = 50, tol: float = TOL.abs) -> SuiteResult:
    """Message-passing and augmented recursions produce the same estimates, entrywise."""
    rng = _rng(seed, 1)
    worst = 0.0
    for case in range(cases):
        sys, net, prof, gain = random_instance(rng, noisy=case % 2 == 0)
        plant = simulate_plant(sys, rng.normal(size=sys.n), horizon, int(rng.integers(2**32)))
        d = run_distributed(sys, net, prof, gain, plant).posteriors
        g = run_augmented(sys, net, prof, gain, plant).posteriors
        worst = max(worst, float(np.max(np.abs(d - g))))
    return SuiteResult("dual-path equivalence", worst <= tol, cases, worst, tol)


SUITES = {
    "kron": kron_spectra,
    "roots": shift_roots,
    "delay": delayed_radius,
    "stochastic": stochastic_augmented,
    "dual": dual_path,
}


def run_all(cases: int = 50, seed: int = 0) -> list[SuiteResult]:
    return [suite(cases=cases, seed=seed) for suite in SUITES.values()]
