"""Plant simulation and the two execution paths of the delayed estimator.

``run_distributed`` is the per-sensor protocol: every round each sensor
fuses the time-stamped posteriors it has received (propagated forward by
``A^(tau+1)``), then corrects with its own scalar measurement, then sends
its posterior to its out-neighbors. ``run_augmented`` runs the same filter
as one linear recursion on the stacked history. All estimates, and every
history slot before time 0, start at zero, which makes the two paths
identical from ``k = 0``.
"""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np

from .augment import build_augmented_pa, split_by_delay
from .gain import GainMatrix
from .linalg import matrix_power
from .model import DelayProfile, LtiSystem, SensorNetwork
from .observability import dbar_c, output_matrix


def _readonly(arr):
    arr = np.asarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PlantTrace:
    """States ``x_0..x_T`` with the exact noise draws that produced them.

    ``process_noise[k]`` is ``nu_k`` (row 0 unused, zero) and
    ``measurement_noise[k]`` is ``zeta_k``.
    """

    states: np.ndarray
    outputs: np.ndarray
    process_noise: np.ndarray
    measurement_noise: np.ndarray
    noise_seed: int

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1


def simulate_plant(sys: LtiSystem, x0, horizon: int, seed: int) -> PlantTrace:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (sys.n,):
        raise ValueError(f"x0 must have length {sys.n}")
    nu_seq, zeta_seq = np.random.SeedSequence(seed).spawn(2)
    nu = np.zeros((horizon + 1, sys.n))
    nu[1:] = np.sqrt(sys.q_var) * np.random.default_rng(nu_seq).standard_normal((horizon, sys.n))
    zeta = np.sqrt(sys.r_var) * np.random.default_rng(zeta_seq).standard_normal((horizon + 1, sys.n_sensors))

    x = np.zeros((horizon + 1, sys.n))
    x[0] = x0
    for k in range(1, horizon + 1):
        x[k] = sys.a @ x[k - 1] + nu[k]
    y = x @ sys.c_rows.T + zeta
    return PlantTrace(_readonly(x), _readonly(y), _readonly(nu), _readonly(zeta), int(seed))


@dataclass(frozen=True)
class Message:
    sender: int
    send_time: int
    receive_time: int
    payload: np.ndarray


@dataclass
class SensorState:
    """Posterior ring buffer (newest first) and received messages of one sensor."""

    history: deque
    mailbox: dict = field(default_factory=lambda: defaultdict(dict))

    @classmethod
    def empty(cls, n: int, tau_bar: int) -> "SensorState":
        return cls(deque([np.zeros(n) for _ in range(tau_bar + 1)], maxlen=tau_bar + 1))

    def push(self, posterior) -> None:
        self.history.appendleft(np.asarray(posterior, dtype=float))

    def receive(self, msg: Message) -> None:
        self.mailbox[msg.sender][msg.send_time] = msg


@dataclass(frozen=True)
class EstimateTrace:
    """Per-sensor estimates, indexed ``[k, sensor, state]``."""

    posteriors: np.ndarray
    priors: np.ndarray
    errors: np.ndarray

    @classmethod
    def build(cls, posteriors, priors, plant: PlantTrace) -> "EstimateTrace":
        errors = plant.states[:, None, :] - posteriors
        return cls(_readonly(posteriors), _readonly(priors), _readonly(errors))


def _powers(a, tau_bar):
    return [matrix_power(a, r + 1) for r in range(tau_bar + 1)]


def step_prior(i: int, k: int, net: SensorNetwork, delays: DelayProfile, sys: LtiSystem,
               states, powers=None) -> np.ndarray:
    """Consensus on delayed posteriors for sensor ``i`` at time ``k``.

    The own term uses the sensor's history; each in-neighbor ``j`` contributes
    the posterior it sent at ``k - 1 - tau_ij`` (delivered at ``k - 1``),
    propagated by ``A^(tau_ij + 1)``. A message missing during warm-up
    contributes the zero vector.
    """
    if powers is None:
        powers = _powers(sys.a, delays.tau_bar)
    own = states[i]
    t_ii = delays.delay(i, i)
    prior = net.p[i, i] * (powers[t_ii] @ own.history[t_ii])
    for j in net.in_neighbors(i):
        t_ij = delays.delay(i, j)
        sent = k - 1 - t_ij
        msg = own.mailbox[j].pop(sent, None)
        if msg is None:
            if sent >= 0:
                raise RuntimeError(f"message from sensor {j} sent at {sent} never reached sensor {i}")
            continue
        if msg.receive_time > k - 1:
            raise RuntimeError(f"message from sensor {j} used before its arrival time")
        prior = prior + net.p[i, j] * (powers[t_ij] @ msg.payload)
    return prior


def step_posterior(i: int, k: int, prior, y_ik: float, sys: LtiSystem, gain: GainMatrix) -> np.ndarray:
    c_i = sys.c_rows[i]
    return prior + gain.blocks[i] @ c_i * (y_ik - c_i @ prior)


def run_distributed(sys: LtiSystem, net: SensorNetwork, delays: DelayProfile, gain: GainMatrix,
                    plant: PlantTrace) -> EstimateTrace:
    """Synchronous rounds of the message-passing protocol."""
    n_sensors, n, horizon = net.n_sensors, sys.n, plant.horizon
    powers = _powers(sys.a, delays.tau_bar)
    states = [SensorState.empty(n, delays.tau_bar) for _ in range(n_sensors)]
    in_flight = defaultdict(list)
    post = np.zeros((horizon + 1, n_sensors, n))
    prior = np.zeros((horizon + 1, n_sensors, n))

    def broadcast(k):
        for j in range(n_sensors):
            payload = post[k, j].copy()
            payload.flags.writeable = False
            for i in net.out_neighbors(j):
                t = delays.delay(i, j)
                in_flight[k + t].append((i, Message(j, k, k + t, payload)))
        for i, msg in in_flight.pop(k, []):
            states[i].receive(msg)

    broadcast(0)
    for k in range(1, horizon + 1):
        for i in range(n_sensors):
            prior[k, i] = step_prior(i, k, net, delays, sys, states, powers)
        for i in range(n_sensors):
            post[k, i] = step_posterior(i, k, prior[k, i], plant.outputs[k, i], sys, gain)
            states[i].push(post[k, i])
        broadcast(k)
    return EstimateTrace.build(post, prior, plant)


def run_augmented(sys: LtiSystem, net: SensorNetwork, delays: DelayProfile, gain: GainMatrix,
                  plant: PlantTrace, return_history: bool = False):
    """Centralized recursion on the stacked posterior history.

    With ``return_history`` the full augmented posterior vectors are returned
    as a second value, shape ``(T+1, Nn(tau_bar+1))``.
    """
    n_sensors, n, horizon = net.n_sensors, sys.n, plant.horizon
    d = n_sensors * n
    pa_bar = build_augmented_pa(net.p, sys.a, delays).matrix
    dc = output_matrix(sys.c_rows)
    correction = gain.assembled @ dc.T
    z = np.zeros(d * (delays.tau_bar + 1))
    post = np.zeros((horizon + 1, n_sensors, n))
    prior = np.zeros((horizon + 1, n_sensors, n))
    history = [z.copy()] if return_history else None
    for k in range(1, horizon + 1):
        z_prior = pa_bar @ z
        z = z_prior.copy()
        z[:d] += correction @ (plant.outputs[k] - dc @ z_prior[:d])
        prior[k] = z_prior[:d].reshape(n_sensors, n)
        post[k] = z[:d].reshape(n_sensors, n)
        if return_history:
            history.append(z.copy())
    trace = EstimateTrace.build(post, prior, plant)
    if return_history:
        return trace, np.array(history)
    return trace


# ---------------------------------------------------------------------------
# error-dynamics oracle


PREHISTORY = ("zero", "backward")


def past_state(sys: LtiSystem, plant: PlantTrace, k: int, prehistory: str = "zero") -> np.ndarray:
    """``x_k``; for ``k < 0`` either zero or the noise-free back-propagation ``A^k x_0``."""
    if k >= 0:
        return plant.states[k]
    if prehistory == "zero":
        return np.zeros(sys.n)
    if prehistory == "backward":
        return np.linalg.solve(matrix_power(sys.a, -k), plant.states[0])
    raise ValueError(f"prehistory must be one of {PREHISTORY}")


def augmented_true_state(sys: LtiSystem, plant: PlantTrace, n_sensors: int, tau_bar: int,
                         k: int, prehistory: str = "zero") -> np.ndarray:
    """``(1_N kron x_k; 1_N kron x_{k-1}; ...; 1_N kron x_{k-tau_bar})``."""
    ones = np.ones(n_sensors)
    return np.concatenate([np.kron(ones, past_state(sys, plant, k - r, prehistory))
                           for r in range(tau_bar + 1)])


def augmented_noise(sys: LtiSystem, net: SensorNetwork, delays: DelayProfile, gain: GainMatrix,
                    plant: PlantTrace, prehistory: str = "zero") -> np.ndarray:
    """Forcing term of the augmented error recursion, one row per step (row 0 zero).

    Only the newest slot is nonzero: ``(I - K D) w_k - K D_C^T zeta_k``, where
    slice ``i`` of ``w_k`` is ``sum_r (P_r 1)_i (x_k - A^(r+1) x_{k-1-r})``.
    For ``k - 1 - r >= 0`` that difference is ``sum_{s<=r} A^s nu_{k-s}``. Before
    time 0 it depends on the prehistory convention: ``"backward"`` keeps the
    same noise sum (so the forcing is pure noise), ``"zero"`` gives ``x_k``.
    With no delays ``w_k = 1_N kron nu_k``.
    """
    if prehistory not in PREHISTORY:
        raise ValueError(f"prehistory must be one of {PREHISTORY}")
    n_sensors, n, horizon = net.n_sensors, sys.n, plant.horizon
    d = n_sensors * n
    tau_bar = delays.tau_bar
    weights = np.array([part.sum(axis=1) for part in split_by_delay(net.p, delays)])
    kd = gain.assembled @ dbar_c(sys.c_rows)
    kdt = gain.assembled @ output_matrix(sys.c_rows).T
    a_pows = [matrix_power(sys.a, s) for s in range(tau_bar + 1)]
    nu = plant.process_noise

    out = np.zeros((horizon + 1, d * (tau_bar + 1)))
    for k in range(1, horizon + 1):
        acc = np.zeros(n)
        diffs = []
        for r in range(tau_bar + 1):
            if k - r >= 1:
                acc = acc + a_pows[r] @ nu[k - r]
            if k - 1 - r < 0 and prehistory == "zero":
                diffs.append(plant.states[k])
            else:
                diffs.append(acc.copy())
        w = np.concatenate([sum(weights[r, i] * diffs[r] for r in range(tau_bar + 1))
                            for i in range(n_sensors)])
        out[k, :d] = w - kd @ w - kdt @ plant.measurement_noise[k]
    return out


def run_error_recursion(closed_loop, e0, noise_terms=None, horizon: int | None = None) -> np.ndarray:
    """Iterate ``e_k = M e_{k-1} + eta_k``; returns every ``e_k`` for ``k = 0..T``."""
    m = np.asarray(closed_loop, dtype=float)
    e = np.asarray(e0, dtype=float).ravel()
    if m.shape != (e.size, e.size):
        raise ValueError(f"closed loop {m.shape} does not match error length {e.size}")
    if horizon is None:
        if noise_terms is None:
            raise ValueError("give a horizon or a noise sequence")
        horizon = len(noise_terms) - 1
    out = np.zeros((horizon + 1, e.size))
    out[0] = e
    for k in range(1, horizon + 1):
        e = m @ e
        if noise_terms is not None:
            e = e + noise_terms[k]
        out[k] = e
    return out


def error_norms(errors) -> np.ndarray:
    return np.linalg.norm(np.asarray(errors).reshape(len(errors), -1), axis=1)
