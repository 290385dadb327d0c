"""Plant, sensor network, consensus weights and link delays.

Indexing is 0-based throughout. A link ``(j, i)`` means sensor ``j`` sends
to sensor ``i``; its weight is ``p[i, j]`` and its delay is ``tau[(i, j)]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy.sparse.csgraph import connected_components

from .linalg import TOL, as_matrix, as_square, spectral_radius


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LtiSystem:
    """``x_k = A x_{k-1} + nu_k``, ``y^i_k = C_i x_k + zeta^i_k``.

    ``c_rows`` holds one output row per sensor. Noise is isotropic with
    variances ``q_var`` (process) and ``r_var`` (measurement).
    """

    a: np.ndarray
    c_rows: np.ndarray
    q_var: float = 0.0
    r_var: float = 0.0
    blocks: tuple = ()

    def __post_init__(self):
        a = as_square(self.a, "a")
        c = as_matrix(self.c_rows, "c_rows")
        if c.shape[1] != a.shape[0]:
            raise ValueError(f"each output row needs length {a.shape[0]}, got {c.shape[1]}")
        if abs(np.linalg.det(a)) <= TOL.det:
            raise ValueError("dynamics matrix must be full rank (|det A| > 1e-10)")
        if self.q_var < 0 or self.r_var < 0:
            raise ValueError("noise variances must be nonnegative")
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "c_rows", _frozen(c))
        object.__setattr__(self, "q_var", float(self.q_var))
        object.__setattr__(self, "r_var", float(self.r_var))
        object.__setattr__(self, "blocks", tuple(tuple(int(s) for s in b) for b in self.blocks))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.c_rows.shape[0]

    @property
    def c(self) -> np.ndarray:
        return self.c_rows


@dataclass(frozen=True)
class SensorNetwork:
    """Directed sensor graph with its row-stochastic consensus weights.

    ``edges`` holds the off-diagonal links ``(j, i)``; self-loops are implied
    by a positive diagonal of ``p``. The constructor checks stochasticity and
    that the weight pattern matches the edge set, but allows ``p_ii = 0``
    so that non-self-damped networks can be represented and rejected later.
    """

    p: np.ndarray
    edges: frozenset = field(default=None)

    def __post_init__(self):
        p = as_square(self.p, "p")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("consensus weights must lie in [0, 1]")
        rows = p.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > TOL.stochastic):
            bad = int(np.argmax(np.abs(rows - 1.0)))
            raise ValueError(f"p must be row-stochastic; row {bad} sums to {rows[bad]!r}")
        pattern = {(j, i) for i, j in zip(*np.nonzero(p)) if i != j}
        pattern = {(int(j), int(i)) for j, i in pattern}
        if self.edges is None:
            edges = frozenset(pattern)
        else:
            edges = frozenset((int(j), int(i)) for j, i in self.edges if j != i)
            if edges != pattern:
                raise ValueError("edge set does not match the off-diagonal support of p")
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "edges", edges)

    @property
    def n_sensors(self) -> int:
        return self.p.shape[0]

    @property
    def self_damped(self) -> bool:
        return bool(np.all(np.diag(self.p) > 0))

    @property
    def strongly_connected(self) -> bool:
        return is_strongly_connected(self)

    def in_neighbors(self, i: int) -> list[int]:
        return sorted(j for j, k in self.edges if k == i)

    def out_neighbors(self, j: int) -> list[int]:
        return sorted(i for k, i in self.edges if k == j)


@dataclass(frozen=True)
class DelayProfile:
    """Fixed integer delay per link, keyed ``(i, j)`` for link ``j -> i``.

    Self delays ``(i, i)`` default to zero. They may be set to ``tau_bar``
    only for the fully homogeneous profile, where every entry of the weight
    matrix (diagonal included) sits in the oldest slot.
    """

    tau: MappingProxyType
    tau_bar: int

    def __post_init__(self):
        tau = {(int(i), int(j)): int(d) for (i, j), d in dict(self.tau).items()}
        tau_bar = int(self.tau_bar)
        if tau_bar < 0:
            raise ValueError("tau_bar must be nonnegative")
        for (i, j), d in tau.items():
            if not 0 <= d <= tau_bar:
                raise ValueError(f"delay {d} on link ({j} -> {i}) outside [0, {tau_bar}]")
        object.__setattr__(self, "tau", MappingProxyType(tau))
        object.__setattr__(self, "tau_bar", tau_bar)

    def __reduce__(self):
        # mapping proxies do not pickle; rebuild from a plain dict
        return (DelayProfile, (dict(self.tau), self.tau_bar))

    def delay(self, i: int, j: int) -> int:
        if i == j:
            return self.tau.get((i, i), 0)
        return self.tau[(i, j)]

    def matrix(self, size: int) -> np.ndarray:
        """Dense integer delay matrix; ``-1`` marks pairs with no recorded delay."""
        out = np.full((size, size), -1, dtype=int)
        np.fill_diagonal(out, 0)
        for (i, j), d in self.tau.items():
            out[i, j] = d
        return out

    @property
    def max_delay(self) -> int:
        return max(self.tau.values(), default=0)


# ---------------------------------------------------------------------------
# generators


def _partition(n: int, blocks: int, rng) -> list[int]:
    sizes = [1] * blocks
    for _ in range(n - blocks):
        sizes[rng.integers(blocks)] += 1
    return sizes


def _irreducible_block(m: int, rng) -> np.ndarray:
    # random cyclic order guarantees strong connectivity of the block digraph
    order = rng.permutation(m)
    pattern = rng.random((m, m)) < 0.5
    for a, b in zip(order, np.roll(order, -1)):
        pattern[a, b] = True
    np.fill_diagonal(pattern, True)
    vals = rng.uniform(-1.0, 1.0, (m, m))
    diag = rng.uniform(0.1, 1.0, m) * rng.choice([-1.0, 1.0], m)
    np.fill_diagonal(vals, diag)
    return vals * pattern


def generate_system(n: int, blocks: int, target_rho: float, seed: int,
                    n_sensors: int | None = None, q_var: float = 0.0,
                    r_var: float = 0.0) -> LtiSystem:
    """Random self-damped, block-diagonal plant with one output per block.

    Sensor ``b < blocks`` measures the first state of block ``b``; any extra
    sensors measure a random state of a random block.
    """
    if blocks < 1 or blocks > n:
        raise ValueError(f"cannot split {n} states into {blocks} irreducible blocks")
    if target_rho <= 0:
        raise ValueError("target_rho must be positive")
    n_sensors = blocks if n_sensors is None else int(n_sensors)
    if n_sensors < blocks:
        raise ValueError("need at least one sensor per irreducible block")
    rng = np.random.default_rng(seed)

    for _ in range(100):
        sizes = _partition(n, blocks, rng)
        starts = np.cumsum([0] + sizes[:-1])
        a = np.zeros((n, n))
        for s, m in zip(starts, sizes):
            a[s:s + m, s:s + m] = _irreducible_block(m, rng)
        rho = spectral_radius(a)
        if rho < 1e-6:
            continue
        a *= target_rho / rho
        if abs(np.linalg.det(a)) > TOL.det:
            break
    else:  # pragma: no cover - measure-zero event repeated 100 times
        raise RuntimeError("could not draw a full-rank system")

    groups = [tuple(range(s, s + m)) for s, m in zip(starts, sizes)]
    c = np.zeros((n_sensors, n))
    for b, g in enumerate(groups):
        c[b, g[0]] = 1.0
    for extra in range(blocks, n_sensors):
        g = groups[rng.integers(blocks)]
        c[extra, g[rng.integers(len(g))]] = 1.0
    return LtiSystem(a, c, q_var, r_var, blocks=tuple(groups))


def generate_network(n_sensors: int, topology: str = "cycle", seed: int = 0,
                     chords: int = 0) -> SensorNetwork:
    """Strongly connected, self-damped network with random row-stochastic weights.

    ``topology`` is ``"cycle"`` (0 -> 1 -> ... -> N-1 -> 0) or
    ``"cycle_plus_chords"`` which adds ``chords`` random extra directed links.
    Raw weights are uniform on [0.1, 1] before row normalization.
    """
    if n_sensors < 1:
        raise ValueError("need at least one sensor")
    rng = np.random.default_rng(seed)
    edges = set()
    if n_sensors > 1:
        edges = {(j, (j + 1) % n_sensors) for j in range(n_sensors)}
    if topology == "cycle_plus_chords":
        free = [(j, i) for j in range(n_sensors) for i in range(n_sensors)
                if i != j and (j, i) not in edges]
        take = min(int(chords), len(free))
        for idx in rng.choice(len(free), size=take, replace=False) if take else []:
            edges.add(free[idx])
    elif topology != "cycle":
        raise ValueError(f"unknown topology {topology!r}")

    w = np.zeros((n_sensors, n_sensors))
    np.fill_diagonal(w, rng.uniform(0.1, 1.0, n_sensors))
    for j, i in sorted(edges):
        w[i, j] = rng.uniform(0.1, 1.0)
    p = w / w.sum(axis=1, keepdims=True)
    # renormalize once more so rows sum to 1 within a couple of ulps
    p[np.arange(n_sensors), np.arange(n_sensors)] += 1.0 - p.sum(axis=1)
    return SensorNetwork(p, frozenset(edges))


def is_strongly_connected(net: SensorNetwork) -> bool:
    adj = (np.asarray(net.p) > 0).astype(int)
    count, _ = connected_components(adj, directed=True, connection="strong")
    return count == 1


DELAY_MODES = ("homogeneous", "heterogeneous", "homogeneous_full")


def assign_delays(net: SensorNetwork, mode: str, tau_bar: int, seed: int = 0) -> DelayProfile:
    """Fixed delays on every link of ``net``.

    ``homogeneous`` puts ``tau_bar`` on every non-self link, ``heterogeneous``
    draws each link's delay uniformly from ``{0, ..., tau_bar}``; both keep
    self delays at zero. ``homogeneous_full`` also delays the self-loops by
    ``tau_bar`` (the setting in which the augmented spectrum is an exact
    ``tau_bar + 1``-th root).
    """
    if tau_bar < 0:
        raise ValueError("tau_bar must be nonnegative")
    rng = np.random.default_rng(seed)
    tau = {}
    for j, i in sorted(net.edges):
        if mode in ("homogeneous", "homogeneous_full"):
            tau[(i, j)] = tau_bar
        elif mode == "heterogeneous":
            tau[(i, j)] = int(rng.integers(0, tau_bar + 1))
        else:
            raise ValueError(f"unknown delay mode {mode!r}; expected one of {DELAY_MODES}")
    if mode == "homogeneous_full":
        for i in range(net.n_sensors):
            tau[(i, i)] = tau_bar
    return DelayProfile(tau, tau_bar)


def full_delay_profile(size: int, tau_bar: int) -> DelayProfile:
    """Every entry of a ``size x size`` matrix, diagonal included, delayed by ``tau_bar``."""
    return DelayProfile({(i, j): tau_bar for i in range(size) for j in range(size)}, tau_bar)


# ---------------------------------------------------------------------------
# serialization


def _fmt_matrix(m) -> list:
    return np.asarray(m, dtype=float).tolist()


def instance_to_dict(sys: LtiSystem | None = None, net: SensorNetwork | None = None,
                     delays: DelayProfile | None = None) -> dict:
    out = {}
    if sys is not None:
        out.update(n=sys.n, a=_fmt_matrix(sys.a), c_rows=_fmt_matrix(sys.c_rows),
                   q_var=sys.q_var, r_var=sys.r_var)
        if sys.blocks:
            out["blocks"] = [list(b) for b in sys.blocks]
    if net is not None:
        out.update(edges=sorted([j, i] for j, i in net.edges), p=_fmt_matrix(net.p))
    if delays is not None:
        out.update(tau=[[i, j, d] for (i, j), d in sorted(delays.tau.items())],
                   tau_bar=delays.tau_bar)
    return out


def instance_from_dict(doc: dict):
    """Inverse of :func:`instance_to_dict`; absent parts come back as ``None``."""
    sys = net = delays = None
    if "a" in doc:
        a = np.asarray(doc["a"], dtype=float)
        if "n" in doc and a.shape != (doc["n"], doc["n"]):
            raise ValueError(f"'a' has shape {a.shape}, expected n={doc['n']}")
        sys = LtiSystem(a, np.asarray(doc["c_rows"], dtype=float),
                        doc.get("q_var", 0.0), doc.get("r_var", 0.0),
                        blocks=tuple(tuple(b) for b in doc.get("blocks", ())))
    if "p" in doc:
        net = SensorNetwork(np.asarray(doc["p"], dtype=float),
                            frozenset(tuple(e) for e in doc.get("edges", [])) if "edges" in doc else None)
    if "tau" in doc:
        delays = DelayProfile({(i, j): d for i, j, d in doc["tau"]}, doc["tau_bar"])
    return sys, net, delays


def _encode(obj, depth: int) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not np.isfinite(obj):
            raise ValueError("cannot serialize non-finite number")
        return format(float(obj), ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, depth + 1) for v in obj) + "]"
        pad = "  " * (depth + 1)
        inner = (",\n" + pad).join(_encode(v, depth + 1) for v in obj)
        return "[\n" + pad + inner + "\n" + "  " * depth + "]"
    if isinstance(obj, dict):
        pad = "  " * (depth + 1)
        items = [f"{json.dumps(str(k))}: {_encode(obj[k], depth + 1)}" for k in sorted(obj)]
        return "{\n" + pad + (",\n" + pad).join(items) + "\n" + "  " * depth + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc: dict) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(doc, 0)


def save_instance(path, sys=None, net=None, delays=None) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(instance_to_dict(sys, net, delays)) + "\n")


def load_instance(path):
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
