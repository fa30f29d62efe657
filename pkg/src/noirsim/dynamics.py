"""Stochastic per-step flow sampling and the interior density update.

The interior densities evolve as x[k+1] = A[k] x[k] + B s[k], where A[k] is
assembled each step from freshly sampled outflow probabilities and turn
fractions, and B maps boundary inflows/outflows onto the interior state.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import chain

import numpy as np

from .graph import NoirGraph, validate_structure


@dataclass(frozen=True)
class TrafficState:
    """Interior densities (vehicles per road element) at a discrete step."""

    densities: np.ndarray
    step: int = 0

    def __post_init__(self) -> None:
        x = np.array(self.densities, dtype=float, copy=True).reshape(-1)
        object.__setattr__(self, "densities", x)


@dataclass(frozen=True)
class OutflowProbabilities:
    """Per-interior-road fraction of density leaving during one step."""

    p: np.ndarray


@dataclass(frozen=True)
class TendencyFractions:
    """How each node's outflow splits across its out-neighbors.

    ``per_edge[(j, t)]`` is the fraction of j's outflow routed along edge
    (j, t); the fractions of each non-outlet node sum to 1. ``matrix`` holds
    the interior-to-interior block in state order: ``matrix[i, j]`` is the
    fraction of interior node j's outflow that enters interior node i.
    """

    per_edge: dict[tuple[int, int], float]
    matrix: np.ndarray


def sample_matrices(
    rng: np.random.Generator,
    graph: NoirGraph,
    state: TrafficState,
    p_max: float = 0.9,
) -> tuple[OutflowProbabilities, TendencyFractions]:
    """Draw one step's outflow probabilities and turn fractions.

    Outflow probabilities are uniform on [0, p_max] and forced to exactly 0
    on roads with zero density. Turn fractions are uniform on the simplex
    over each non-outlet node's out-neighbors (flat Dirichlet). Given the
    same generator state the result is bit-identical.
    """
    if not 0.0 < p_max < 1.0:
        raise ValueError(f"p_max must lie strictly between 0 and 1, got {p_max}")
    n_i = graph.n_interior
    x = state.densities
    if x.shape != (n_i,):
        raise ValueError(f"state has {x.shape[0]} entries, expected {n_i}")

    p = rng.uniform(0.0, p_max, size=n_i)
    p[x == 0.0] = 0.0

    nb = graph.n_boundary
    per_edge: dict[tuple[int, int], float] = {}
    matrix = np.zeros((n_i, n_i))
    for j in chain(graph.inlet_ids, graph.interior_ids):
        outs = sorted(graph.out_neighbors(j))
        if not outs:
            continue
        if len(outs) == 1:
            parts = np.array([1.0])
        else:
            parts = rng.dirichlet(np.ones(len(outs)))
        for t, frac in zip(outs, parts):
            per_edge[(j, t)] = float(frac)
            if j > nb and t > nb:
                matrix[t - nb - 1, j - nb - 1] = frac

    return OutflowProbabilities(p=p), TendencyFractions(per_edge=per_edge, matrix=matrix)


def assemble_state_matrix(
    probs: OutflowProbabilities, fractions: TendencyFractions
) -> np.ndarray:
    """State matrix of the density update: identity minus outflow plus routed inflow.

    Entry (i, j) for i != j is ``matrix[i, j] * p[j]``; the diagonal is
    ``1 - p[i]`` plus any self-routing. All entries are nonnegative by
    construction, exactly (no rounding slack), whenever p is in [0, 1].
    """
    p = np.asarray(probs.p, dtype=float)
    q = np.asarray(fractions.matrix, dtype=float)
    n = p.size
    if q.shape != (n, n):
        raise ValueError(f"fraction matrix shape {q.shape} does not match {n} roads")
    a = q * p[np.newaxis, :]
    idx = np.arange(n)
    a[idx, idx] += 1.0 - p
    return a


def assemble_input_matrix(graph: NoirGraph) -> np.ndarray:
    """Constant map from boundary flows to interior density changes.

    Column j (a boundary node) has +1 in row i when inlet j feeds interior
    node i, and -1 when interior node i feeds outlet j; all other entries
    are zero.
    """
    n_i = graph.n_interior
    nb = graph.n_boundary
    b = np.zeros((n_i, nb))
    for i in graph.interior_ids:
        r = graph.state_index(i)
        for j in graph.in_neighbors(i):
            if j <= graph.n_inlets:
                b[r, j - 1] = 1.0
        for j in graph.out_neighbors(i):
            if graph.n_inlets < j <= nb:
                b[r, j - 1] = -1.0
    return b


def step(state: TrafficState, a: np.ndarray, b: np.ndarray, s: np.ndarray) -> TrafficState:
    """Advance the density state one step: x' = a x + b s.

    No clamping is applied; keeping densities inside their bounds is the
    controller's job, and any violation should stay visible.
    """
    x = state.densities
    s = np.asarray(s, dtype=float).reshape(-1)
    if a.shape != (x.size, x.size):
        raise ValueError(f"state matrix shape {a.shape} does not match state size {x.size}")
    if b.shape != (x.size, s.size):
        raise ValueError(f"input matrix shape {b.shape} does not match ({x.size}, {s.size})")
    return TrafficState(densities=a @ x + b @ s, step=state.step + 1)


def interior_flows(
    state: TrafficState, probs: OutflowProbabilities, fractions: TendencyFractions
) -> tuple[np.ndarray, np.ndarray]:
    """Per-road network inflow and outflow for the current step.

    Outflow is z = p * x; inflow is the routed share y = matrix @ z. Both
    cover interior bookkeeping only; boundary flows live in the input term.
    """
    x = state.densities
    p = np.asarray(probs.p, dtype=float)
    if p.shape != x.shape:
        raise ValueError("probability vector does not match state size")
    z = p * x
    y = fractions.matrix @ z
    return y, z


def spectral_radius_estimate(a: np.ndarray, iters: int = 300) -> float:
    """Power-iteration estimate of the spectral radius of a nonnegative matrix.

    Runs the iteration from a positive start vector and returns the
    geometric mean of the per-step l1 growth ratios over the second half of
    the run, which is robust to the oscillations of periodic structures.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 0:
        return 0.0
    v = np.full(n, 1.0 / n)
    ratios = []
    for _ in range(iters):
        w = np.abs(a @ v)
        total = w.sum()
        if total <= 1e-300:
            return 0.0
        ratios.append(total)
        v = w / total
    tail = ratios[len(ratios) // 2 :]
    return float(np.exp(np.mean(np.log(tail))))


@dataclass(frozen=True)
class StateMatrixReport:
    """Structural properties of an assembled state matrix.

    Column sums follow a trichotomy: exactly 1 for interior nodes with no
    outlet out-neighbor, inside (0, 1) for outlet-adjacent nodes with a
    positive outflow probability (equal to 1 only when that probability is
    zero), and all entries are nonnegative. When every interior node can
    reach an outlet the spectral radius is strictly below 1.
    """

    entries_nonnegative: bool
    min_entry: float
    column_sums: np.ndarray
    column_sums_ok: bool
    column_sum_offenders: tuple[int, ...]
    spectral_radius: float | None
    spectral_ok: bool | None

    @property
    def all_passed(self) -> bool:
        if not (self.entries_nonnegative and self.column_sums_ok):
            return False
        return self.spectral_ok is not False


def state_matrix_report(
    a: np.ndarray, graph: NoirGraph, tol: float = 1e-12
) -> StateMatrixReport:
    """Verify nonnegativity, the column-sum trichotomy, and contraction of ``a``.

    The spectral-radius check is only performed (and only meaningful) when
    every interior node has a path to an outlet; otherwise those fields are
    None.
    """
    a = np.asarray(a, dtype=float)
    n_i = graph.n_interior
    if a.shape != (n_i, n_i):
        raise ValueError(f"matrix shape {a.shape} does not match {n_i} interior roads")

    min_entry = float(a.min()) if n_i else 0.0
    entries_ok = min_entry >= -tol

    col = a.sum(axis=0)
    offenders = []
    for idx in range(n_i):
        node = graph.interior_id(idx)
        outlet_adjacent = any(
            graph.n_inlets < j <= graph.n_boundary for j in graph.out_neighbors(node)
        )
        if outlet_adjacent:
            ok = tol < col[idx] <= 1.0 + tol
        else:
            ok = abs(col[idx] - 1.0) <= tol
        if not ok:
            offenders.append(idx)

    if validate_structure(graph).interior_reaches_outlet.passed:
        rho = spectral_radius_estimate(a)
        spectral_ok = rho < 1.0
    else:
        rho = None
        spectral_ok = None

    return StateMatrixReport(
        entries_nonnegative=entries_ok,
        min_entry=min_entry,
        column_sums=col,
        column_sums_ok=not offenders,
        column_sum_offenders=tuple(offenders),
        spectral_radius=rho,
        spectral_ok=spectral_ok,
    )


def bibo_bound(z_max: float, n_interior: int, r: float) -> float:
    """Bound on the squared density norm under inputs bounded by ``z_max``.

    For a contraction factor r < 1 the squared l2 norm of the state stays
    below z_max**2 * n_interior / (1 - r) for all time.
    """
    if z_max < 0:
        raise ValueError(f"z_max must be nonnegative, got {z_max}")
    if n_interior < 0:
        raise ValueError(f"n_interior must be nonnegative, got {n_interior}")
    if not 0.0 <= r < 1.0:
        raise ValueError(f"contraction factor must lie in [0, 1), got {r}")
    return z_max**2 * n_interior / (1.0 - r)
