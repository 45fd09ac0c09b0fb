"""Hierarchical sparse-grid interpolation on axis-aligned hypercubes.

Nodes are indexed by a level vector l and a position vector j; dimension
k at level 0 contributes the two interval endpoints (j in {0, 1}) and at
level l >= 1 the odd positions j * 2^-l.  The index set of order p keeps
all nodes with sum(l) <= p.  A function is represented by hierarchical
surpluses: the coefficient of node (l, j) is the node value minus half
the values at the node's two same-level neighbours, applied dimension by
dimension.  Interpolation uses the tensor hat basis scaled to the cube.

Degenerate cube dimensions (zero edge length) are frozen: they carry a
single level-0 node with basis factor identically 1, which is what a
grid built from a single start point collapses to.

The heavy lifting (node layout, the neighbour stencils of the
dimension-by-dimension surplus transform) depends only on the order and
on which dimensions are collapsed, so it is precomputed once per such
signature and shared across interpolants.
"""

import json
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

CLAMP_REL = 1e-9


class OutsideCubeError(ValueError):
    """Query point beyond the cube and the clamping tolerance."""


class LevelIndex(NamedTuple):
    levels: tuple[int, ...]
    positions: tuple[int, ...]


@dataclass(frozen=True)
class Hypercube:
    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self):
        lows = np.atleast_1d(np.asarray(self.lows, dtype=float))
        highs = np.atleast_1d(np.asarray(self.highs, dtype=float))
        if lows.shape != highs.shape or lows.ndim != 1:
            raise ValueError("lows and highs must be 1-d arrays of equal length")
        if np.any(highs < lows):
            raise ValueError("cube must satisfy lows <= highs")
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)

    @property
    def dim(self) -> int:
        return len(self.lows)

    @property
    def edges(self) -> np.ndarray:
        return self.highs - self.lows

    @property
    def active(self) -> np.ndarray:
        return self.edges > 0.0


def minimal_hypercube(points: np.ndarray) -> Hypercube:
    """Smallest axis-aligned box containing the point set."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("cannot build a hypercube from an empty point set")
    return Hypercube(lows=pts.min(axis=0), highs=pts.max(axis=0))


def count_positive_nodes(p: int, d: int) -> int:
    """Nodes whose level vector is strictly positive with level sum <= p."""
    if p < d:
        return 0
    return sum(math.comb(k + d - 1, d - 1) * 2**k for k in range(p - d + 1))


def count_nodes(p: int, d: int) -> int:
    """Total node count of the order-p set in dimension d (closed form)."""
    if p < 0:
        raise ValueError("order must be non-negative")
    if d < 1:
        raise ValueError("dimension must be positive")
    total = 2**d
    for n0 in range(max(d - p, 0), d):
        total += math.comb(d, n0) * 2**n0 * count_positive_nodes(p, d - n0)
    return total


def _unit_coords(level: int, active: bool) -> np.ndarray:
    if not active:
        return np.array([0.0])
    if level == 0:
        return np.array([0.0, 1.0])
    return (2.0 * np.arange(2 ** (level - 1)) + 1.0) / 2.0**level


def _positions_for(level: int, active: bool) -> np.ndarray:
    if not active:
        return np.array([0], dtype=int)
    if level == 0:
        return np.array([0, 1], dtype=int)
    return 2 * np.arange(2 ** (level - 1), dtype=int) + 1


def _canonical_even(L: int, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce even positions e at level L to their canonical (level, position)."""
    lc = np.zeros_like(e)
    jc = np.zeros_like(e)
    right = e == (1 << L)
    jc[right] = 1
    interior = (e != 0) & ~right
    ei = e[interior]
    trailing = np.log2(ei & -ei).astype(int)
    lc[interior] = L - trailing
    jc[interior] = ei >> trailing
    return lc, jc


class _Structure:
    """Order/collapse-signature specific layout shared by interpolants."""

    def __init__(self, p: int, active: tuple[bool, ...]):
        self.p = p
        self.active = active
        d = len(active)
        self.dim = d
        self.combos = self._level_combos(p, active)
        self.combo_index = {c: i for i, c in enumerate(self.combos)}
        self.dim_sizes = [
            tuple(len(_positions_for(l, active[k])) for k, l in enumerate(combo))
            for combo in self.combos
        ]
        self.sizes = [int(np.prod(s)) for s in self.dim_sizes]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.total_nodes = int(self.offsets[-1])
        self.unit_nodes = [self._mesh(ci) for ci in range(len(self.combos))]
        self.plan = {k: self._dim_plan(k) for k in range(d) if active[k]}

    @staticmethod
    def _level_combos(p: int, active: tuple[bool, ...]) -> list[tuple[int, ...]]:
        d = len(active)
        out: list[tuple[int, ...]] = []

        def rec(k: int, remaining: int, prefix: list[int]):
            if k == d:
                out.append(tuple(prefix))
                return
            top = remaining if active[k] else 0
            for l in range(top + 1):
                rec(k + 1, remaining - l, prefix + [l])

        rec(0, p, [])
        out.sort(key=lambda c: (sum(c), c))
        return out

    def _mesh(self, combo_id: int) -> np.ndarray:
        combo = self.combos[combo_id]
        axes = [_unit_coords(l, self.active[k]) for k, l in enumerate(combo)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def _dim_plan(self, k: int):
        """Surplus-transform stencil for dimension k.

        For every combo with l_k >= 1, each node subtracts half the value
        at its two neighbours at spacing 2^-l_k; neighbours sit at
        coarser levels in dimension k, so targets are processed in
        decreasing l_k and always read not-yet-transformed values.
        """
        order = sorted(
            (ci for ci, c in enumerate(self.combos) if c[k] >= 1),
            key=lambda ci: -self.combos[ci][k],
        )
        plan = []
        for ci in order:
            L = self.combos[ci][k]
            sizes = self.dim_sizes[ci]
            idx = np.indices(sizes).reshape(self.dim, -1)
            j = 2 * idx[k] + 1
            groups = []
            for offset in (-1, 1):
                lc, jc = _canonical_even(L, j + offset)
                for lval in np.unique(lc):
                    mask = lc == lval
                    src_levels = list(self.combos[ci])
                    src_levels[k] = int(lval)
                    src_id = self.combo_index[tuple(src_levels)]
                    src_idx = idx[:, mask].copy()
                    src_idx[k] = jc[mask] if lval == 0 else (jc[mask] - 1) // 2
                    sflat = np.ravel_multi_index(tuple(src_idx), self.dim_sizes[src_id])
                    groups.append((src_id, np.nonzero(mask)[0], sflat))
            plan.append((ci, groups))
        return plan

    def level_indices(self) -> list[LevelIndex]:
        out = []
        for ci, combo in enumerate(self.combos):
            pos_axes = [_positions_for(l, self.active[k]) for k, l in enumerate(combo)]
            grids = np.meshgrid(*pos_axes, indexing="ij")
            flat = np.stack([g.ravel() for g in grids], axis=-1)
            for row in flat:
                out.append(LevelIndex(levels=combo, positions=tuple(int(v) for v in row)))
        return out

    def scaled_nodes(self, cube: Hypercube) -> np.ndarray:
        return np.concatenate(
            [cube.lows + u * cube.edges for u in self.unit_nodes], axis=0
        )

    def hierarchize_values(self, node_values: np.ndarray) -> list[np.ndarray]:
        values = [
            node_values[self.offsets[ci]: self.offsets[ci + 1]].astype(float).copy()
            for ci in range(len(self.combos))
        ]
        for k in self.plan:
            for ci, groups in self.plan[k]:
                tgt = values[ci]
                for src_id, tpos, sflat in groups:
                    tgt[tpos] -= 0.5 * values[src_id][sflat]
        return values


_STRUCTURE_CACHE: dict[tuple[int, tuple[bool, ...]], _Structure] = {}


def _structure_for(p: int, active: tuple[bool, ...]) -> _Structure:
    key = (p, active)
    if key not in _STRUCTURE_CACHE:
        _STRUCTURE_CACHE[key] = _Structure(p, active)
    return _STRUCTURE_CACHE[key]


def grid_nodes(cube: Hypercube, p: int) -> np.ndarray:
    """Coordinates of every order-p node of the cube, in canonical order."""
    st = _structure_for(p, tuple(bool(a) for a in cube.active))
    return st.scaled_nodes(cube)


def enumerate_nodes(cube: Hypercube, p: int) -> list[tuple[LevelIndex, np.ndarray]]:
    """All (level index, coordinates) pairs, ordered by (sum(l), l, j)."""
    if p < 0:
        raise ValueError("order must be non-negative")
    st = _structure_for(p, tuple(bool(a) for a in cube.active))
    return list(zip(st.level_indices(), st.scaled_nodes(cube)))


class SparseInterpolant:
    """Interpolant over a cube: hierarchical surpluses plus the hat basis."""

    def __init__(self, cube: Hypercube, p: int, structure: _Structure, coeffs: list[np.ndarray]):
        self.cube = cube
        self.p = p
        self._structure = structure
        self._coeffs = coeffs

    @property
    def coefficient_count(self) -> int:
        return self._structure.total_nodes

    def coefficients(self) -> dict[LevelIndex, float]:
        out = {}
        st = self._structure
        flat = np.concatenate(self._coeffs)
        for li, value in zip(st.level_indices(), flat):
            out[li] = float(value)
        return out

    def _normalize(self, X: np.ndarray) -> np.ndarray:
        cube = self.cube
        edges = cube.edges
        scale = np.where(edges > 0, edges, np.maximum(1.0, np.abs(cube.lows)))
        tol = CLAMP_REL * scale
        overshoot = np.maximum(cube.lows - X, X - cube.highs)
        if np.any(overshoot > tol):
            worst = np.unravel_index(np.argmax(overshoot), overshoot.shape)
            raise OutsideCubeError(
                f"point {X[worst[0]]} outside cube [{cube.lows}, {cube.highs}] "
                f"by {overshoot[worst]:.3e} in dimension {worst[1]}"
            )
        Xc = np.clip(X, cube.lows, cube.highs)
        U = np.zeros_like(Xc)
        act = cube.active
        U[:, act] = (Xc[:, act] - cube.lows[act]) / edges[act]
        return U

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        return eval_joint([self], X)[0]

    def eval(self, x: np.ndarray) -> float:
        return float(self.eval_many(np.asarray(x, dtype=float)[None, :])[0])

    def to_json(self) -> str:
        payload = {
            "cube": {"lows": self.cube.lows.tolist(), "highs": self.cube.highs.tolist()},
            "order": self.p,
            "coefficients": [
                {"levels": list(li.levels), "positions": list(li.positions), "value": v}
                for li, v in self.coefficients().items()
            ],
        }
        return json.dumps(payload, indent=2)


def eval_joint(interps: list[SparseInterpolant], X: np.ndarray) -> np.ndarray:
    """Evaluate several interpolants sharing one grid at a point batch.

    The basis lookup (which hat is live per dimension and level) is the
    expensive part and depends only on the grid, so interpolants built
    over the same cube and order are evaluated in one pass.  Returns an
    array of shape (len(interps), len(X)).
    """
    first = interps[0]
    st = first._structure
    cube = first.cube
    for it in interps[1:]:
        if it._structure is not st or it.cube is not cube:
            raise ValueError("joint evaluation requires interpolants on one grid")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != cube.dim:
        raise ValueError("query dimension mismatch")
    U = first._normalize(X)
    n = X.shape[0]
    m = len(interps)
    # per dimension and level >= 1 a point sits in the support of exactly
    # one odd-position hat, located arithmetically
    idx_tab: dict[tuple[int, int], np.ndarray] = {}
    phi_tab: dict[tuple[int, int], np.ndarray] = {}
    for k in range(st.dim):
        if not st.active[k]:
            continue
        u = U[:, k]
        for L in range(1, first.p + 1):
            t = u * (1 << L)
            j = 2.0 * np.floor(0.5 * t) + 1.0
            np.clip(j, 1.0, float((1 << L) - 1), out=j)
            phi = np.maximum(0.0, 1.0 - np.abs(t - j))
            idx_tab[(k, L)] = ((j - 1.0) / 2.0).astype(np.intp)
            phi_tab[(k, L)] = phi
    out = np.zeros((m, n))
    for ci, combo in enumerate(st.combos):
        theta = np.stack([it._coeffs[ci] for it in interps])
        sizes = st.dim_sizes[ci]
        strides = np.ones(st.dim, dtype=np.intp)
        for k in range(st.dim - 2, -1, -1):
            strides[k] = strides[k + 1] * sizes[k + 1]
        # level-0 active dims contribute both endpoint hats
        branch_dims = [k for k in range(st.dim) if st.active[k] and combo[k] == 0]
        base_flat = np.zeros(n, dtype=np.intp)
        base_phi = np.ones(n)
        for k in range(st.dim):
            if not st.active[k] or combo[k] == 0:
                continue
            base_flat += idx_tab[(k, combo[k])] * strides[k]
            base_phi = base_phi * phi_tab[(k, combo[k])]
        for branch in range(1 << len(branch_dims)):
            flat = base_flat
            phi = base_phi
            for pos, k in enumerate(branch_dims):
                if (branch >> pos) & 1:
                    flat = flat + strides[k]
                    phi = phi * U[:, k]
                else:
                    phi = phi * (1.0 - U[:, k])
            out += theta[:, flat] * phi
    return out


def interpolant_from_node_values(cube: Hypercube, p: int, node_values: np.ndarray) -> SparseInterpolant:
    """Build an interpolant from values aligned with ``grid_nodes(cube, p)``."""
    st = _structure_for(p, tuple(bool(a) for a in cube.active))
    node_values = np.asarray(node_values, dtype=float)
    if node_values.shape != (st.total_nodes,):
        raise ValueError(
            f"expected {st.total_nodes} node values, got {node_values.shape}"
        )
    return SparseInterpolant(cube, p, st, st.hierarchize_values(node_values))


def hierarchize(
    cube: Hypercube, p: int, source: Callable, vectorized: bool = False
) -> SparseInterpolant:
    """Interpolate ``source`` on the order-p grid of the cube.

    ``source`` maps a d-vector to a scalar; pass ``vectorized=True`` when
    it accepts an (n, d) batch and returns (n,) values.
    """
    nodes = grid_nodes(cube, p)
    if vectorized:
        values = np.asarray(source(nodes), dtype=float)
    else:
        values = np.array([float(source(pt)) for pt in nodes])
    return interpolant_from_node_values(cube, p, values)


def surplus_reference(cube: Hypercube, levels, positions, source: Callable) -> float:
    """Hierarchical coefficient by direct recursion over the last dimension.

    Reference implementation used to cross-check the sweep-based
    transform; evaluates the source up to 3^d times per coefficient.
    """
    lows, highs = cube.lows, cube.highs

    def coord(k: int, level: int, j: int) -> float:
        if highs[k] == lows[k]:
            return float(lows[k])
        return float(lows[k] + (highs[k] - lows[k]) * j / (1 << level))

    def rec(k: int, tail: tuple[float, ...]) -> float:
        if k < 0:
            return float(source(np.array(tail)))
        L, j = levels[k], positions[k]
        centre = rec(k - 1, (coord(k, L, j),) + tail)
        if L == 0 or highs[k] == lows[k]:
            return centre
        left = rec(k - 1, (coord(k, L, j - 1),) + tail)
        right = rec(k - 1, (coord(k, L, j + 1),) + tail)
        return centre - 0.5 * left - 0.5 * right

    return rec(cube.dim - 1, ())
