"""Symmetric degree-3 cubature formulas on path space.

A formula is a finite family of weighted piecewise-linear paths on [0, 1]
whose iterated integrals reproduce the Brownian Stratonovich moments up
to the formula's order.  The standard degree-3 family in dimension r uses
the 2r straight lines from the origin to +/- sqrt(r) * e_k with equal
weights 1/(2r); the sqrt(r) endpoint magnitude is what makes the
second-degree moment sum(theta * endpoint_k^2) / 2 equal 1/2, and
``validate_moments`` checks rather than assumes it.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .multiindex import MultiIndex, degree, enumerate_degree_set

MAX_INTEGRAL_DEGREE = 6
MAX_MOMENT_DEGREE = 4
MOMENT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Path:
    """Piecewise-linear path stored as breakpoint lists.

    ``times`` is increasing with times[0] = 0; ``points`` has one row per
    breakpoint and starts at the origin.
    """

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]


@dataclass(frozen=True)
class CubatureFormula:
    weights: np.ndarray
    paths: list[Path]
    order: int
    dimension: int

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    def to_json(self) -> str:
        payload = {
            "order": self.order,
            "dimension": self.dimension,
            "weights": self.weights.tolist(),
            "paths": [
                {"times": p.times.tolist(), "points": p.points.tolist()}
                for p in self.paths
            ],
        }
        return json.dumps(payload, indent=2)


@dataclass
class MomentRow:
    beta: MultiIndex
    cubature_moment: float
    brownian_moment: float

    @property
    def defect(self) -> float:
        return self.cubature_moment - self.brownian_moment


@dataclass
class MomentReport:
    order: int
    dimension: int
    rows: list[MomentRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(
            abs(row.defect) < MOMENT_TOLERANCE
            for row in self.rows
            if degree(row.beta) <= self.order
        )

    @property
    def error_constant(self) -> float:
        """Sum of |defect| over words of degree order + 1."""
        return sum(abs(r.defect) for r in self.rows if degree(r.beta) == self.order + 1)

    def to_json(self) -> str:
        payload = {
            "order": self.order,
            "dimension": self.dimension,
            "passed": self.passed,
            "error_constant_next_degree": self.error_constant,
            "moments": [
                {
                    "word": list(r.beta),
                    "degree": degree(r.beta),
                    "cubature": r.cubature_moment,
                    "brownian": r.brownian_moment,
                    "defect": r.defect,
                }
                for r in self.rows
            ],
        }
        return json.dumps(payload, indent=2)


def make_order3(r: int) -> CubatureFormula:
    """Degree-3 formula in dimension r: 2r axis lines, weights 1/(2r).

    Paths come in (-e_k, +e_k) pairs so that odd moments cancel exactly
    when summed in order.
    """
    if r < 1:
        raise ValueError("dimension must be positive")
    scale_factor = math.sqrt(r)
    paths = []
    for k in range(r):
        for sign in (-1.0, 1.0):
            end = np.zeros(r)
            end[k] = sign * scale_factor
            paths.append(Path(times=[0.0, 1.0], points=[np.zeros(r), end]))
    weights = np.full(2 * r, 1.0 / (2 * r))
    return CubatureFormula(weights=weights, paths=paths, order=3, dimension=r)


def scale(formula: CubatureFormula, h: float) -> CubatureFormula:
    """Rescale a formula from [0, 1] to [0, h]: time by h, positions by sqrt(h)."""
    if h <= 0:
        raise ValueError("step length must be positive")
    root = math.sqrt(h)
    paths = [Path(times=p.times * h, points=p.points * root) for p in formula.paths]
    return CubatureFormula(
        weights=formula.weights, paths=paths, order=formula.order, dimension=formula.dimension
    )


# polynomials below are plain ascending coefficient lists; the nesting
# depth is at most 6 so the arithmetic stays tiny and exact


def _poly_eval(coeffs: list[float], x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _extend_level(path: Path, level_polys: list[list[float]], letter: int) -> list[list[float]]:
    """One more integration layer: d(result) = (running integral) d omega^letter."""
    times, points = path.times, path.points
    new_polys = []
    start_value = 0.0
    for k in range(len(times) - 1):
        a, b = times[k], times[k + 1]
        if letter == 0:
            slope = 1.0
        else:
            slope = (points[k + 1, letter - 1] - points[k, letter - 1]) / (b - a)
        anti = [0.0] + [slope * c / (j + 1) for j, c in enumerate(level_polys[k])]
        anti[0] = start_value - _poly_eval(anti, a)
        new_polys.append(anti)
        start_value = _poly_eval(anti, b)
    return new_polys


def path_integrals(path: Path, words: list[MultiIndex]) -> dict[MultiIndex, float]:
    """Iterated integrals of the path for a batch of words.

    Words sharing a prefix share the inner integration layers, so
    computing a whole degree set costs little more than its longest
    member.
    """
    prefixes: set[MultiIndex] = set()
    for w in words:
        for k in range(len(w) + 1):
            prefixes.add(tuple(w[:k]))
    nseg = len(path.times) - 1
    polys: dict[MultiIndex, list[list[float]]] = {(): [[1.0]] * nseg}
    for prefix in sorted(prefixes, key=len):
        if prefix:
            polys[prefix] = _extend_level(path, polys[prefix[:-1]], prefix[-1])
    t_end = path.times[-1]
    return {tuple(w): _poly_eval(polys[tuple(w)][-1], t_end) for w in words}


def iterated_integral(path: Path, beta: MultiIndex) -> float:
    """Iterated integral of the path along the word, exactly.

    The letter 0 integrates against time, letter i >= 1 against the i-th
    path component.  On each linear segment the running integral is a
    polynomial in t, each nesting level raises its degree by at most one,
    so the whole computation is exact polynomial calculus.
    """
    if degree(beta) > MAX_INTEGRAL_DEGREE:
        raise ValueError(f"word degree {degree(beta)} beyond supported range {MAX_INTEGRAL_DEGREE}")
    level_polys = [[1.0]] * (len(path.times) - 1)
    for letter in beta:
        level_polys = _extend_level(path, level_polys, letter)
    return _poly_eval(level_polys[-1], float(path.times[-1]))


def brownian_stratonovich_moment(beta: MultiIndex) -> float:
    """Expected Brownian Stratonovich iterated integral over [0, 1].

    Closed-form table for degree <= 4: 1 for the empty word and (0),
    1/2 for (i,i) and (0,0), 1/4 for (0,i,i) and (i,i,0), 1/8 for
    (i,i,j,j), and 0 otherwise (all odd degrees in particular).  A word
    has a nonzero moment exactly when it splits left to right into
    blocks that are either a single 0 or an adjacent equal pair (i,i)
    with i >= 1; b blocks of which q are pairs give (1/2)^q / b!.
    """
    if degree(beta) > MAX_MOMENT_DEGREE:
        raise ValueError(f"word degree {degree(beta)} beyond supported range {MAX_MOMENT_DEGREE}")
    blocks = 0
    pair_blocks = 0
    i = 0
    while i < len(beta):
        if beta[i] == 0:
            blocks += 1
            i += 1
        elif i + 1 < len(beta) and beta[i + 1] == beta[i]:
            blocks += 1
            pair_blocks += 1
            i += 2
        else:
            return 0.0
    return 0.5**pair_blocks / math.factorial(blocks)


def cubature_moment(formula: CubatureFormula, beta: MultiIndex) -> float:
    # sequential sum keeps +/- path pairs adjacent, so odd moments cancel exactly
    total = 0.0
    for w, p in zip(formula.weights, formula.paths):
        total += w * iterated_integral(p, beta)
    return total


def validate_moments(formula: CubatureFormula) -> MomentReport:
    """Compare cubature and Brownian moments for all words of degree <= order + 1.

    Degrees up to the order must match to tolerance for the report to
    pass; the degree order + 1 defects are reported as the leading error
    constants.
    """
    words = enumerate_degree_set(formula.order + 1, formula.dimension)
    per_path = [path_integrals(p, words) for p in formula.paths]
    report = MomentReport(order=formula.order, dimension=formula.dimension)
    for beta in words:
        q = 0.0
        for w, table in zip(formula.weights, per_path):
            q += w * table[beta]
        report.rows.append(
            MomentRow(
                beta=beta,
                cubature_moment=q,
                brownian_moment=brownian_stratonovich_moment(beta),
            )
        )
    return report
