"""Bipartite graphs, C4-freeness and exact Zarankiewicz numbers.

A graph has parts S = [m] and T = [n] (1-based) and is stored as a frozen
edge set.  For the search, row ``i`` of the graph is a bitmask over T; the
graph is C4-free iff no two rows share two columns, i.e. no column pair is
claimed by two different rows.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from multiprocessing import Value

from .errors import InvalidIndex, SizeLimit

DEFAULT_SIZE_LIMIT = 7


@dataclass(frozen=True)
class BipartiteGraph:
    m: int
    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise InvalidIndex(f"part sizes must be positive, got {self.m}x{self.n}")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (1 <= i <= self.m and 1 <= j <= self.n):
                raise InvalidIndex(f"edge {(i, j)} out of range for parts {self.m}x{self.n}")
        object.__setattr__(self, "edges", edges)

    def neighbours(self, i: int) -> set[int]:
        return {j for a, j in self.edges if a == i}

    def degrees(self) -> tuple[int, ...]:
        return tuple(len(self.neighbours(i)) for i in range(1, self.m + 1))

    def row_masks(self) -> list[int]:
        masks = [0] * self.m
        for i, j in self.edges:
            masks[i - 1] |= 1 << (j - 1)
        return masks

    def to_json(self) -> dict:
        return {"m": self.m, "n": self.n, "edges": [list(e) for e in sorted(self.edges)]}


def graph_from_json(obj: dict) -> BipartiteGraph:
    try:
        edges = [tuple(e) for e in obj.get("edges", [])]
        if any(len(e) != 2 for e in edges):
            raise ValueError("each edge must be [i, j]")
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edges")
        return BipartiteGraph(int(obj["m"]), int(obj["n"]), frozenset(edges))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed graph object: {exc}") from exc


def load_graph(path) -> BipartiteGraph:
    with open(path) as fh:
        return graph_from_json(json.load(fh))


def complete_bipartite(m: int, n: int) -> BipartiteGraph:
    return BipartiteGraph(m, n, frozenset((i, j) for i in range(1, m + 1) for j in range(1, n + 1)))


def graph_4x3() -> BipartiteGraph:
    """The 7-edge C4-free graph on parts of sizes 4 and 3."""
    edges = {(1, 1), (2, 1), (3, 1), (1, 2), (4, 2), (2, 3), (4, 3)}
    return BipartiteGraph(4, 3, frozenset(edges))


def _masks_c4_free(masks) -> bool:
    for a, b in combinations(masks, 2):
        common = a & b
        if common & (common - 1):
            return False
    return True


def is_c4_free(graph: BipartiteGraph) -> bool:
    """True iff no two vertices of S have two or more common neighbours."""
    return _masks_c4_free(graph.row_masks())


def reiman_bound(m: int, n: int) -> float:
    """n/2 + sqrt(n^2 + 4 m n (m - 1)) / 2 + 1."""
    if m < 1 or n < 1:
        raise InvalidIndex("part sizes must be positive")
    return n / 2 + 0.5 * math.sqrt(n * n + 4 * m * n * (m - 1)) + 1


_KNOWN_Z = {(3, 3): 6, (3, 4): 7, (4, 4): 9, (4, 5): 10, (5, 5): 12, (4, 6): 13}


def known_z(m: int, n: int) -> int | None:
    """Published small values of z(m, n); symmetric in (m, n)."""
    return _KNOWN_Z.get((min(m, n), max(m, n)))


@dataclass(frozen=True)
class ZarankiewiczResult:
    m: int
    n: int
    z: int
    witness: BipartiteGraph
    nodes_explored: int
    elapsed: float

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "z": self.z,
            "witness": self.witness.to_json(),
            "nodes": self.nodes_explored,
        }


@lru_cache(maxsize=None)
def _row_capacity(rows: int, pairs: int, n: int) -> int:
    """Max total degree of ``rows`` fresh rows using at most ``pairs`` column pairs."""
    if rows == 0:
        return 0
    best = 0
    for d in range(n + 1):
        cost = d * (d - 1) // 2
        if cost > pairs:
            break
        best = max(best, d + _row_capacity(rows - 1, pairs - cost, n))
    return best


class _Search:
    """Depth-first include-first branch and bound over cells in row-major order."""

    def __init__(self, m: int, n: int, symmetry_breaking: bool = False, shared_best=None):
        self.m, self.n = m, n
        self.total_pairs = n * (n - 1) // 2
        self.pair_bit = {}
        for a, b in combinations(range(n), 2):
            self.pair_bit[(a, b)] = 1 << len(self.pair_bit)
        self.symmetry_breaking = symmetry_breaking
        self.shared_best = shared_best
        self.best = -1
        self.best_rows: list[int] | None = None
        self.nodes = 0

    def _new_pairs(self, row_mask: int, col: int) -> int:
        bits = 0
        for c in range(self.n):
            if row_mask >> c & 1:
                bits |= self.pair_bit[(c, col) if c < col else (col, c)]
        return bits

    def _bound(self, row: int, col: int, row_mask: int, used_pairs: int) -> int:
        """Upper bound on edges still addable from cell (row, col) onward."""
        free = self.total_pairs - bin(used_pairs).count("1")
        rows_left = self.m - row - 1
        d0 = bin(row_mask).count("1")
        cells_left = self.n - col
        best = 0
        for extra in range(cells_left + 1):
            cost = (d0 + extra) * (d0 + extra - 1) // 2 - d0 * (d0 - 1) // 2
            if cost > free:
                break
            best = max(best, extra + _row_capacity(rows_left, free - cost, self.n))
        return best

    def _cutoff(self) -> int:
        if self.shared_best is None:
            return self.best
        # a strictly better optimum elsewhere lets us prune; ties must survive so
        # the earliest subtree keeps its witness
        return max(self.best, self.shared_best.value - 1)

    def run(self, prefix_rows: list[int], row: int, col: int, count: int, used_pairs: int) -> None:
        self.rows = list(prefix_rows) + [0] * (self.m - len(prefix_rows))
        self._dfs(row, col, count, used_pairs)

    def _dfs(self, row: int, col: int, count: int, used_pairs: int) -> None:
        self.nodes += 1
        if row == self.m:
            if count > self.best:
                self.best = count
                self.best_rows = list(self.rows)
                if self.shared_best is not None:
                    with self.shared_best.get_lock():
                        if count > self.shared_best.value:
                            self.shared_best.value = count
            return
        cells_left = (self.m - row) * self.n - col
        if count + cells_left <= self._cutoff():
            return
        row_mask = self.rows[row]
        if count + self._bound(row, col, row_mask, used_pairs) <= self._cutoff():
            return
        nrow, ncol = (row, col + 1) if col + 1 < self.n else (row + 1, 0)
        row_done = ncol == 0
        new_pairs = self._new_pairs(row_mask, col)
        if not new_pairs & used_pairs:
            self.rows[row] = row_mask | (1 << col)
            if not row_done or self._degree_ok(row):
                self._dfs(nrow, ncol, count + 1, used_pairs | new_pairs)
            self.rows[row] = row_mask
        if not row_done or self._degree_ok(row):
            self._dfs(nrow, ncol, count, used_pairs)

    def _degree_ok(self, row: int) -> bool:
        # optional symmetry breaking: row degrees non-increasing
        if not self.symmetry_breaking or row == 0:
            return True
        return bin(self.rows[row]).count("1") <= bin(self.rows[row - 1]).count("1")


def _rows_to_graph(m: int, n: int, rows: list[int]) -> BipartiteGraph:
    edges = {(i + 1, j + 1) for i in range(m) for j in range(n) if rows[i] >> j & 1}
    return BipartiteGraph(m, n, frozenset(edges))


_worker_best = None


def _init_worker(shared):
    global _worker_best
    _worker_best = shared


def _solve_subtree(args):
    m, n, symmetry_breaking, prefix_rows, row, col, count, used_pairs = args
    s = _Search(m, n, symmetry_breaking, shared_best=_worker_best)
    s.run(prefix_rows, row, col, count, used_pairs)
    return s.best, s.best_rows, s.nodes


def _split(m: int, n: int, depth: int) -> list[tuple]:
    """Enumerate feasible prefixes of the first ``depth`` cells in DFS order."""
    helper = _Search(m, n)
    out = []

    def rec(idx, rows, count, used):
        if idx == depth:
            row, col = divmod(idx, n)
            out.append((list(rows), row, col, count, used))
            return
        row, col = divmod(idx, n)
        new_pairs = helper._new_pairs(rows[row], col)
        if not new_pairs & used:
            rows[row] |= 1 << col
            rec(idx + 1, rows, count + 1, used | new_pairs)
            rows[row] &= ~(1 << col)
        rec(idx + 1, rows, count, used)

    rec(0, [0] * m, 0, 0)
    return out


def zarankiewicz(
    m: int,
    n: int,
    *,
    limit: int = DEFAULT_SIZE_LIMIT,
    jobs: int = 1,
    symmetry_breaking: bool = False,
) -> ZarankiewiczResult:
    """Exact z(m, n) by branch and bound.

    The witness is the first optimum met by the include-first row-major
    search; with ``jobs > 1`` the same witness is returned.
    """
    if not (1 <= m <= limit and 1 <= n <= limit):
        raise SizeLimit(f"z({m},{n}) exceeds the size limit {limit}")
    start = time.perf_counter()
    if jobs <= 1 or m * n < 8:
        s = _Search(m, n, symmetry_breaking)
        s.run([], 0, 0, 0, 0)
        best, rows, nodes = s.best, s.best_rows, s.nodes
    else:
        depth = min(m * n - 1, max(3, int(math.log2(jobs)) + 3))
        prefixes = _split(m, n, depth)
        shared = Value("i", -1)
        tasks = [(m, n, symmetry_breaking, *p) for p in prefixes]
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(shared,)) as ex:
            results = list(ex.map(_solve_subtree, tasks))
        best, rows, nodes = -1, None, 0
        for b, r, k in results:  # results arrive in subtree (DFS) order
            nodes += k
            if b > best:
                best, rows = b, r
    return ZarankiewiczResult(m, n, best, _rows_to_graph(m, n, rows), nodes, time.perf_counter() - start)


def zarankiewicz_brute_force(m: int, n: int) -> int:
    """Max edges over all 2^(mn) edge subsets; only sensible for mn <= ~20."""
    full = (1 << n) - 1
    best = 0
    for mask in range(1 << (m * n)):
        rows = [(mask >> (i * n)) & full for i in range(m)]
        if _masks_c4_free(rows):
            best = max(best, bin(mask).count("1"))
    return best
