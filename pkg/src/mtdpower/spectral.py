"""Attack-defense structures, graph generators and the spectral radius.

Nodes are labelled 1..n. An ordered pair ``(u, v)`` means ``u`` can attack
``v``; the adjacency matrix follows the convention ``A[v, u] = 1`` (0-based
internally), so row ``v`` lists the attackers of ``v``.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, InvalidParameter, ParseError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


class AttackDefenseStructure:
    """Immutable graph ``G = (V, E)`` with a lazily computed ``lambda1``."""

    __slots__ = ("_n", "_edges", "_directed", "_adj", "_lambda1")

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]], directed: bool = False):
        if int(node_count) != node_count or node_count < 1:
            raise InvalidParameter(f"node_count must be a positive integer, got {node_count!r}")
        n = int(node_count)
        pairs = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise InvalidParameter(f"self-loop ({u},{u}) not allowed")
            if not (1 <= u <= n and 1 <= v <= n):
                raise InvalidParameter(f"edge ({u},{v}) has an endpoint outside [1..{n}]")
            pairs.add((u, v))
            if not directed:
                pairs.add((v, u))
        self._n = n
        self._edges = frozenset(pairs)
        self._directed = bool(directed)
        self._adj = None
        self._lambda1 = None

    @property
    def node_count(self) -> int:
        return self._n

    @property
    def edges(self) -> frozenset:
        return self._edges

    @property
    def directed(self) -> bool:
        return self._directed

    @property
    def cached_lambda1(self) -> float | None:
        return self._lambda1

    def adjacency(self) -> sp.csr_matrix:
        """CSR adjacency with ``A[v-1, u-1] = 1`` for every edge ``(u, v)``."""
        if self._adj is None:
            if self._edges:
                src, dst = np.array(sorted(self._edges)).T
                data = np.ones(len(src))
                adj = sp.csr_matrix((data, (dst - 1, src - 1)), shape=(self._n, self._n))
            else:
                adj = sp.csr_matrix((self._n, self._n))
            adj.sort_indices()
            self._adj = adj
        return self._adj

    def in_degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency().sum(axis=1)).ravel()

    def max_degree(self) -> int:
        return int(self.in_degrees().max()) if self._n else 0

    @property
    def lambda1(self) -> float:
        if self._lambda1 is None:
            spectral_radius(self)
        return self._lambda1

    def relabel(self, permutation) -> "AttackDefenseStructure":
        """Copy with node ``k`` renamed to ``permutation[k-1]``."""
        perm = [int(p) for p in permutation]
        if sorted(perm) != list(range(1, self._n + 1)):
            raise InvalidParameter("permutation must be a rearrangement of 1..n")
        edges = [(perm[u - 1], perm[v - 1]) for u, v in self._edges]
        return AttackDefenseStructure(self._n, edges, directed=self._directed)

    def with_edge(self, u: int, v: int) -> "AttackDefenseStructure":
        return AttackDefenseStructure(self._n, set(self._edges) | {(u, v)}, directed=self._directed)

    def __eq__(self, other):
        if not isinstance(other, AttackDefenseStructure):
            return NotImplemented
        return (self._n, self._edges, self._directed) == (other._n, other._edges, other._directed)

    def __hash__(self):
        return hash((self._n, self._edges, self._directed))

    def __repr__(self):
        kind = "directed" if self._directed else "undirected"
        return f"AttackDefenseStructure(n={self._n}, pairs={len(self._edges)}, {kind})"


def _is_acyclic(adj: sp.csr_matrix) -> bool:
    # Kahn's algorithm on the attack direction u -> v.
    out = adj.T.tocsr()
    indeg = np.diff(adj.indptr).astype(int)
    queue = deque(np.flatnonzero(indeg == 0).tolist())
    seen = 0
    while queue:
        u = queue.popleft()
        seen += 1
        for v in out.indices[out.indptr[u]:out.indptr[u + 1]]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return seen == adj.shape[0]


def spectral_radius(
    structure: AttackDefenseStructure,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
) -> float:
    """Largest-modulus eigenvalue of the adjacency matrix by power iteration.

    Iterates on ``A + I`` so that bipartite graphs (whose spectrum contains
    ``-lambda1``) do not oscillate, and stops once the eigen-residual
    ``||A x - theta x|| <= tol * theta * ||x||``. The value is cached on the
    structure.
    """
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    if max_iter < 1:
        raise InvalidParameter("max_iter must be positive")
    adj = structure.adjacency()
    if adj.nnz == 0 or (structure.directed and _is_acyclic(adj)):
        structure._lambda1 = 0.0
        return 0.0

    rng = np.random.default_rng(seed)
    x = rng.uniform(0.5, 1.5, size=structure.node_count)
    x /= np.linalg.norm(x)
    theta = 0.0
    for _ in range(max_iter):
        ax = adj @ x
        theta = float(x @ ax)
        residual = np.linalg.norm(ax - theta * x)
        if theta > 0 and residual <= tol * theta:
            structure._lambda1 = theta
            return theta
        y = ax + x
        x = y / np.linalg.norm(y)
    raise ConvergenceError(
        f"spectral iteration did not converge in {max_iter} iterations (last estimate {theta:.12g})",
        last_iterate=x,
    )


# -- generators -------------------------------------------------------------

def complete_graph(n: int) -> AttackDefenseStructure:
    return AttackDefenseStructure(n, ((u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1)))


def star_graph(leaves: int) -> AttackDefenseStructure:
    """Hub is node 1, leaves are 2..leaves+1."""
    return AttackDefenseStructure(leaves + 1, ((1, v) for v in range(2, leaves + 2)))


def path_graph(n: int) -> AttackDefenseStructure:
    return AttackDefenseStructure(n, ((k, k + 1) for k in range(1, n)))


def erdos_renyi_graph(n: int, p: float, seed: int | None = None) -> AttackDefenseStructure:
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return AttackDefenseStructure(n, zip((iu[keep] + 1).tolist(), (ju[keep] + 1).tolist()))


def _require_int(params: dict, name: str, minimum: int) -> int:
    if name not in params:
        raise InvalidParameter(f"missing parameter '{name}'")
    value = params[name]
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise InvalidParameter(f"parameter '{name}' must be an integer >= {minimum}, got {value!r}")
    return int(value)


def generate_structure(kind: str, params: dict | None = None, seed: int | None = None) -> AttackDefenseStructure:
    """Build one of the standard test structures.

    ``kind`` is ``complete`` (``n``), ``star`` (``leaves``), ``path`` (``n``)
    or ``erdos_renyi`` (``n``, ``p``).
    """
    params = dict(params or {})
    if kind == "complete":
        return complete_graph(_require_int(params, "n", 1))
    if kind == "star":
        return star_graph(_require_int(params, "leaves", 0))
    if kind == "path":
        return path_graph(_require_int(params, "n", 1))
    if kind == "erdos_renyi":
        n = _require_int(params, "n", 1)
        p = params.get("p")
        if p is None or not (0.0 <= float(p) <= 1.0):
            raise InvalidParameter(f"parameter 'p' must lie in [0, 1], got {p!r}")
        return erdos_renyi_graph(n, float(p), seed=seed)
    raise InvalidParameter(f"unknown structure kind '{kind}'")


# -- edge-list format -------------------------------------------------------

def load_structure(source: str, directed: bool = False) -> AttackDefenseStructure:
    """Parse edge-list text: optional ``n=<int>`` header, then ``u v`` lines.

    Blank lines and ``#`` comments are ignored; duplicate edges collapse.
    """
    header_n = None
    edges = []
    seen_data = False
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("n="):
            if seen_data or header_n is not None:
                raise ParseError("node-count header must precede all edges", lineno)
            try:
                header_n = int(line[2:])
            except ValueError:
                raise ParseError(f"bad node-count header {line!r}", lineno) from None
            if header_n < 1:
                raise ParseError("node count must be positive", lineno)
            continue
        seen_data = True
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(f"expected '<u> <v>', got {raw!r}", lineno)
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {raw!r}", lineno) from None
        if u < 1 or v < 1:
            raise ParseError("node ids are 1-based", lineno)
        if u == v:
            raise InvalidParameter(f"line {lineno}: self-loop ({u},{u}) not allowed")
        edges.append((u, v))
    max_id = max((max(e) for e in edges), default=0)
    n = header_n if header_n is not None else max_id
    if n < 1:
        raise ParseError("edge list defines no nodes")
    if max_id > n:
        raise InvalidParameter(f"edge endpoint {max_id} exceeds declared node count {n}")
    return AttackDefenseStructure(n, edges, directed=directed)


def dump_structure(structure: AttackDefenseStructure) -> str:
    lines = [f"n={structure.node_count}"]
    pairs = sorted(structure.edges)
    if not structure.directed:
        pairs = [(u, v) for u, v in pairs if u < v]
    lines += [f"{u} {v}" for u, v in pairs]
    return "\n".join(lines) + "\n"
