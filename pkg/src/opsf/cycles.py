"""Simple cycles of the block-level switch multigraph.

Undirected multigraph cycles are found with a blocked-set circuit search
(Johnson style) on the graph where every edge is usable in both
directions.  Walks that go out and back along the same edge are discarded
and each remaining cycle, which is found once per direction, is kept only in
the direction whose first edge id is smaller than its last.  Parallel edges
form 2-cycles.
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, Sequence

from .network import AbstractNetwork, id_key, sorted_ids

Edge = tuple  # (edge_id, u, v)


class CycleError(ValueError):
    pass


def canonical_edges(edges: Sequence) -> tuple:
    """Lexicographically smallest rotation or reflection of a cyclic edge sequence."""
    seq = list(edges)
    k = len(seq)
    best = None
    for order in (seq, seq[::-1]):
        for i in range(k):
            cand = tuple(order[i:] + order[:i])
            key = tuple(id_key(e) for e in cand)
            if best is None or key < best[0]:
                best = (key, cand)
    return best[1]


@dataclass(frozen=True)
class Cycle:
    edges: tuple
    blocks: tuple

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def key(self) -> tuple:
        return tuple(id_key(e) for e in self.edges)


def make_cycle(edge_seq: Sequence, ends: dict) -> Cycle:
    """Build a canonical :class:`Cycle` from an ordered edge walk.

    ``ends`` maps edge id to its ``(u, v)`` endpoints.
    """
    edges = canonical_edges(edge_seq)
    if len(edges) == 2:
        u, v = ends[edges[0]]
        blocks = tuple(sorted_ids((u, v)))
    else:
        a, b = ends[edges[0]]
        c, d = ends[edges[1]]
        cur = b if b in (c, d) else a
        start = a if cur == b else b
        blocks = [start]
        for e in edges[1:]:
            blocks.append(cur)
            u, v = ends[e]
            cur = v if u == cur else u
        blocks = tuple(blocks)
    return Cycle(edges, blocks)


def _edges_of(g) -> list[Edge]:
    if isinstance(g, AbstractNetwork):
        return [(e.line, e.m, e.n) for e in g.switched_edges]
    return [tuple(e) for e in g]


def _vertices(edges: Iterable[Edge], extra: Iterable = ()) -> list:
    vs = set(extra)
    for _, u, v in edges:
        vs.add(u)
        vs.add(v)
    return sorted_ids(vs)


def iter_simple_cycles(edges: Sequence[Edge]) -> Iterator[list]:
    """Yield each simple cycle once as an ordered list of edge ids."""
    ids = [e[0] for e in edges]
    if len(set(ids)) != len(ids):
        raise CycleError("edge ids must be unique")
    for _, u, v in edges:
        if u == v:
            raise CycleError("self-loops are not supported")
    order = {v: i for i, v in enumerate(_vertices(edges))}
    adj = defaultdict(list)
    for eid, u, v in edges:
        adj[u].append((v, eid))
        adj[v].append((u, eid))
    for v in adj:
        adj[v].sort(key=lambda t: (order[t[0]], id_key(t[1])))

    for start in sorted(adj, key=order.__getitem__):
        rank = order[start]
        # component of ``start`` among vertices not yet used as a root
        comp = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y, _ in adj[x]:
                if order[y] >= rank and y not in comp:
                    comp.add(y)
                    stack.append(y)
        if len(comp) < 2:
            continue
        yield from _circuits_from(start, comp, adj)


def _circuits_from(start, comp, adj) -> Iterator[list]:
    blocked = set()
    blist = defaultdict(set)
    path_edges: list = []

    def unblock(u):
        todo = [u]
        while todo:
            x = todo.pop()
            if x in blocked:
                blocked.discard(x)
                todo.extend(blist.pop(x, ()))

    # iterative version of the recursive circuit search
    # frame: [vertex, neighbour iterator, found_flag]
    blocked.add(start)
    frames = [[start, iter(adj[start]), False]]
    while frames:
        frame = frames[-1]
        v, it, _ = frame
        advanced = False
        for w, eid in it:
            if w not in comp:
                continue
            if w == start:
                # an out-and-back walk on one edge still counts as reaching the
                # root for blocking purposes, it is just not reported
                frame[2] = True
                if path_edges == [eid]:
                    continue
                walk = path_edges + [eid]
                if id_key(walk[0]) < id_key(walk[-1]):
                    yield walk
            elif w not in blocked:
                path_edges.append(eid)
                blocked.add(w)
                frames.append([w, iter(adj[w]), False])
                advanced = True
                break
        if advanced:
            continue
        frames.pop()
        if frame[2]:
            unblock(v)
        else:
            for w, _ in adj[v]:
                if w in comp:
                    blist[w].add(v)
        if frames:
            if frame[2]:
                frames[-1][2] = True
            path_edges.pop()


def enumerate_simple_cycles(g, max_cycles: int | None = None, max_seconds: float | None = None
                            ) -> tuple[list[Cycle], bool]:
    """All simple cycles of ``g`` in canonical form, sorted.

    ``g`` is an :class:`AbstractNetwork` or a sequence of ``(edge_id, u, v)``.
    Returns ``(cycles, complete)``; when a cap triggers, ``complete`` is
    ``False`` and the list holds what was found so far.
    """
    edges = _edges_of(g)
    ends = {e[0]: (e[1], e[2]) for e in edges}
    found = {}
    t0 = time.perf_counter()
    complete = True
    for n, walk in enumerate(iter_simple_cycles(edges)):
        if max_cycles is not None and len(found) >= max_cycles:
            complete = False
            break
        if max_seconds is not None and n % 256 == 0 and time.perf_counter() - t0 > max_seconds:
            complete = False
            break
        cyc = make_cycle(walk, ends)
        found[cyc.edges] = cyc
    cycles = sorted(found.values(), key=lambda c: c.key)
    return cycles, complete


def count_simple_cycles(g, max_cycles: int | None = None, max_seconds: float | None = None
                        ) -> tuple[int, bool, float]:
    """Count cycles without storing them; returns ``(count, complete, seconds)``."""
    edges = _edges_of(g)
    t0 = time.perf_counter()
    count = 0
    for walk in iter_simple_cycles(edges):
        if max_cycles is not None and count >= max_cycles:
            return count, False, time.perf_counter() - t0
        count += 1
        if max_seconds is not None and count % 256 == 0 and time.perf_counter() - t0 > max_seconds:
            return count, False, time.perf_counter() - t0
    return count, True, time.perf_counter() - t0


def cycles_in_topology(g: AbstractNetwork, closed: Iterable[Hashable]) -> list[Cycle]:
    """Simple cycles formed by the closed switched edges only."""
    closed = set(closed)
    known = set(g.edge_ids)
    unknown = closed - known
    if unknown:
        raise CycleError(f"unknown switched lines: {sorted_ids(unknown)}")
    sub = [(e.line, e.m, e.n) for e in g.switched_edges if e.line in closed]
    cycles, _ = enumerate_simple_cycles(sub)
    return cycles


def find_cycle(edges: Sequence[Edge]) -> Cycle | None:
    """One cycle of the multigraph, or ``None`` if it is a forest."""
    parent, depth = {}, {}
    ends = {e[0]: (e[1], e[2]) for e in edges}
    adj = defaultdict(list)
    for eid, u, v in edges:
        adj[u].append((v, eid))
        adj[v].append((u, eid))
    for root in sorted_ids(adj):
        if root in parent:
            continue
        parent[root] = (None, None)
        depth[root] = 0
        stack = [root]
        while stack:
            x = stack.pop()
            for y, eid in adj[x]:
                if eid == parent[x][1]:
                    continue
                if y in parent:
                    # x-y closes a cycle; walk both ends up to the common ancestor
                    a, b = x, y
                    left, right = [], []
                    while a != b:
                        if depth[a] >= depth[b]:
                            left.append(parent[a][1])
                            a = parent[a][0]
                        else:
                            right.append(parent[b][1])
                            b = parent[b][0]
                    walk = left[::-1] + [eid] + right
                    return make_cycle(walk, ends)
                parent[y] = (x, eid)
                depth[y] = depth[x] + 1
                stack.append(y)
    return None


def count_cycles_brute_force(g, max_edges: int = 20) -> int:
    """Number of simple cycles by unpruned simple-path search (test oracle)."""
    return len(brute_force_cycles(g, max_edges))


def brute_force_cycles(g, max_edges: int = 20) -> set[tuple]:
    """Canonical edge tuples of every simple cycle, by exhaustive path search.

    Every simple path from every start vertex is extended until it can close
    on its start; duplicates from rotations and reflections collapse in the
    set.  Exponential; guarded by ``max_edges``.
    """
    edges = _edges_of(g)
    if len(edges) > max_edges:
        raise CycleError(f"brute force limited to {max_edges} edges, got {len(edges)}")
    adj = defaultdict(list)
    for eid, u, v in edges:
        adj[u].append((v, eid))
        adj[v].append((u, eid))
    out: set[tuple] = set()

    def extend(start, v, visited, used):
        for w, eid in adj[v]:
            if eid in used:
                continue
            if w == start and len(used) >= 1:
                out.add(canonical_edges(used + [eid]))
            elif w not in visited:
                visited.add(w)
                used.append(eid)
                extend(start, w, visited, used)
                used.pop()
                visited.discard(w)

    for s in adj:
        extend(s, s, {s}, [])
    return out
