"""Bounding chain (B, D) for the polymer dynamics, with its compact representation.

B is a valid configuration stored through a per-vertex owner array.  D is the
union of an implicit part (every polymer whose vertices all still carry
D* = 1, i.e. were never swept by a delete) and explicitly stored polymers.
Each explicit polymer is a doubly linked list of nodes, and every node is also
threaded on the list of its vertex, so deleting all explicit polymers through a
vertex costs their total size.
"""

from __future__ import annotations

from typing import Iterable, List, Optional, Set

from .graph import Graph
from .percolation import InvariantError
from .polymer import Move, Polymer, PolymerConfig, closed_neighborhood


class _Node:
    __slots__ = ("rec", "vertex", "color", "prev", "next", "vprev", "vnext")

    def __init__(self, rec: "_Record", vertex: int, color: int):
        self.rec = rec
        self.vertex = vertex
        self.color = color
        self.prev: Optional[_Node] = None
        self.next: Optional[_Node] = None
        self.vprev: Optional[_Node] = None
        self.vnext: Optional[_Node] = None


class _Record:
    """One explicitly stored D-polymer: the head of its node list."""

    __slots__ = ("polymer", "head", "alive")

    def __init__(self, polymer: Polymer):
        self.polymer = polymer
        self.head: Optional[_Node] = None
        self.alive = True


class BoundingState:
    """Mutable (B, D) pair; see the module docstring for the layout."""

    def __init__(self, host: Graph):
        n = host.n
        self.host = host
        self.n = n
        self.bbar: List[Optional[Polymer]] = [None] * n
        self.b_polymers: Set[Polymer] = set()
        self.dstar = bytearray([1]) * n
        self.nstar = n
        self.dbar = [0] * n
        self.nbar = 0
        self.lhead: List[Optional[_Node]] = [None] * n
        self.records: Set[_Record] = set()

    # -- B ------------------------------------------------------------------
    def _b_add(self, gamma: Polymer) -> None:
        for u in gamma.vertices:
            self.bbar[u] = gamma
        self.b_polymers.add(gamma)

    def _b_remove_at(self, v: int) -> None:
        gamma = self.bbar[v]
        if gamma is None:
            return
        for u in gamma.vertices:
            self.bbar[u] = None
        self.b_polymers.discard(gamma)

    # -- explicit D ---------------------------------------------------------
    def _d_add(self, gamma: Polymer) -> None:
        rec = _Record(gamma)
        prev = None
        for v, c in zip(gamma.vertices, gamma.colors):
            node = _Node(rec, v, c)
            if prev is None:
                rec.head = node
            else:
                prev.next = node
                node.prev = prev
            prev = node
            # front of L^v
            old = self.lhead[v]
            node.vnext = old
            if old is not None:
                old.vprev = node
            self.lhead[v] = node
            self.dbar[v] += 1
        self.nbar += 1
        self.records.add(rec)

    def _d_remove(self, rec: _Record) -> None:
        node = rec.head
        while node is not None:
            v = node.vertex
            if node.vprev is None:
                self.lhead[v] = node.vnext
            else:
                node.vprev.vnext = node.vnext
            if node.vnext is not None:
                node.vnext.vprev = node.vprev
            self.dbar[v] -= 1
            nxt = node.next
            node.prev = node.next = node.vprev = node.vnext = None
            node = nxt
        rec.alive = False
        rec.head = None
        self.nbar -= 1
        self.records.discard(rec)

    def _d_delete_at(self, v: int) -> None:
        if self.dstar[v]:
            self.dstar[v] = 0
            self.nstar -= 1
        while self.lhead[v] is not None:
            self._d_remove(self.lhead[v].rec)

    # -- chain step ---------------------------------------------------------
    def step(self, move: Move) -> None:
        if move.branch == "delete":
            self._b_remove_at(move.v)
            self._d_delete_at(move.v)
            return
        gamma = move.gamma
        if gamma is None:
            return
        adj = self.host.adjacency
        bbar = self.bbar
        inside = gamma.vertices
        ring = []  # neighbours of gamma outside gamma
        in_set = set(inside)
        for u in inside:
            if bbar[u] is not None:
                return
            for w in adj[u]:
                if w not in in_set:
                    if bbar[w] is not None:
                        return
                    ring.append(w)
        dstar, dbar = self.dstar, self.dbar
        if not any(dstar[w] for w in inside) and not any(dstar[w] for w in ring):
            ring_clear = not any(dbar[w] for w in ring)
            if ring_clear:
                inner = [dbar[u] for u in inside]
                if not any(inner):
                    self._b_add(gamma)
                    return
                if all(c == 1 for c in inner):
                    node = self.lhead[inside[0]]
                    if node.rec.polymer == gamma:
                        self._d_remove(node.rec)
                        self._b_add(gamma)
                        return
        self._d_add(gamma)

    # -- queries ------------------------------------------------------------
    def coalesced(self) -> bool:
        return self.nstar == 0 and self.nbar == 0

    def phi(self) -> int:
        return sum(1 for v in range(self.n) if self.dstar[v] or self.dbar[v])

    def b_config(self) -> PolymerConfig:
        return PolymerConfig(self.b_polymers)

    def explicit_d(self) -> List[Polymer]:
        return [r.polymer for r in self.records]

    def in_d(self, gamma: Polymer) -> bool:
        """Membership of gamma in D (implicit part or explicit list)."""
        if all(self.dstar[v] for v in gamma.vertices):
            return True
        node = self.lhead[gamma.vertices[0]]
        while node is not None:
            if node.rec.polymer == gamma:
                return True
            node = node.vnext
        return False

    def check_invariants(self) -> None:
        """Recompute counters from scratch and check B / D compatibility."""
        if self.nstar != sum(self.dstar):
            raise InvariantError("N* out of sync with D*")
        if self.nbar != len(self.records):
            raise InvariantError("N-bar out of sync with explicit polymers")
        counts = [0] * self.n
        for rec in self.records:
            node = rec.head
            seen = []
            while node is not None:
                counts[node.vertex] += 1
                seen.append((node.vertex, node.color))
                node = node.next
            if tuple(seen) != tuple(zip(rec.polymer.vertices, rec.polymer.colors)):
                raise InvariantError("polymer list does not match its polymer")
        if counts != self.dbar:
            raise InvariantError("D-bar out of sync with explicit polymers")
        for v in range(self.n):
            node = self.lhead[v]
            c = 0
            while node is not None:
                if node.vertex != v or not node.rec.alive:
                    raise InvariantError("vertex list holds a foreign or dead node")
                c += 1
                node = node.vnext
            if c != self.dbar[v]:
                raise InvariantError("vertex list length differs from D-bar")
        cfg = PolymerConfig(self.b_polymers)
        if not cfg.is_valid(self.host):
            raise InvariantError("B is not a valid configuration")
        for p in self.b_polymers:
            if any(self.bbar[u] is not p for u in p.vertices):
                raise InvariantError("B owner array out of sync")
            nb = closed_neighborhood(self.host, p.vertices)
            if any(self.dstar[w] for w in nb):
                raise InvariantError("B polymer is adjacent to the implicit part of D")
            for rec in self.records:
                if any(u in nb for u in rec.polymer.vertices):
                    raise InvariantError("B polymer is incompatible with an explicit D polymer")


def bounding_chain_step(state: BoundingState, move: Move) -> BoundingState:
    state.step(move)
    return state


def coalescence_check(state: BoundingState) -> bool:
    return state.coalesced()


def phi_potential(state: BoundingState) -> int:
    return state.phi()


def sandwiched(state: BoundingState, config: PolymerConfig) -> bool:
    """B subset of X subset of B union D."""
    if not state.b_polymers <= config.polymers:
        return False
    return all(p in state.b_polymers or state.in_d(p) for p in config.polymers)
