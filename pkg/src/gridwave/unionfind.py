"""Disjoint sets over integer ids, used to group removed edges into defects."""

from __future__ import annotations


class UnionFind:
    """Union-find with path compression and union by rank.

    Args:
        size: Number of elements, labelled ``0 .. size - 1``.
    """

    def __init__(self, size: int) -> None:
        if size < 0:
            raise ValueError(f"size must be >= 0, got {size}")
        self.parents = list(range(size))
        self.rank = [0] * size
        self.num_components = size

    def __len__(self) -> int:
        return len(self.parents)

    def find(self, elem: int) -> int:
        """Return the root of *elem*, compressing the path on the way."""
        root = elem
        while root != self.parents[root]:
            root = self.parents[root]
        while elem != root:
            nxt = self.parents[elem]
            self.parents[elem] = root
            elem = nxt
        return root

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of *a* and *b*; return ``False`` if already merged."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parents[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        self.num_components -= 1
        return True

    def groups(self) -> list[list[int]]:
        """Return the sets as sorted lists, ordered by their smallest member."""
        by_root: dict[int, list[int]] = {}
        for elem in range(len(self.parents)):
            by_root.setdefault(self.find(elem), []).append(elem)
        return sorted(by_root.values(), key=lambda members: members[0])
