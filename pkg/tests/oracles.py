"""Independent reference implementations used only to check the package.

The edit-distance oracle enumerates every valid tree mapping directly from
the definition: a mapping is a one-to-one node correspondence that preserves
ancestry and left-to-right order, which is equivalent to preserving both the
preorder and postorder index order pairwise. Exponential, fine for the tiny
trees the tests feed it, and it shares no code with the package engine.
"""

from __future__ import annotations

from mtnkit.trees import LabeledTree, TreeNode


def _index(tree: LabeledTree):
    """Nodes in preorder with their (preorder, postorder) numbers."""
    nodes: list[TreeNode] = []
    post: list[int] = []
    post_counter = [0]

    def walk(n: TreeNode) -> None:
        slot = len(nodes)
        nodes.append(n)
        post.append(-1)
        for c in n.children:
            walk(c)
        post[slot] = post_counter[0]
        post_counter[0] += 1

    if tree.root is not None:
        walk(tree.root)
    pre = list(range(len(nodes)))
    return nodes, pre, post


def brute_force_distance(a: LabeledTree, b: LabeledTree, costs):
    """Minimum mapping cost by exhaustive enumeration of valid mappings.

    cost(M) = sum of substitute over mapped pairs, plus delete for unmapped
    a-nodes and insert for unmapped b-nodes; valid M preserves pairwise
    preorder AND postorder order on both sides.
    """
    an, apre, apost = _index(a)
    bn, bpre, bpost = _index(b)
    na, nb = len(an), len(bn)

    best = [sum(costs.delete(n) for n in an)
            + sum(costs.insert(n) for n in bn)]

    def compatible(pairs, i, j):
        for (pi, pj) in pairs:
            if (apre[i] < apre[pi]) != (bpre[j] < bpre[pj]):
                return False
            if (apost[i] < apost[pi]) != (bpost[j] < bpost[pj]):
                return False
        return True

    def extend(i, pairs, used_b, cost):
        if cost >= best[0]:
            return  # remaining choices only add nonnegative cost
        if i == na:
            total = cost
            for j in range(nb):
                if j not in used_b:
                    total += costs.insert(bn[j])
            if total < best[0]:
                best[0] = total
            return
        extend(i + 1, pairs, used_b, cost + costs.delete(an[i]))
        for j in range(nb):
            if j in used_b:
                continue
            if compatible(pairs, i, j):
                extend(i + 1, pairs + [(i, j)], used_b | {j},
                       cost + costs.substitute(an[i], bn[j]))

    extend(0, [], frozenset(), 0)
    return best[0]
