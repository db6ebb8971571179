"""Independent brute-force references used to cross-check the engine.

These deliberately avoid the library's own algorithms: classification works
by exhaustive simple-path enumeration, matching by a plain-Python restatement
of the greedy rule.
"""

from __future__ import annotations

import math


def simple_paths(edges: set[tuple[str, str]], source: str, target: str,
                 banned: frozenset[str] = frozenset()) -> list[list[str]]:
    """All simple directed paths source -> target avoiding banned nodes."""
    succ: dict[str, list[str]] = {}
    for s, t in edges:
        succ.setdefault(s, []).append(t)
    paths: list[list[str]] = []

    def walk(node, trail):
        if node == target:
            paths.append(trail)
            return
        for nxt in succ.get(node, []):
            if nxt in banned or nxt in trail:
                continue
            walk(nxt, trail + [nxt])

    if source in banned:
        return []
    walk(source, [source])
    return paths


def oracle_classify(nodes: set[str], edges: set[tuple[str, str]], t: str, y: str) -> dict[str, str]:
    """Variable types by path enumeration over the four defining patterns."""

    def connected(a, b, banned=frozenset()):
        return bool(simple_paths(edges, a, b, banned))

    classes = {t: "treatment", y: "outcome"}
    for v in nodes - {t, y}:
        to_y = connected(v, y)
        from_t = connected(t, v)
        to_t = connected(v, t)
        from_y = connected(y, v)
        if from_t and to_y:
            classes[v] = "mediator"
        elif to_t and connected(v, y, banned=frozenset({t})):
            classes[v] = "confounder"
        elif from_t and from_y:
            classes[v] = "collider"
        elif to_y and not to_t and not from_t:
            classes[v] = "prognostic"
        else:
            classes[v] = "unclassified"
    return classes


def oracle_greedy_match(
    treated: list[tuple[int, float]],
    controls: list[tuple[int, float]],
    caliper: float,
    logit_metric: bool = False,
) -> list[tuple[int, int, float]]:
    """Straight-line restatement of the greedy rule on (row id, score) lists:
    treated by descending score (ties by id), nearest remaining control,
    distance ties to the smaller control id."""

    def coord(p):
        return math.log(p / (1.0 - p)) if logit_metric else p

    remaining = {cid: coord(s) for cid, s in controls}
    pairs = []
    for tid, ts in sorted(treated, key=lambda item: (-item[1], item[0])):
        best_id, best_dist = None, None
        for cid in sorted(remaining):
            dist = abs(coord(ts) - remaining[cid])
            if best_dist is None or dist < best_dist:
                best_id, best_dist = cid, dist
        if best_id is not None and best_dist <= caliper:
            pairs.append((tid, best_id, best_dist))
            del remaining[best_id]
    return pairs
