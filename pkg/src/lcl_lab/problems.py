"""Named node-edge problems used throughout the lab."""

from __future__ import annotations

from collections import Counter

from .lcl import BwProblem, StandardLcl, make_problem

NO_INPUT = ("-",)


def _outs(combo):
    return [o for _, o in combo]


def two_coloring(max_degree: int = 3) -> BwProblem:
    return make_problem(
        "2-coloring", NO_INPUT, ("A", "B"), max_degree,
        lambda c: len(set(_outs(c))) <= 1,
        lambda c: set(_outs(c)) == {"A", "B"})


def three_coloring(max_degree: int = 3) -> BwProblem:
    return make_problem(
        "3-coloring", NO_INPUT, ("1", "2", "3"), max_degree,
        lambda c: len(set(_outs(c))) <= 1,
        lambda c: len(set(_outs(c))) == 2)


def maximal_matching(max_degree: int = 3) -> BwProblem:
    # M: matched edge, O: I am matched elsewhere, P: I am unmatched
    def white(c):
        counts = Counter(_outs(c))
        matched = counts["M"] == 1 and counts["O"] == len(c) - 1
        unmatched = counts["P"] == len(c)
        return matched or unmatched

    def black(c):
        return sorted(_outs(c)) in (["M", "M"], ["O", "P"], ["O", "O"])

    return make_problem("maximal-matching", NO_INPUT, ("M", "P", "O"), max_degree, white, black)


def sinkless_orientation(max_degree: int = 3) -> BwProblem:
    # I / O: the edge points into / out of this node
    return make_problem(
        "sinkless-orientation", NO_INPUT, ("I", "O"), max_degree,
        lambda c: len(c) <= 2 or "O" in _outs(c),
        lambda c: sorted(_outs(c)) == ["I", "O"])


def always_valid(max_degree: int = 3) -> BwProblem:
    return make_problem("always-valid", NO_INPUT, ("0", "1"), max_degree,
                        lambda c: True, lambda c: True)


def contrived_unsolvable(max_degree: int = 3) -> BwProblem:
    """Leaves must say Y, inner nodes X, and both halves of an edge must agree."""
    def white(c):
        outs = _outs(c)
        if len(outs) == 1:
            return outs == ["Y"]
        return all(o == "X" for o in outs)

    return make_problem("contrived-unsolvable", NO_INPUT, ("X", "Y"), max_degree,
                        white, lambda c: len(set(_outs(c))) == 1)


LIBRARY = {
    "2-coloring": two_coloring,
    "3-coloring": three_coloring,
    "maximal-matching": maximal_matching,
    "sinkless-orientation": sinkless_orientation,
    "always-valid": always_valid,
}


def get_problem(name: str, max_degree: int = 3) -> BwProblem:
    if name == "contrived-unsolvable":
        return contrived_unsolvable(max_degree)
    try:
        return LIBRARY[name](max_degree)
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(LIBRARY)}") from None


# standard-form counterparts, used to exercise the node-edge conversion

def standard_always_valid(max_degree: int = 3) -> StandardLcl:
    return StandardLcl.from_predicate("always-valid", NO_INPUT, ("0",), 1, max_degree, lambda ball: True)


def standard_three_coloring(max_degree: int = 3) -> StandardLcl:
    """Radius 1: a node's half-edges share one colour and every neighbour uses a different one."""
    def ok(ball):
        centre = {e[2] for e in ball}
        if len(centre) > 1:
            return False
        for entry in ball:
            neighbour = {e[2] for e in entry[3]}
            if len(neighbour) != 1 or neighbour & centre:
                return False
        return True

    return StandardLcl.from_predicate("3-coloring", NO_INPUT, ("1", "2", "3"), 1, max_degree, ok)
