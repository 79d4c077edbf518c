import networkx as nx
import pytest

from lcl_lab.graph import Graph


def trees_up_to(max_nodes: int, max_degree: int = 3) -> list[Graph]:
    """Every unlabeled tree with 1..max_nodes nodes and degree at most max_degree."""
    out = [Graph(1, max_degree=max_degree)]
    for order in range(2, max_nodes + 1):
        for t in nx.nonisomorphic_trees(order):
            if max(d for _, d in t.degree()) > max_degree:
                continue
            g = Graph(order, max_degree=max_degree)
            for u, v in sorted(t.edges()):
                g.add_edge(u, v)
            out.append(g)
    return out


@pytest.fixture(scope="session")
def small_trees():
    return trees_up_to(7)


# acceptance verdicts, echoed again in the terminal summary so they survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
