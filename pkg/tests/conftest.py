import pytest

from iasound import corpus_path, load_graph_file

DEFENDER = ("nTLS_snd(gmail.com)", "nDANE_rcv(t-online.de)")
ROUTE_DEFENDER = DEFENDER + ("nVPN(AS15169,AS19281)",)


@pytest.fixture(scope="session")
def fig2():
    return load_graph_file(corpus_path("fig2"))


@pytest.fixture(scope="session")
def fig2_route():
    return load_graph_file(corpus_path("fig2_resolver_route"))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
