import pytest

from mtlab.dims import make_dimension


@pytest.fixture(scope="session")
def d2():
    return make_dimension(2)


@pytest.fixture(scope="session")
def d3():
    return make_dimension(3)


@pytest.fixture(scope="session")
def g0_2(d2):
    from mtlab.odes import green_g0

    return green_g0(d2)


@pytest.fixture(scope="session")
def g0_3(d3):
    from mtlab.odes import green_g0

    return green_g0(d3)


@pytest.fixture(scope="session")
def ground_state():
    from mtlab.odes import gn_ground_state

    return gn_ground_state()


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record a criterion outcome for the summary, then assert it."""

    def record(number, ok, detail):
        request.config.stash.setdefault(_ACCEPTANCE, {})[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    passed = sum(ok for ok, _ in results.values())
    terminalreporter.write_line(f"{passed}/{len(results)} criteria pass")
