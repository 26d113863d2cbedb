import pytest

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion.

    Usage: ``with criterion(n, "description") as note: ...``; ``note`` takes
    extra detail strings. Failures inside the block mark the criterion FAIL
    and are re-raised.
    """
    from contextlib import contextmanager
    import time

    @contextmanager
    def run(number: int, title: str):
        details: list[str] = []
        t0 = time.perf_counter()
        try:
            yield details.append
        except BaseException as exc:
            ACCEPTANCE[number] = (False, f"{title}; {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            raise
        took = time.perf_counter() - t0
        ACCEPTANCE[number] = (True, f"{title}; {'; '.join(details + [f'{took:.1f}s'])}")

    return run


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
