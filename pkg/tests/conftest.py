import pytest

from xlir.harness.synthetic import SyntheticSpec, generate_synthetic

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.fixture(scope="session")
def small_synth():
    """Two languages, 8 topics: big enough for the pipeline, quick to train."""
    return generate_synthetic(SyntheticSpec(topics=8, docs_per_topic_per_lang=12, doc_length_mean=30,
                                            doc_length_spread=10, judged_nonrelevant=10), seed=7)
