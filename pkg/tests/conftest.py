import pytest

from contactchain.crypto import issue_certificate, keygen
from contactchain.simnet import DAY

# acceptance criterion label -> outcome, filled in as tests report
_CRITERIA: dict[str, list[str]] = {}


@pytest.fixture(scope="session")
def kdc_keys():
    return keygen(seed=b"test-kdc")


@pytest.fixture(scope="session")
def people(kdc_keys):
    """Three credentialed key holders: (sk, pk, cert)."""
    kdc_sk, _ = kdc_keys
    out = []
    for i in range(3):
        sk, pk = keygen(seed=b"person%d" % i)
        out.append((sk, pk, issue_certificate(kdc_sk, pk, 0, DAY)))
    return out


def pytest_runtest_logreport(report):
    label = dict(report.user_properties).get("criterion")
    if label is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA.setdefault(label, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: int(s.split(".")[0])):
        outs = _CRITERIA[label]
        ok = all(o == "passed" for o in outs)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
