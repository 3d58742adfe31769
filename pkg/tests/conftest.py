import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    from nullctrl.analytic_smallness import CHEBYSHEV_AUDIT as audit

    terminalreporter.write_line(
        f"chebyshev subset audit: calls={audit.calls} checks_passed={audit.checks_passed} "
        f"failures={len(audit.failures)}")


def pytest_sessionfinish(session, exitstatus):
    from nullctrl.analytic_smallness import CHEBYSHEV_AUDIT as audit

    if audit.failures and exitstatus == 0:
        session.exitstatus = 1
