import sys
from pathlib import Path

import pytest

from tracelab.channel import Deletion, Duplication, GeoInsBefore, GeoInsDel, ChannelSpec

sys.path.insert(0, str(Path(__file__).parent))


def builtin_specs():
    return {
        "Deletion(0.3)": ChannelSpec(Deletion(0.3)),
        "Deletion(0.7)": ChannelSpec(Deletion(0.7)),
        "GeoInsDel(0.5,0.25)": ChannelSpec(GeoInsDel(0.5, 0.25)),
        "GeoInsBefore(0.5,0.3)": ChannelSpec(GeoInsBefore(0.5, 0.3)),
        "Duplication{1,2,3}": ChannelSpec(Duplication.uniform([1, 2, 3])),
    }


BUILTINS = builtin_specs()


@pytest.fixture(params=sorted(BUILTINS))
def builtin(request):
    return BUILTINS[request.param]


ACCEPTANCE_LINES = []


def acceptance_report(number, ok, detail):
    line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
