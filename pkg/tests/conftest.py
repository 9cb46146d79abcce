import pytest

from wiredweights.model import generate_synthetic, preset


@pytest.fixture(scope="session")
def tiny_bundle():
    return generate_synthetic(preset("tiny"), seed=3)


@pytest.fixture(scope="session")
def slang():
    """Return a function mapping Verilog text to its list of compile errors."""
    pyslang = pytest.importorskip("pyslang")
    from pyslang.ast import Compilation
    from pyslang.syntax import SyntaxTree

    def errors(text):
        c = Compilation()
        c.addSyntaxTree(SyntaxTree.fromText(text))
        return [pyslang.DiagnosticEngine.reportAll(c.sourceManager, [d])
                for d in c.getAllDiagnostics() if d.isError()]

    return errors


_VERDICTS = []


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict; prints a PASS/FAIL line and fails the test on FAIL."""
    seen = []

    def record(number, title, checks):
        failed = [name for name, ok in checks if not ok]
        line = f"{'FAIL' if failed else 'PASS'}  criterion {number:2d}  {title}"
        if failed:
            line += "  (failed: " + "; ".join(failed) + ")"
        _VERDICTS.append((number, line))
        seen.append(number)
        print(line)
        assert not failed, line

    yield record
    if not seen:
        _VERDICTS.append((99, f"FAIL  {request.node.name}  (raised before a verdict)"))


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
