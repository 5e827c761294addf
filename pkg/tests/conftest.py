import pytest

from pcegrid.grid.case import parse_case


def case_text(buses, gens, branches, base_mva=100):
    """MATPOWER text for a hand-built case.

    buses: (id, type, pd); gens: (bus, pg, pmax[, pmin[, status]]);
    branches: (from, to, x, rate[, status]).
    """
    lines = ["function mpc = fixture", f"mpc.baseMVA = {base_mva};", "mpc.bus = ["]
    for bid, btype, pd in buses:
        lines.append(f"\t{bid}\t{btype}\t{pd}\t0\t0\t0\t1\t1\t0\t345\t1\t1.1\t0.9;")
    lines += ["];", "mpc.gen = ["]
    for g in gens:
        bus, pg, pmax, *rest = g
        pmin = rest[0] if rest else 0
        status = rest[1] if len(rest) > 1 else 1
        lines.append(f"\t{bus}\t{pg}\t0\t100\t-100\t1\t100\t{status}\t{pmax}\t{pmin};")
    lines += ["];", "mpc.branch = ["]
    for br in branches:
        f, t, x, rate, status = (tuple(br) + (1,))[:5]
        lines.append(f"\t{f}\t{t}\t0\t{x}\t0\t{rate}\t{rate}\t{rate}\t0\t0\t{status}\t-360\t360;")
    lines.append("];")
    return "\n".join(lines) + "\n"


@pytest.fixture
def build_case():
    def build(buses, gens, branches, base_mva=100):
        return parse_case(case_text(buses, gens, branches, base_mva))

    return build


# -- acceptance reporting ------------------------------------------------------

_CRITERIA: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture
def criterion():
    """Record the verdict of a numbered acceptance criterion for the summary."""

    def record(number: int, title: str, passed: bool, detail: str):
        _CRITERIA[number] = (bool(passed), title, detail)
        print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, title, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}: {detail}")
