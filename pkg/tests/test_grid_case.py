import re

import numpy as np
import pytest

from pcegrid.errors import ParseError
from pcegrid.grid.case import bundled_case_text, load_case, parse_case
from conftest import case_text

CASE39 = bundled_case_text()


def count_rows(text, table):
    """Independent counter: data lines between ``mpc.<table> = [`` and ``];``."""
    inside, n = False, 0
    for line in text.splitlines():
        stripped = line.split("%")[0].strip()
        if stripped.startswith(f"mpc.{table} = ["):
            inside = True
            continue
        if inside and stripped.startswith("]"):
            return n
        if inside and stripped:
            n += 1
    raise AssertionError(f"table {table} not found")


def line_of(text, pattern):
    for i, line in enumerate(text.splitlines(), start=1):
        if re.search(pattern, line):
            return i
    raise AssertionError(pattern)


def test_bundled_counts():
    case = load_case()
    assert (case.n_bus, case.n_branch, case.n_gen) == (39, 46, 10)
    assert count_rows(CASE39, "bus") == 39
    assert count_rows(CASE39, "branch") == 46
    assert count_rows(CASE39, "gen") == 10
    assert case.base_mva == 100.0
    assert case.total_demand() == pytest.approx(6254.23)


def test_bundled_values_spot_check():
    case = load_case()
    assert case.branch_endpoints(0) == (1, 2)
    assert case.reactance[0] == 0.0411 and case.rating[0] == 600
    assert int(case.bus_id[case.gen_bus[0]]) == 30
    assert np.count_nonzero(case.bus_type == 3) == 1


def test_minimal_two_bus_case():
    case = parse_case(case_text([(1, 3, 0), (2, 1, 100)], [(1, 100, 200)], [(1, 2, 0.1, 150)]))
    np.testing.assert_array_equal(case.demand, [0, 100])
    np.testing.assert_array_equal(case.rating, [150])
    assert case.gen_pmax[0] == 200


def test_zero_rating_means_unlimited():
    case = parse_case(case_text([(1, 3, 0), (2, 1, 10)], [(1, 10, 20)], [(1, 2, 0.1, 0)]))
    assert np.isinf(case.rating[0])


def test_arbitrary_bus_ids_and_comments():
    text = case_text([(10, 3, 0), (42, 1, 5)], [(10, 5, 10)], [(10, 42, 0.2, 50)])
    text = text.replace("mpc.bus = [", "% a comment line\nmpc.bus = [  % trailing comment")
    case = parse_case(text)
    assert case.branch_endpoints(0) == (10, 42)
    assert case.bus_index(42) == 1


def test_dangling_branch_endpoint():
    text = case_text([(1, 3, 0), (2, 1, 10)], [(1, 10, 20)], [(1, 3, 0.1, 50)])
    with pytest.raises(ParseError) as info:
        parse_case(text)
    assert info.value.line == line_of(text, r"^\t1\t3\t0\t0.1")


def _replace_line(text, lineno, new):
    lines = text.splitlines()
    lines[lineno - 1] = new
    return "\n".join(lines) + "\n"


def _edit_line(text, lineno, old, new):
    lines = text.splitlines()
    assert old in lines[lineno - 1]
    lines[lineno - 1] = lines[lineno - 1].replace(old, new, 1)
    return "\n".join(lines) + "\n"


def _drop_table(text, table):
    start = line_of(text, rf"^mpc\.{table} = \[")
    lines = text.splitlines()
    end = next(i for i in range(start, len(lines)) if lines[i].startswith("];"))
    kept = lines[: start - 1] + lines[end + 1:]
    return "\n".join(kept) + "\n", len(kept)


BUS5 = line_of(CASE39, r"^mpc\.bus = \[") + 5
GEN3 = line_of(CASE39, r"^mpc\.gen = \[") + 3
BRANCH7 = line_of(CASE39, r"^mpc\.branch = \[") + 7


def _mutations():
    no_branch, n_lines = _drop_table(CASE39, "branch")
    bus_end = line_of(CASE39, r"^mpc\.gen = \[") - 4  # '];' closing the bus table
    assert CASE39.splitlines()[bus_end - 1].startswith("];")
    return {
        "missing branch table": (no_branch, n_lines),
        "non-numeric bus entry": (_edit_line(CASE39, BUS5, "\t1\t", "\tx1\t"), BUS5),
        "short branch row": (_replace_line(CASE39, BRANCH7, "\t1\t2\t0.1;"), BRANCH7),
        "branch to unknown bus": (
            _replace_line(CASE39, BRANCH7, "\t1\t99\t0\t0.1\t0\t100\t100\t100\t0\t0\t1\t-360\t360;"),
            BRANCH7,
        ),
        "generator at unknown bus": (
            _replace_line(CASE39, GEN3, "\t77\t100\t0\t100\t-100\t1\t100\t1\t200\t0" + "\t0" * 11 + ";"),
            GEN3,
        ),
        "duplicate bus id": (
            _replace_line(CASE39, BUS5, CASE39.splitlines()[BUS5 - 2]),
            BUS5,
        ),
        "zero reactance": (
            _replace_line(CASE39, BRANCH7, "\t1\t2\t0\t0\t0\t100\t100\t100\t0\t0\t1\t-360\t360;"),
            BRANCH7,
        ),
        "invalid bus type": (_replace_line(CASE39, BUS5, "\t5\t7\t0\t0\t0\t0\t1\t1\t0\t345\t1\t1.1\t0.9;"), BUS5),
        "ragged bus row": (_edit_line(CASE39, BUS5, ";", "\t3;"), BUS5),
        "negative rating": (
            _replace_line(CASE39, BRANCH7, "\t1\t2\t0\t0.1\t0\t-5\t100\t100\t0\t0\t1\t-360\t360;"),
            BRANCH7,
        ),
        "unterminated bus table": (_replace_line(CASE39, bus_end, ""), line_of(CASE39, r"^mpc\.gen = \[")),
    }


MUTATIONS = _mutations()


@pytest.mark.parametrize("name", sorted(MUTATIONS))
def test_malformed_variants_report_line(name):
    text, expected = MUTATIONS[name]
    with pytest.raises(ParseError) as info:
        parse_case(text)
    assert info.value.line == expected
    assert str(info.value).startswith(f"line {expected}: ")


def test_unclosed_final_table_reports_its_start():
    text = case_text([(1, 3, 0), (2, 1, 10)], [(1, 10, 20)], [(1, 2, 0.1, 50)])
    text = text.rstrip().rsplit("\n", 1)[0] + "\n"  # drop the closing '];'
    with pytest.raises(ParseError) as info:
        parse_case(text)
    assert info.value.line == line_of(text, r"^mpc\.branch = \[")


def test_empty_table():
    text = case_text([(1, 3, 0)], [(1, 0, 10)], [])
    with pytest.raises(ParseError) as info:
        parse_case(text)
    assert info.value.line == line_of(text, r"^mpc\.branch = \[")


def test_case_arrays_are_read_only():
    case = load_case()
    with pytest.raises(ValueError):
        case.demand[0] = 1.0
    out = case.with_branches_out([0, 1])
    assert not out.branch_status[0] and case.branch_status[0]
