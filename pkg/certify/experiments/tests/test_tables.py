import pytest

from certify.experiments.tables import bounds_table, format_bound, format_mean_std, render_table


@pytest.mark.parametrize("value, applicable, expected", [
    (0.123456789, True, "0.12346"),
    (1.0, True, "1.00000"),
    (1.0000001, True, ">1"),
    (None, True, ">1"),
    (float("inf"), True, ">1"),
    (0.5, False, "-"),
])
def test_format_bound(value, applicable, expected):
    assert format_bound(value, applicable=applicable) == expected


def test_format_mean_std():
    assert format_mean_std({"mean": 0.25, "std": 0.0125}) == "0.25000 (0.01250)"
    assert format_mean_std({"mean": 1.5, "std": 0.1}, bound=True) == ">1"
    assert format_mean_std(None) == "-"


def test_render_table_aligns_columns():
    table = render_table(["a", "long header"], [["1", "2"], ["333", "4"]])
    lines = table.splitlines()
    assert len({len(line) for line in lines}) == 1
    assert lines[0].endswith("long header")


def test_bounds_table_marks_missing_and_vacuous_bounds():
    document = {
        "test_mv_loss": 0.1,
        "bounds": {
            "FO": {"value": 0.4},
            "CTD": {"value": None},
            "TND": {"value": 1.2},
        },
    }
    row = bounds_table(document, label="toy").splitlines()[2].split()
    assert row == ["toy", "0.10000", "0.40000", "-", "-", ">1", ">1", "-"]
