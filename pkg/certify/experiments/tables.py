"""Aligned text tables for bound, optimization and experiment reports."""
import math

from certify.constants import ALL_BOUNDS

NOT_APPLICABLE = "-"
ABOVE_ONE = ">1"


def format_loss(value) -> str:
    if value is None:
        return NOT_APPLICABLE
    return f"{value:.5f}"


def format_bound(value, applicable: bool = True) -> str:
    """Five decimals; vacuous or above-one values as ">1", inapplicable ones as "-"."""
    if not applicable:
        return NOT_APPLICABLE
    if value is None or not math.isfinite(value) or value > 1.0:
        return ABOVE_ONE
    return f"{value:.5f}"


def format_mean_std(summary: dict, bound: bool = False) -> str:
    if summary is None:
        return NOT_APPLICABLE
    mean, std = summary["mean"], summary["std"]
    text = format_bound(mean) if bound else format_loss(mean)
    if text == ABOVE_ONE or std is None:
        return text
    return f"{text} ({std:.5f})"


def render_table(headers: list, rows: list) -> str:
    widths = [max(len(str(cell)) for cell in column) for column in zip(headers, *rows)]
    lines = ["  ".join(str(cell).rjust(width) for cell, width in zip(headers, widths))]
    lines.append("  ".join("-" * width for width in widths))
    for row in rows:
        lines.append("  ".join(str(cell).rjust(width) for cell, width in zip(row, widths)))
    return "\n".join(lines) + "\n"


def bounds_table(document: dict, label: str = "") -> str:
    """Test loss of the uniform vote followed by every bound column; missing bounds render as "-"."""
    bounds = document["bounds"]
    headers = ["dataset", "L(MV_u)", *ALL_BOUNDS]
    row = [label or "-", format_loss(document.get("test_mv_loss"))]
    for name in ALL_BOUNDS:
        entry = bounds.get(name)
        row.append(format_bound(entry["value"] if entry else None, applicable=entry is not None))
    return render_table(headers, [row])


def optimize_table(document: dict, label: str = "") -> str:
    """
    Test losses at uniform rho and at each optimum, then the optimized bounds
    and the optimal weights in decreasing order.
    """
    optimized = document["optimized"]
    headers = ["dataset", "L(MV_u)"] + [f"L(MV_rho*_{name})" for name in optimized]
    row = [label or "-", format_loss(document["uniform"]["test_mv_loss"])]
    row += [format_loss(entry["test_mv_loss"]) for entry in optimized.values()]
    lines = [render_table(headers, [row])]

    bound_rows = []
    for name, entry in optimized.items():
        uniform_entry = document["uniform"]["report"]["bounds"].get(name)
        bound_rows.append([
            name,
            format_bound(uniform_entry["value"] if uniform_entry else None, applicable=uniform_entry is not None),
            format_bound(entry["final_kl_bound"]),
            str(entry["iterations"]),
        ])
    lines.append(render_table(["bound", "uniform", "optimized", "iterations"], bound_rows))

    for name, entry in optimized.items():
        weights = ", ".join(f"{weight:.4f}" for weight in entry["sorted_rho"])
        lines.append(f"rho*_{name} (decreasing): {weights}\n")
    return "\n".join(lines)


def experiment_table(document: dict) -> str:
    """One row per (bagging mode, labeled fraction) cell with mean (std) over the repetitions."""
    bounds = document["settings"]["bounds"]
    optimize = document["settings"]["optimize"]
    headers = ["bagging", "r", "L(MV_u)", *bounds]
    for name in optimize:
        headers += [f"{name}*", f"L(MV_rho*_{name})"]
    rows = []
    for cell in document["cells"]:
        summary = cell["summary"]
        row = [cell["bagging"], f"{cell['labeled_fraction']:g}", format_mean_std(summary["test_mv_loss"])]
        row += [format_mean_std(summary["bounds"].get(name), bound=True) for name in bounds]
        for name in optimize:
            optimum = summary["optimized"][name]
            row += [format_mean_std(optimum["bound"], bound=True), format_mean_std(optimum["test_mv_loss"])]
        rows.append(row)
    return render_table(headers, rows)
