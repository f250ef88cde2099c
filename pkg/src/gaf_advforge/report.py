"""Render experiment report JSON as aligned text tables and plot-ready CSV."""

import csv
import io
from pathlib import Path

from .candlestick import PatternLabel


def _table(title, header, rows, footer=None):
    cells = [header] + rows + ([footer] if footer else [])
    widths = [max(len(str(r[i])) for r in cells) for i in range(len(header))]
    fmt = lambda r: "  ".join(str(v).rjust(w) for v, w in zip(r, widths)).rstrip()  # noqa: E731
    rule = "-" * len(fmt(header))
    lines = [title, rule, fmt(header), rule]
    lines += [fmt(r) for r in rows]
    if footer:
        lines += [rule, fmt(footer)]
    lines.append(rule)
    return "\n".join(lines)


def _num(v, digits):
    return "n/a" if v is None else f"{v:.{digits}f}"


def descriptive_table(doc) -> str:
    d = doc["descriptive"]
    rows = [
        [f"{arm} examples", _num(100 * d[arm]["mean"], 2), _num(100 * d[arm]["std"], 4)]
        for arm in ("clean", "merged")
    ]
    return _table(
        "Table 1. Descriptive statistics of validation accuracy",
        ["Model", "Mean of Accuracies (%)", "Std of Accuracies (%)"],
        rows,
    )


def ttest_table(doc) -> str:
    t = doc["ttest"]
    row = [
        t.get("h0", "mu_clean = mu_merge"),
        str(t["n"]),
        _num(t.get("mean"), 4),
        _num(t.get("std"), 4),
        _num(t.get("t"), 4),
        _num(t.get("p"), 4),
        str(t["df"]),
    ]
    return _table(
        "Table 2. Dependent paired t-test (two-tailed)",
        ["H0", "N", "Mean", "Std", "T-value", "P-value", "df"],
        [row],
    )


def attack_table(doc, arm, number) -> str:
    a = doc["attack"][arm]
    rows = [
        [str(r["label"]), PatternLabel(r["label"]).name.lower(), str(r["success"]),
         str(r["total"]), f"{100 * r['rate']:.2f}"]
        for r in a["per_label"]
    ]
    best = doc.get("best_models", {}).get(arm, {})
    note = f" (model accuracy {100 * best['accuracy']:.2f}%)" if "accuracy" in best else ""
    return _table(
        f"Table {number}. Attack success rate, best model trained on {arm} examples{note}",
        ["Label", "Pattern", "Success", "Total", "Percent (%)"],
        rows,
        footer=["Avg", "", "", "", f"{100 * a['average']:.2f}"],
    )


def render_tables(doc) -> str:
    parts = [
        descriptive_table(doc),
        ttest_table(doc),
        attack_table(doc, "clean", 3),
        attack_table(doc, "merged", 4),
    ]
    return "\n\n".join(parts) + "\n"


def accuracy_csv(doc) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "clean_accuracy", "merged_accuracy"])
    for r in doc.get("runs", []):
        w.writerow([r["run"], repr(r["clean_accuracy"]), repr(r["merged_accuracy"])])
    return buf.getvalue()


def attack_csv(doc) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "clean_success", "clean_total", "clean_rate",
                "merged_success", "merged_total", "merged_rate"])
    clean = {r["label"]: r for r in doc["attack"]["clean"]["per_label"]}
    merged = {r["label"]: r for r in doc["attack"]["merged"]["per_label"]}
    for lab in sorted(clean):
        c, m = clean[lab], merged[lab]
        w.writerow([lab, c["success"], c["total"], repr(c["rate"]),
                    m["success"], m["total"], repr(m["rate"])])
    return buf.getvalue()


def write_report(doc, out_dir) -> dict:
    """Write tables.txt, accuracies.csv and attack_rates.csv into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "tables": out / "tables.txt",
        "accuracies": out / "accuracies.csv",
        "attack_rates": out / "attack_rates.csv",
    }
    paths["tables"].write_text(render_tables(doc))
    paths["accuracies"].write_text(accuracy_csv(doc))
    paths["attack_rates"].write_text(attack_csv(doc))
    return paths
