"""Write fixtures/charts/: five well-formed chart specs and five corrupted ones.

Goldens are built from real catalog data via make_chart_spec. Each corrupted
variant stacks several defects (wrong type, garbled values, stripped labels)
because a single defect cannot push the total under the pass line on its own.
The script scores every fixture, checks it lands on the intended side of the
line, and freezes the total into the file.
"""

import copy
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from copilot.catalog import FetchQuery                      # noqa: E402
from copilot.charts import ChartSpec, make_chart_spec       # noqa: E402
from copilot.evaluator import score_chart                   # noqa: E402
from copilot.sources import default_catalog                 # noqa: E402
from copilot.tables import ColumnSchema, DataTable          # noqa: E402

OUT = ROOT / "fixtures" / "charts"


def golden_specs(catalog) -> list[dict]:
    fixtures = []

    t = catalog.fetch("stock.daily", FetchQuery(
        time_range=("2019-01-01", "2019-03-13"),
        filters={"ticker": "Guizhou Maotai"},
        columns=["date", "close"],
    ))
    fixtures.append({
        "name": "golden_maotai_line",
        "intent": {
            "rewritten_text": "Plot the Guizhou Maotai closing price from 2019-01-01 to 2019-03-13",
            "objects": ["Guizhou Maotai"],
            "output_format": "line",
        },
        "labeled_table": t.to_json_obj(),
        "spec": make_chart_spec(
            t, "line", "date", ["close"],
            "Guizhou Maotai closing price, 2019-01-01 to 2019-03-13",
        ).to_json_obj(),
    })

    # wide table: one numeric column per index so series names match columns
    tickers = ["CSI 300", "GEM Index", "CSI 1000"]
    per = [
        catalog.fetch("stock.daily", FetchQuery(
            time_range=("2019-01-01", "2019-03-13"),
            filters={"ticker": name}, columns=["date", "close"],
        ))
        for name in tickers
    ]
    dates = per[0].column("date")
    assert all(t.column("date") == dates for t in per[1:])
    wide = DataTable(
        [ColumnSchema("date", "date")] + [ColumnSchema(n, "number", unit="CNY") for n in tickers],
        [list(dates)] + [list(t.column("close")) for t in per],
    )
    fixtures.append({
        "name": "golden_indexes_multi",
        "intent": {
            "rewritten_text": "Compare closing prices of CSI 300, GEM Index and CSI 1000 in early 2019",
            "objects": tickers,
            "output_format": "line",
        },
        "labeled_table": wide.to_json_obj(),
        "spec": make_chart_spec(
            wide, "line", "date", tickers,
            "CSI 300, GEM Index and CSI 1000 closing prices, early 2019",
        ).to_json_obj(),
    })

    t = catalog.fetch("stock.daily", FetchQuery(
        time_range=("2019-01-01", "2019-01-31"),
        filters={"ticker": "Guizhou Maotai"},
        columns=["date", "volume"],
    ))
    fixtures.append({
        "name": "golden_volume_bar",
        "intent": {
            "rewritten_text": "Show Guizhou Maotai daily trading volume for January 2019 as a bar chart",
            "objects": ["Guizhou Maotai"],
            "output_format": "bar",
        },
        "labeled_table": t.to_json_obj(),
        "spec": make_chart_spec(
            t, "bar", "date", ["volume"],
            "Guizhou Maotai daily volume, January 2019",
        ).to_json_obj(),
    })

    t = catalog.fetch("stock.daily", FetchQuery(
        time_range=("2019-02-01", "2019-03-13"),
        filters={"ticker": "Guizhou Maotai"},
    ))
    fixtures.append({
        "name": "golden_maotai_kline",
        "intent": {
            "rewritten_text": "Guizhou Maotai candlestick chart for February and March 2019",
            "objects": ["Guizhou Maotai"],
            "output_format": "kline",
        },
        "labeled_table": t.to_json_obj(),
        "spec": make_chart_spec(
            t, "kline", "date", [],
            "Guizhou Maotai daily candlesticks, 2019-02-01 to 2019-03-13",
        ).to_json_obj(),
    })

    t = catalog.fetch("econ.gdp", FetchQuery(
        time_range=("2019Q1", "2023Q4"),
        filters={"country": "China"},
        columns=["quarter", "gdp"],
        frequency="year",
    ))
    fixtures.append({
        "name": "golden_gdp_line",
        "intent": {
            "rewritten_text": "China annual GDP from 2019 to 2023",
            "objects": ["China", "GDP"],
            "output_format": "line",
        },
        "labeled_table": t.to_json_obj(),
        "spec": make_chart_spec(
            t, "line", "quarter", ["gdp"],
            "China annual GDP, 2019 to 2023",
        ).to_json_obj(),
    })
    return fixtures


def corrupted_variants(goldens: list[dict]) -> list[dict]:
    by_name = {g["name"]: g for g in goldens}

    def derive(src_name: str, new_name: str, edit) -> dict:
        g = by_name[src_name]
        spec = copy.deepcopy(g["spec"])
        edit(spec)
        return {
            "name": new_name,
            "intent": copy.deepcopy(g["intent"]),
            "labeled_table": copy.deepcopy(g["labeled_table"]),
            "spec": spec,
        }

    def wrong_type_blank_text(spec):
        spec["type"] = "bar"
        spec["title"] = ""
        spec["x_label"] = ""
        spec["y_label"] = ""
        for s in spec["series"]:
            s["y"] = [round(v * 1.7, 4) for v in s["y"]]

    def anonymous_flat_series(spec):
        spec["type"] = "bar"
        spec["title"] = ""
        for s in spec["series"]:
            s["name"] = ""
            s["color"] = "#888888"
            s["y"] = [round(v * 1.03, 4) for v in s["y"]]

    def no_series(spec):
        spec["series"] = []

    def broken_candles(spec):
        spec["title"] = ""
        spec["x_label"] = ""
        spec["y_label"] = ""
        for s, short in zip(spec["series"], ["o", "h", "l", "c"]):
            s["name"] = short
            s["color"] = "#444444"
            s["y"] = [round(v * 1.05, 4) for v in s["y"]]

    def hollow_values(spec):
        spec["type"] = "bar"
        spec["x_label"] = ""
        spec["y_label"] = ""
        for s in spec["series"]:
            s["name"] = ""
            s["y"] = [None] * len(s["y"])

    return [
        derive("golden_maotai_line", "mutated_maotai_line", wrong_type_blank_text),
        derive("golden_indexes_multi", "mutated_indexes_multi", anonymous_flat_series),
        derive("golden_volume_bar", "mutated_volume_bar", no_series),
        derive("golden_maotai_kline", "mutated_maotai_kline", broken_candles),
        derive("golden_gdp_line", "mutated_gdp_line", hollow_values),
    ]


def main() -> None:
    catalog = default_catalog(ROOT)
    fixtures = golden_specs(catalog)
    fixtures += corrupted_variants(fixtures)

    OUT.mkdir(parents=True, exist_ok=True)
    for fx in fixtures:
        score = score_chart(
            ChartSpec.from_json_obj(fx["spec"]),
            fx["intent"],
            DataTable.from_json_obj(fx["labeled_table"]),
        )
        should_pass = fx["name"].startswith("golden_")
        if score.passed != should_pass:
            raise SystemExit(
                f"{fx['name']}: total {score.total} lands on the wrong side "
                f"of the line ({score.subscores})"
            )
        fx["expected"] = {"pass": score.passed, "total": score.total}
        path = OUT / f"{fx['name']}.json"
        path.write_text(
            json.dumps(fx, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        print(f"{fx['name']:26s} total={score.total:3d} pass={score.passed}")


if __name__ == "__main__":
    main()
