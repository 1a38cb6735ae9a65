"""Write fixtures/eval_pairs.jsonl: 30 hand-labeled table pairs.

15 labeled equal, 15 unequal. The verdicts here are the labels the
comparison code must reproduce; the script does not consult it.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "eval_pairs.jsonl"

PAIRS = [
    # -- equal -------------------------------------------------------------
    ("eq-identical", "equal",
     "date,close\n2019-03-12,27.5\n2019-03-13,28.1\n",
     "date,close\n2019-03-12,27.5\n2019-03-13,28.1\n",
     "byte-identical tables"),
    ("eq-col-order", "equal",
     "date,close,volume\n2019-03-12,27.5,100\n2019-03-13,28.1,90\n",
     "volume,date,close\n100,2019-03-12,27.5\n90,2019-03-13,28.1\n",
     "columns shuffled"),
    ("eq-row-order", "equal",
     "date,v\n2019-01-02,1\n2019-01-03,2\n2019-01-04,3\n",
     "date,v\n2019-01-04,3\n2019-01-02,1\n2019-01-03,2\n",
     "rows shuffled, date key"),
    ("eq-within-rtol", "equal",
     "k,v\na,17.8\n",
     "k,v\na,17.8000001\n",
     "relative difference under 1e-6"),
    ("eq-trillion-unit", "equal",
     "k,v\na,17.8 trillion\n",
     "k,v\na,17800000000000\n",
     "magnitude word vs plain number"),
    ("eq-percent-unit", "equal",
     "k,v\na,5.45 %\nb,3.20 %\n",
     "k,v\na,0.0545\nb,0.032\n",
     "percent marker vs fraction"),
    ("eq-date-forms", "equal",
     "date,v\n2019/3/13,1\n2019/3/14,2\n",
     "date,v\n20190313,1\n20190314,2\n",
     "slash vs compact dates"),
    ("eq-quarter-forms", "equal",
     "quarter,v\n2018-Q1,5\n2018-Q2,6\n",
     "quarter,v\n2018Q1,5\n2018Q2,6\n",
     "dashed vs compact quarters"),
    ("eq-int-float", "equal",
     "k,v\na,5\nb,12\n",
     "k,v\na,5.0\nb,12.0\n",
     "integer vs float rendering"),
    ("eq-empty-cells", "equal",
     "k,v\na,\nb,2\n",
     "k,v\na,\nb,2\n",
     "nulls on both sides"),
    ("eq-both-shuffles", "equal",
     "quarter,country,gdp\n2018Q1,China,22582.2\n2018Q2,China,23006.5\n2018Q1,USA,35969.0\n",
     "gdp,quarter,country\n35969.0,2018Q1,USA\n22582.2,2018Q1,China\n23006.5,2018Q2,China\n",
     "rows and columns shuffled, two key columns"),
    ("eq-negative", "equal",
     "k,v\na,-3.25\nb,-0.001\n",
     "k,v\na,-3.2500000001\nb,-0.001\n",
     "negative values within tolerance"),
    ("eq-wan-unit", "equal",
     "k,v\na,3.2 万\n",
     "k,v\na,32000\n",
     "ten-thousand magnitude word"),
    ("eq-scientific", "equal",
     "k,v\na,1.5e3\nb,2e-2\n",
     "k,v\na,1500\nb,0.02\n",
     "scientific notation"),
    ("eq-year-key", "equal",
     "year,gdp\n2023,17.8\n2022,17.9\n2021,17.8\n2020,14.6\n",
     "year,gdp\n2020,14.6\n2021,17.8\n2022,17.9\n2023,17.8\n",
     "year column acts as row key"),
    # -- unequal -----------------------------------------------------------
    ("ne-missing-2020", "unequal",
     "year,gdp\n2023,17.8\n2022,17.9\n2021,17.8\n",
     "year,gdp\n2023,17.8\n2022,17.9\n2021,17.8\n2020,14.6\n",
     "prediction missing the 2020 row"),
    ("ne-value-off", "unequal",
     "k,v\na,17.8\n",
     "k,v\na,17.81\n",
     "plain value mismatch"),
    ("ne-missing-column", "unequal",
     "date,close\n2019-03-13,28.1\n",
     "date,close,volume\n2019-03-13,28.1,90\n",
     "volume column absent"),
    ("ne-extra-column", "unequal",
     "date,close,volume\n2019-03-13,28.1,90\n",
     "date,close\n2019-03-13,28.1\n",
     "unexpected volume column"),
    ("ne-extra-row", "unequal",
     "date,v\n2019-01-02,1\n2019-01-03,2\n",
     "date,v\n2019-01-02,1\n",
     "extra trailing row"),
    ("ne-wrong-date", "unequal",
     "date,v\n2019-03-12,1\n",
     "date,v\n2019-03-13,1\n",
     "key off by one day"),
    ("ne-text-cell", "unequal",
     "k,country\na,China\n",
     "k,country\na,Chinese mainland\n",
     "text cells differ"),
    ("ne-row-count", "unequal",
     "v,w\n1,2\n1,3\n",
     "v,w\n1,2\n1,3\n1,4\n",
     "no usable key, row counts differ"),
    ("ne-over-rtol", "unequal",
     "k,v\na,17.8\n",
     "k,v\na,17.8004\n",
     "just over the 1e-6 relative tolerance"),
    ("ne-null-vs-value", "unequal",
     "k,v\na,\n",
     "k,v\na,2\n",
     "null against a number"),
    ("ne-unit-mismatch", "unequal",
     "k,v\na,17.8 trillion\n",
     "k,v\na,17800000000\n",
     "trillion against billions magnitude"),
    ("ne-unscaled-percent", "unequal",
     "k,v\na,5.45\n",
     "k,v\na,0.0545\n",
     "bare number lacks the percent marker"),
    ("ne-swapped-rows", "unequal",
     "date,v\n2019-01-02,2\n2019-01-03,1\n",
     "date,v\n2019-01-02,1\n2019-01-03,2\n",
     "values swapped between keyed rows"),
    ("ne-renamed-column", "unequal",
     "year,gdp_total\n2023,17.8\n",
     "year,gdp\n2023,17.8\n",
     "column name drifted"),
    ("ne-wrong-quarter", "unequal",
     "quarter,v\n2018Q1,5\n",
     "quarter,v\n2018Q2,5\n",
     "quarter key mismatch"),
]


def main() -> None:
    OUT.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for pid, verdict, predicted, labeled, note in PAIRS:
        lines.append(json.dumps(
            {"id": pid, "verdict": verdict, "predicted": predicted, "labeled": labeled, "note": note},
            ensure_ascii=False,
        ))
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    equal = sum(1 for p in PAIRS if p[1] == "equal")
    print(f"{len(PAIRS)} pairs ({equal} equal / {len(PAIRS) - equal} unequal) -> {OUT}")


if __name__ == "__main__":
    main()
