"""Write the golden plan fixtures under fixtures/plans/.

The JSON layout here is the canonical serializer output: insertion-order
keys, 2-space indent, trailing newline. Plan round-trip tests compare
bytes against these files.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "plans"

SERIAL_MAOTAI = {
    "step1": {
        "arg1": ["Guizhou Maotai", "20180123", "20190313", "daily"],
        "function1": "get_stock_prices_data",
        "output1": "result1",
        "description1": "Fetch daily price data for Guizhou Maotai from 2018-01-23 to 2019-03-13",
    },
    "step2": {
        "arg1": ["result1", "close"],
        "function1": "calculate_stock_index",
        "output1": "result2",
        "description1": "Keep the date and closing price columns",
    },
    "step3": {
        "arg1": ["result2", "line", "Guizhou Maotai closing price, 2018-01-23 to 2019-03-13"],
        "function1": "plot_stock_data",
        "output1": "result3",
        "description1": "Draw the closing price as a line chart",
    },
}

PARALLEL_INDEXES = {
    "step1": {
        "arg1": ["CSI 300", "20190101", "20190313", "daily"],
        "function1": "get_stock_prices_data",
        "output1": "result1",
        "description1": "Fetch daily prices for CSI 300 this year",
        "arg2": ["GEM Index", "20190101", "20190313", "daily"],
        "function2": "get_stock_prices_data",
        "output2": "result2",
        "description2": "Fetch daily prices for GEM Index this year",
        "arg3": ["CSI 1000", "20190101", "20190313", "daily"],
        "function3": "get_stock_prices_data",
        "output3": "result3",
        "description3": "Fetch daily prices for CSI 1000 this year",
    },
    "step2": {
        "arg1": ["result1", "close"],
        "function1": "calculate_return",
        "output1": "result4",
        "description1": "Cumulative return of CSI 300 from closing prices",
        "arg2": ["result2", "close"],
        "function2": "calculate_return",
        "output2": "result5",
        "description2": "Cumulative return of GEM Index from closing prices",
        "arg3": ["result3", "close"],
        "function3": "calculate_return",
        "output3": "result6",
        "description3": "Cumulative return of CSI 1000 from closing prices",
    },
    "step3": {
        "arg1": [
            ["result4", "result5", "result6"],
            "line",
            "Cumulative return of CSI 300, GEM Index and CSI 1000 in 2019",
        ],
        "function1": "plot_stock_data",
        "output1": "result7",
        "description1": "Plot the three return series on one line chart",
    },
}

LOOP_TICKERS = {
    "step1": {
        "loop": {
            "over": [
                "Guizhou Maotai",
                "Ningde Times",
                "BYD",
                "Bank of Hangzhou",
                "Industrial Bank",
                "Vanke",
                "Gree Electric",
                "Midea Group",
                "Hikvision",
                "SF Holding",
            ],
            "var": "item",
            "body": [
                {
                    "arg1": ["item", "2023Q1", "2023Q4"],
                    "function1": "get_financial_indicators",
                    "output1": "result1",
                    "description1": "Fetch 2023 quarterly financials for one company",
                }
            ],
        }
    },
    "step2": {
        "arg1": ["result1", "ticker", "net_profit"],
        "function1": "summarize_group",
        "output1": "result2",
        "description1": "Total and average quarterly net profit per company",
    },
}

DIRECT_CODE = '''\
import pandas as pd
import matplotlib.pyplot as plt

# Load the full daily price table and restrict it to the requested window.
prices = pd.read_csv("fixtures/stocks_daily.csv", parse_dates=["date"])
mask = (
    (prices["ticker"] == "Guizhou Maotai")
    & (prices["date"] >= "2018-01-23")
    & (prices["date"] <= "2019-03-13")
)
window = prices.loc[mask].sort_values("date").reset_index(drop=True)
if window.empty:
    raise SystemExit("no rows for Guizhou Maotai in the requested window")

# Keep only the closing price series.
closing = window[["date", "close"]].copy()
closing["close"] = closing["close"].astype(float)

# Render the line chart and save it next to the data.
fig, ax = plt.subplots(figsize=(10, 5))
ax.plot(closing["date"], closing["close"], color="tab:red", linewidth=1.2)
ax.set_title("Guizhou Maotai closing price, 2018-01-23 to 2019-03-13")
ax.set_xlabel("date")
ax.set_ylabel("close (CNY)")
ax.grid(True, alpha=0.3)
fig.autofmt_xdate()
fig.tight_layout()
fig.savefig("maotai_close.png", dpi=150)

# Also print a small preview so the caller can sanity-check the data.
print(closing.head(10).to_string(index=False))
print(f"rows: {len(closing)}")
'''


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    plans = {
        "serial_maotai.json": SERIAL_MAOTAI,
        "parallel_indexes.json": PARALLEL_INDEXES,
        "loop_tickers.json": LOOP_TICKERS,
    }
    for name, plan in plans.items():
        (OUT / name).write_text(
            json.dumps(plan, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    (OUT / "serial_maotai_direct.py.txt").write_text(DIRECT_CODE, encoding="utf-8")
    for p in sorted(OUT.iterdir()):
        print(p.name)


if __name__ == "__main__":
    main()
