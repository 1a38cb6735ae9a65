"""Deterministic stand-in for both model tiers, used when recording tapes.

The test suite replays providers from JSON tapes. This module is the
brain the recorder runs against: every reply is a pure function of the
prompt text and the bundled catalog, so re-recording produces the same
tapes byte for byte.

The explorer side designs a fixed interface set. Two drafts carry
planted bugs (a missing parenthesis in the moving-average body, a
misspelled column in the CPI fetch) so the recorded sessions exercise
the repair loop; the corresponding repair prompts answer with the fixed
bodies. The deployer side plans each known request against whatever
interface listing the prompt carries, falling back to __raw_code__ for
capabilities the listing cannot cover.
"""

from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

CLOCK = "2019-03-13"
PH = "__table__"  # matches the forge's table placeholder

# loop order used by the golden loop plan
COMPANIES = [
    "Guizhou Maotai", "Ningde Times", "BYD", "Bank of Hangzhou",
    "Industrial Bank", "Vanke", "Gree Electric", "Midea Group",
    "Hikvision", "SF Holding",
]


class RuleMiss(Exception):
    """No scripted reply for the prompt; recording must stop loudly."""


# -- canonical interface set -------------------------------------------------

GDP_BODY = (
    'src := "econ.gdp";\n'
    "t := fetch(src, range(start_date, end_date));\n"
    "mine := filter(t, country == region);\n"
    "return mine\n"
)
CPI_BODY = GDP_BODY.replace("econ.gdp", "econ.cpi")
CPI_TYPO_BODY = CPI_BODY.replace("country == region", "countri == region")
MACRO_BODY = (
    'src := "econ." + indicator;\n'
    "t := fetch(src, range(start_date, end_date));\n"
    "mine := filter(t, country == region);\n"
    "return mine\n"
)

MA_GOOD_BODY = (
    "vals := column(table, value_col);\n"
    "ma := moving_avg(vals, window);\n"
    'out := with_col(table, "ma", ma);\n'
    "return out\n"
)
MA_BROKEN_BODY = MA_GOOD_BODY.replace(
    "vals := column(table, value_col);", "vals := column(table, value_col;"
)

PLOT_STOCK_BODY = (
    "merged := concat(tables);\n"
    "c := make_chart(merged, chart_type, key_col(merged), "
    "numeric_cols(merged), title);\n"
    "return c\n"
)


def _single_plot_body(kind: str) -> str:
    return (
        f'c := make_chart(table, "{kind}", key_col(table), '
        "numeric_cols(table), title);\n"
        "return c\n"
    )


def _p(name: str, semantic_type: str, description: str) -> dict:
    return {"name": name, "semantic_type": semantic_type, "description": description}


INTERFACES = {
    "get_stock_prices_data": {
        "params": [
            _p("stock_name", "text", "stock display name"),
            _p("start_date", "date", "window start"),
            _p("end_date", "date", "window end"),
            _p("frequency", "text", "daily or weekly sampling"),
        ],
        "description": "Fetch price rows for one stock over a date range "
                       "at a chosen sampling frequency.",
        "category": "data_acquisition",
        "task_tags": ["stock"],
        "body": 't := fetch("stock.daily", range(start_date, end_date), frequency);\n'
                "mine := filter(t, ticker == stock_name);\n"
                "return mine\n",
    },
    "get_fund_nav_data": {
        "params": [
            _p("fund_name", "text", "fund display name"),
            _p("start_date", "date", "window start"),
            _p("end_date", "date", "window end"),
        ],
        "description": "Fetch net asset value rows for one fund over a date range.",
        "category": "data_acquisition",
        "task_tags": ["fund"],
        "body": 't := fetch("fund.nav", range(start_date, end_date));\n'
                "mine := filter(t, fund == fund_name);\n"
                "return mine\n",
    },
    "get_financial_indicators": {
        "params": [
            _p("company", "text", "company display name"),
            _p("start_quarter", "quarter", "first quarter"),
            _p("end_quarter", "quarter", "last quarter"),
        ],
        "description": "Fetch quarterly financial indicator rows for one "
                       "company over a quarter range.",
        "category": "data_acquisition",
        "task_tags": ["corporation"],
        "body": 't := fetch("corp.financials", range(start_quarter, end_quarter));\n'
                "mine := filter(t, ticker == company);\n"
                "return mine\n",
    },
    "query_gdp_data": {
        "params": [
            _p("region", "text", "country name"),
            _p("start_date", "date", "window start"),
            _p("end_date", "date", "window end"),
        ],
        "description": "Fetch rows of the gdp macro indicator series for "
                       "one region over a time range.",
        "category": "data_acquisition",
        "task_tags": ["other"],
        "body": GDP_BODY,
    },
    "query_cpi_data": {
        "params": [
            _p("region", "text", "country name"),
            _p("start_date", "date", "window start"),
            _p("end_date", "date", "window end"),
        ],
        "description": "Fetch rows of the cpi macro indicator series for "
                       "one region over a time range.",
        "category": "data_acquisition",
        "task_tags": ["other"],
        "body": CPI_BODY,
    },
    "get_macro_data": {
        "params": [
            _p("indicator", "text", "series name, gdp or cpi"),
            _p("region", "text", "country name"),
            _p("start_date", "date", "window start"),
            _p("end_date", "date", "window end"),
        ],
        "description": "Fetch rows of one macro indicator series for one "
                       "region over a time range.",
        "category": "data_acquisition",
        "task_tags": ["other"],
        "body": MACRO_BODY,
    },
    "get_financial_news": {
        "params": [
            _p("topic", "text", "news tag to keep"),
            _p("start_date", "date", "window start"),
            _p("end_date", "date", "window end"),
        ],
        "description": "Fetch financial news rows tagged with one topic "
                       "over a date range.",
        "category": "data_acquisition",
        "task_tags": ["stock", "other"],
        "body": 't := fetch("news.live", range(start_date, end_date));\n'
                "mine := filter(t, tag == topic);\n"
                "return mine\n",
    },
    "calculate_return": {
        "params": [
            _p("table", "table", "input rows"),
            _p("value_col", "text", "price column"),
        ],
        "description": "Append the cumulative return series of one numeric "
                       "column to the table.",
        "category": "index_calculation",
        "task_tags": ["stock", "fund"],
        "body": "vals := column(table, value_col);\n"
                "cum := cum_return(vals);\n"
                'out := with_col(table, "cum_return", cum);\n'
                "return out\n",
    },
    "calculate_moving_average": {
        "params": [
            _p("table", "table", "input rows"),
            _p("value_col", "text", "column to smooth"),
            _p("window", "number", "trailing span"),
        ],
        "description": "Append the trailing moving average of one numeric "
                       "column to the table.",
        "category": "index_calculation",
        "task_tags": ["stock", "fund"],
        "body": MA_GOOD_BODY,
    },
    "calculate_stock_index": {
        "params": [
            _p("table", "table", "input rows"),
            _p("index_name", "text", "indicator column to keep"),
        ],
        "description": "Keep the key column and one named indicator column "
                       "of a table.",
        "category": "index_calculation",
        "task_tags": ["stock", "fund"],
        "body": "k := key_col(table);\n"
                "out := select(table, [k, index_name]);\n"
                "return out\n",
    },
    "predict_indicator": {
        "params": [
            _p("table", "table", "history rows"),
            _p("value_col", "text", "column to forecast"),
            _p("horizon", "number", "steps ahead"),
        ],
        "description": "Forecast the next values of one numeric column and "
                       "return them as a table.",
        "category": "index_calculation",
        "task_tags": ["stock", "fund", "corporation", "other"],
        "body": "vals := column(table, value_col);\n"
                "pred := predict_next(vals, horizon);\n"
                'out := make_table("predicted", pred);\n'
                "return out\n",
    },
    "select_table_columns": {
        "params": [
            _p("table", "table", "input rows"),
            _p("cols", "list", "column names to keep"),
        ],
        "description": "Keep only the named columns of a table.",
        "category": "table_manipulation",
        "task_tags": ["stock", "fund", "corporation", "other"],
        "body": "out := select(table, cols);\nreturn out\n",
    },
    "rank_by_column": {
        "params": [
            _p("table", "table", "input rows"),
            _p("sort_col", "text", "column to rank by"),
            _p("k", "number", "rows to keep"),
        ],
        "description": "Keep the k rows with the largest values of one column.",
        "category": "table_manipulation",
        "task_tags": ["stock", "fund", "corporation", "other"],
        "body": 'out := topk(table, sort_col, k, "desc");\nreturn out\n',
    },
    "summarize_group": {
        "params": [
            _p("table", "table", "input rows"),
            _p("group_col", "text", "grouping column"),
            _p("value_col", "text", "numeric column to aggregate"),
        ],
        "description": "Total and average of one numeric column per value "
                       "of a grouping column.",
        "category": "table_manipulation",
        "task_tags": ["corporation", "fund"],
        "body": "groups := column(table, group_col);\n"
                "vals := column(table, value_col);\n"
                'flat := make_table("group", groups, "value", vals);\n'
                'out := groupby_agg(flat, ["group"], total := sum(value), '
                "average := avg(value));\n"
                "return out\n",
    },
    "plot_line_chart": {
        "params": [
            _p("table", "table", "rows to draw"),
            _p("title", "text", "chart title"),
        ],
        "description": "Draw a chart of the numeric columns in a table "
                       "against its time axis, as line type.",
        "category": "visualization",
        "task_tags": ["stock", "fund", "corporation", "other"],
        "body": _single_plot_body("line"),
    },
    "plot_kline_chart": {
        "params": [
            _p("table", "table", "rows to draw"),
            _p("title", "text", "chart title"),
        ],
        "description": "Draw a chart of the numeric columns in a table "
                       "against its time axis, as kline candles.",
        "category": "visualization",
        "task_tags": ["stock"],
        "body": _single_plot_body("kline"),
    },
    "plot_bar_chart": {
        "params": [
            _p("table", "table", "rows to draw"),
            _p("title", "text", "chart title"),
        ],
        "description": "Draw a chart of the numeric columns in a table "
                       "against its time axis, as bar columns.",
        "category": "visualization",
        "task_tags": ["stock"],
        "body": _single_plot_body("bar"),
    },
    "plot_stock_data": {
        "params": [
            _p("tables", "list", "tables to draw together"),
            _p("chart_type", "text", "line, bar or kline"),
            _p("title", "text", "chart title"),
        ],
        "description": "Draw a chart of one or more tables against their "
                       "time axis in a chosen style.",
        "category": "visualization",
        "task_tags": ["stock", "fund", "corporation", "other"],
        "body": PLOT_STOCK_BODY,
    },
    "plot_radar_chart": {
        "params": [
            _p("table", "table", "rows to draw"),
            _p("title", "text", "chart title"),
        ],
        "description": "Draw a radar chart comparing the numeric columns "
                       "of a table across its rows.",
        "category": "visualization",
        "task_tags": ["stock", "corporation"],
        "body": _single_plot_body("radar"),
    },
}

# drafts leave the workshop with these bodies; certification repairs them
DRAFT_BODIES = {
    "query_cpi_data": CPI_TYPO_BODY,
    "calculate_moving_average": MA_BROKEN_BODY,
}
DRAFT_ORACLES = {"calculate_moving_average": MA_GOOD_BODY}
REPAIRED_BODIES = {
    "query_cpi_data": CPI_BODY,
    "calculate_moving_average": MA_GOOD_BODY,
}

# which concrete interfaces satisfy an abstract capability
ALIASES = {
    "viz:line": ("plot_stock_data", "plot_line_chart"),
    "viz:kline": ("plot_stock_data", "plot_kline_chart"),
    "viz:bar": ("plot_stock_data", "plot_bar_chart"),
    "viz:radar": ("plot_radar_chart",),
    "macro:gdp": ("query_gdp_data", "get_macro_data"),
    "macro:cpi": ("query_cpi_data", "get_macro_data"),
}
# what gets drafted when no satisfier is listed
DRAFT_TARGET = {
    "viz:line": "plot_line_chart",
    "viz:kline": "plot_kline_chart",
    "viz:bar": "plot_bar_chart",
    "viz:radar": "plot_radar_chart",
    "macro:gdp": "query_gdp_data",
    "macro:cpi": "query_cpi_data",
}


# -- plan assembly -----------------------------------------------------------


def _call(fn: str, args: list, out: str, desc: str) -> dict:
    return {"fn": fn, "args": args, "out": out, "desc": desc}


def _plan_json(steps: list) -> str:
    """steps: list of parallel groups (lists of _call dicts) or loop dicts."""
    obj: dict = {}
    for i, step in enumerate(steps, start=1):
        if isinstance(step, dict):
            obj[f"step{i}"] = step
            continue
        group: dict = {}
        for j, call in enumerate(step, start=1):
            group[f"arg{j}"] = call["args"]
            group[f"function{j}"] = call["fn"]
            group[f"output{j}"] = call["out"]
            group[f"description{j}"] = call["desc"]
        obj[f"step{i}"] = group
    return json.dumps(obj, ensure_ascii=False, indent=2)


def _loop(over: list, body_calls: list) -> dict:
    body = []
    for call in body_calls:
        body.append({
            "arg1": call["args"],
            "function1": call["fn"],
            "output1": call["out"],
            "description1": call["desc"],
        })
    return {"loop": {"over": over, "var": "item", "body": body}}


def _viz(av: set, kind: str, inputs: list, out: str, title: str, goal: str) -> dict:
    """Chart step against whatever plotting interface the listing offers."""
    if "plot_stock_data" in av and kind != "radar":
        arg0 = inputs if len(inputs) > 1 else inputs[0]
        return _call("plot_stock_data", [arg0, kind, title], out, goal)
    single = f"plot_{kind}_chart"
    if single in av and len(inputs) == 1:
        return _call(single, [inputs[0], title], out, goal)
    return _call("__raw_code__", list(inputs), out, goal)


def _macro(av: set, indicator: str, region: str, start: str, end: str,
           out: str) -> dict:
    desc = f"Fetch the {indicator} series for {region}"
    specific = f"query_{indicator}_data"
    if specific in av:
        return _call(specific, [region, start, end], out, desc)
    if "get_macro_data" in av:
        return _call("get_macro_data", [indicator, region, start, end], out, desc)
    return _call("__raw_code__", [], out, desc)


def _fetch(av: set, name: str, args: list, out: str, desc: str) -> dict:
    if name in av:
        return _call(name, args, out, desc)
    return _call("__raw_code__", [], out, desc)


def _golden(filename: str):
    text = (ROOT / "fixtures" / "plans" / filename).read_text(encoding="utf-8")
    names = set(re.findall(r'"function\d+":\s*"([a-z_0-9]+)"', text))
    return text, names


# -- the request corpus ------------------------------------------------------

SEED_TEXTS = [
    "Plot the closing price of Guizhou Maotai for the past year",
    "Show China's CPI changes in the last three years",
]

SYNTH_TEXTS = {
    "stock": [
        "Draw the kline chart of Ningde Times for the last three months",
        "Compare the cumulative returns of CSI 300, GEM Index and CSI 1000 "
        "since the start of 2019",
        "Plot the 30-day moving average of the CSI 300 closing price in 2018",
        "Show Guizhou Maotai's daily trading volume over the last month as "
        "a bar chart",
        "Plot the weekly closing price of GEM Index over the past year",
        "Which three days had the highest closing price for Guizhou Maotai "
        "in the past year?",
        "Plot the closing prices of Guizhou Maotai and Ningde Times since "
        "January 2019 on one chart",
        "Plot the closing price trend of Guizhou Maotai for the past year",
        "List the five most recent stock market news items since 2018",
    ],
    "fund": [
        "Plot the net asset value trend of E Fund Blue Chip over the past year",
        "Compare the cumulative returns of Huaxia Growth and Southern Select "
        "over the past year",
        "Who manages the Huaxia Growth fund?",
        "Predict the net asset value of GF Stable Gain for the next five days",
    ],
    "corporation": [
        "Which five companies had the highest return on equity in 2018Q4?",
        "Total and average quarterly net profit for each of the ten tracked "
        "companies in 2023",
        "Show Guizhou Maotai's quarterly revenue in 2018 as a bar chart",
        "How did BYD's quarterly net profit grow year over year during 2018?",
        "Which company had the highest return on equity in 2024Q4?",
    ],
    "other": [
        "Show China's GDP for each quarter of the last five years",
        "Compare quarterly GDP growth of China and the United States over "
        "the last five years",
        "Show China's GDP year-over-year growth for the last five years as "
        "a bar chart",
        "Predict China's GDP for the next two quarters",
        "List the five most recent macro policy news items since 2018",
        "Which quarter saw China's highest GDP growth in the last five years?",
        "Show China's monthly CPI changes in the last three years",
    ],
}
SYNTH_QUOTA = {topic: len(texts) for topic, texts in SYNTH_TEXTS.items()}

RADAR_TEXT = ("Draw a radar chart of Guizhou Maotai's key financial "
              "indicators for 2018Q4")

_YEAR_BACK = ("2018-03-13", CLOCK)
_FIVE_BACK = ("2014-03-13", CLOCK)

_STOCK_SRC = ("stock.daily", ["date", "ticker", "close"])
_CORP_ROE = ("corp.financials", ["quarter", "ticker", "roe"])
_NEWS_SRC = ("news.live", ["date", "title", "tag"])


def _spec(text, task, complexity, fmt, time, objects, verify, needs, plan):
    return {
        "text": text, "task_type": task, "complexity": complexity,
        "fmt": fmt, "time": time, "objects": objects,
        "verify": verify, "needs": needs, "plan": plan,
    }


def _plan_seed_maotai(av: set) -> str:
    text, names = _golden("serial_maotai.json")
    if names <= av:
        return text
    steps = [
        [_fetch(av, "get_stock_prices_data",
                ["Guizhou Maotai", "20180313", "20190313", "daily"], "result1",
                "Fetch daily prices for Guizhou Maotai over the past year")],
        [_fetch(av, "calculate_stock_index", ["result1", "close"], "result2",
                "Keep the date and closing price columns")
         if "calculate_stock_index" in av else
         _call("__raw_code__", ["result1"], "result2",
               "Keep the date and closing price columns")],
        [_viz(av, "line", ["result2"], "result3",
              "Guizhou Maotai closing price, past year",
              "Draw the closing price as a line chart")],
    ]
    return _plan_json(steps)


def _plan_seed_cpi(av: set) -> str:
    steps = [
        [_macro(av, "cpi", "China", "2016-03-13", CLOCK, "result1")],
        [_viz(av, "line", ["result1"], "result2",
              "China CPI, last three years",
              "Draw the CPI series as a line chart")],
    ]
    return _plan_json(steps)


def _plan_kline(av: set) -> str:
    steps = [
        [_fetch(av, "get_stock_prices_data",
                ["Ningde Times", "20181213", "20190313", "daily"], "result1",
                "Fetch daily prices for Ningde Times over the last three months")],
        [_viz(av, "kline", ["result1"], "result2",
              "Ningde Times daily kline, last three months",
              "Draw the price rows as kline candles")],
    ]
    return _plan_json(steps)


def _plan_index_returns(av: set) -> str:
    text, names = _golden("parallel_indexes.json")
    if names <= av:
        return text
    fetches, rets = [], []
    for i, name in enumerate(["CSI 300", "GEM Index", "CSI 1000"], start=1):
        fetches.append(_fetch(av, "get_stock_prices_data",
                              [name, "20190101", "20190313", "daily"],
                              f"result{i}", f"Fetch daily prices for {name}"))
        rets.append(
            _call("calculate_return", [f"result{i}", "close"], f"result{i + 3}",
                  f"Cumulative return of {name}")
            if "calculate_return" in av else
            _call("__raw_code__", [f"result{i}"], f"result{i + 3}",
                  f"Cumulative return of {name} from closing prices"))
    steps = [fetches, rets,
             [_viz(av, "line", ["result4", "result5", "result6"], "result7",
                   "Cumulative return of CSI 300, GEM Index and CSI 1000 in 2019",
                   "Plot the three return series on one line chart")]]
    return _plan_json(steps)


def _plan_moving_average(av: set) -> str:
    steps = [
        [_fetch(av, "get_stock_prices_data",
                ["CSI 300", "20180101", "20181231", "daily"], "result1",
                "Fetch daily CSI 300 prices for 2018")],
        [_fetch(av, "calculate_stock_index", ["result1", "close"], "result2",
                "Keep the date and closing price columns")],
        [_call("calculate_moving_average", ["result2", "close", 30], "result3",
               "Append the 30-day moving average of the close")
         if "calculate_moving_average" in av else
         _call("__raw_code__", ["result2"], "result3",
               "Append the 30-day moving average of the close")],
        [_viz(av, "line", ["result3"], "result4",
              "CSI 300 close and 30-day moving average, 2018",
              "Draw close and moving average as lines")],
    ]
    return _plan_json(steps)


def _plan_volume_bar(av: set) -> str:
    steps = [
        [_fetch(av, "get_stock_prices_data",
                ["Guizhou Maotai", "20190213", "20190313", "daily"], "result1",
                "Fetch daily Guizhou Maotai prices for the last month")],
        [_fetch(av, "calculate_stock_index", ["result1", "volume"], "result2",
                "Keep the date and volume columns")],
        [_viz(av, "bar", ["result2"], "result3",
              "Guizhou Maotai daily trading volume, last month",
              "Draw the volume as a bar chart")],
    ]
    return _plan_json(steps)


def _plan_weekly_close(av: set) -> str:
    steps = [
        [_fetch(av, "get_stock_prices_data",
                ["GEM Index", "20180313", "20190313", "weekly"], "result1",
                "Fetch weekly GEM Index prices for the past year")],
        [_fetch(av, "calculate_stock_index", ["result1", "close"], "result2",
                "Keep the date and closing price columns")],
        [_viz(av, "line", ["result2"], "result3",
              "GEM Index weekly closing price, past year",
              "Draw the weekly close as a line chart")],
    ]
    return _plan_json(steps)


def _plan_top_days(av: set) -> str:
    steps = [
        [_fetch(av, "get_stock_prices_data",
                ["Guizhou Maotai", "20180313", "20190313", "daily"], "result1",
                "Fetch daily Guizhou Maotai prices for the past year")],
        [_fetch(av, "calculate_stock_index", ["result1", "close"], "result2",
                "Keep the date and closing price columns")],
        [_call("rank_by_column", ["result2", "close", 3], "result3",
               "Keep the three days with the highest close")
         if "rank_by_column" in av else
         _call("__raw_code__", ["result2"], "result3",
               "Keep the three days with the highest close")],
    ]
    return _plan_json(steps)


def _plan_two_stocks(av: set) -> str:
    fetches, selects = [], []
    for i, name in enumerate(["Guizhou Maotai", "Ningde Times"], start=1):
        fetches.append(_fetch(av, "get_stock_prices_data",
                              [name, "20190101", "20190313", "daily"],
                              f"result{i}", f"Fetch daily prices for {name}"))
        selects.append(
            _call("select_table_columns",
                  [f"result{i}", ["date", "ticker", "close"]],
                  f"result{i + 2}", f"Keep date, ticker and close for {name}")
            if "select_table_columns" in av else
            _call("__raw_code__", [f"result{i}"], f"result{i + 2}",
                  f"Keep date, ticker and close for {name}"))
    steps = [fetches, selects,
             [_viz(av, "line", ["result3", "result4"], "result5",
                   "Guizhou Maotai and Ningde Times closing prices since January 2019",
                   "Plot both closing price series on one chart")]]
    return _plan_json(steps)


def _plan_news(topic: str, label: str):
    def build(av: set) -> str:
        steps = [
            [_fetch(av, "get_financial_news",
                    [topic, "2018-01-01", CLOCK], "result1",
                    f"Fetch {label} news since 2018")],
            [_call("rank_by_column", ["result1", "date", 5], "result2",
                   "Keep the five most recent items")
             if "rank_by_column" in av else
             _call("__raw_code__", ["result1"], "result2",
                   "Keep the five most recent items")],
            [_call("select_table_columns", ["result2", ["date", "title"]],
                   "result3", "Show date and headline")
             if "select_table_columns" in av else
             _call("__raw_code__", ["result2"], "result3",
                   "Show date and headline")],
        ]
        return _plan_json(steps)
    return build


def _plan_fund_nav(av: set) -> str:
    steps = [
        [_fetch(av, "get_fund_nav_data",
                ["E Fund Blue Chip", "2018-03-13", CLOCK], "result1",
                "Fetch E Fund Blue Chip net asset values for the past year")],
        [_fetch(av, "calculate_stock_index", ["result1", "nav"], "result2",
                "Keep the date and nav columns")],
        [_viz(av, "line", ["result2"], "result3",
              "E Fund Blue Chip net asset value, past year",
              "Draw the nav series as a line chart")],
    ]
    return _plan_json(steps)


def _plan_fund_returns(av: set) -> str:
    fetches, rets = [], []
    for i, name in enumerate(["Huaxia Growth", "Southern Select"], start=1):
        fetches.append(_fetch(av, "get_fund_nav_data",
                              [name, "2018-03-13", CLOCK], f"result{i}",
                              f"Fetch {name} net asset values for the past year"))
        rets.append(
            _call("calculate_return", [f"result{i}", "nav"], f"result{i + 2}",
                  f"Cumulative return of {name}")
            if "calculate_return" in av else
            _call("__raw_code__", [f"result{i}"], f"result{i + 2}",
                  f"Cumulative return of {name} from nav"))
    steps = [fetches, rets,
             [_viz(av, "line", ["result3", "result4"], "result5",
                   "Cumulative return of Huaxia Growth and Southern Select, past year",
                   "Plot both cumulative return series on one chart")]]
    return _plan_json(steps)


def _plan_fund_manager(av: set) -> str:
    steps = [
        [_fetch(av, "get_fund_nav_data",
                ["Huaxia Growth", CLOCK, CLOCK], "result1",
                "Fetch the current Huaxia Growth fund record")],
        [_call("select_table_columns", ["result1", ["fund", "manager"]],
               "result2", "Show the fund and its manager")
         if "select_table_columns" in av else
         _call("__raw_code__", ["result1"], "result2",
               "Show the fund and its manager")],
    ]
    return _plan_json(steps)


def _plan_fund_predict(av: set) -> str:
    steps = [
        [_fetch(av, "get_fund_nav_data",
                ["GF Stable Gain", "2018-03-13", CLOCK], "result1",
                "Fetch GF Stable Gain net asset values for the past year")],
        [_call("predict_indicator", ["result1", "nav", 5], "result2",
               "Forecast the next five nav values")
         if "predict_indicator" in av else
         _call("__raw_code__", ["result1"], "result2",
               "Forecast the next five nav values")],
    ]
    return _plan_json(steps)


def _plan_roe_rank(quarter: str, k: int, label: str):
    def build(av: set) -> str:
        if "get_financial_indicators" in av:
            fetch_step = _loop(COMPANIES, [
                _call("get_financial_indicators", ["item", quarter, quarter],
                      "result1", f"Fetch {quarter} financials for one company"),
            ])
        else:
            fetch_step = [_call("__raw_code__", [], "result1",
                                f"Fetch {quarter} financials for every company")]
        rank = (_call("rank_by_column", ["result1", "roe", k], "result2", label)
                if "rank_by_column" in av else
                _call("__raw_code__", ["result1"], "result2", label))
        return _plan_json([fetch_step, [rank]])
    return build


def _plan_profit_summary(av: set) -> str:
    text, names = _golden("loop_tickers.json")
    if names <= av:
        return text
    if "get_financial_indicators" in av:
        fetch_step = _loop(COMPANIES, [
            _call("get_financial_indicators", ["item", "2023Q1", "2023Q4"],
                  "result1", "Fetch 2023 quarterly financials for one company"),
        ])
    else:
        fetch_step = [_call("__raw_code__", [], "result1",
                            "Fetch 2023 quarterly financials for every company")]
    summarize = (
        _call("summarize_group", ["result1", "ticker", "net_profit"], "result2",
              "Total and average quarterly net profit per company")
        if "summarize_group" in av else
        _call("__raw_code__", ["result1"], "result2",
              "Total and average quarterly net profit per company"))
    return _plan_json([fetch_step, [summarize]])


def _plan_corp_column(company, column, fmt, title, label):
    def build(av: set) -> str:
        steps = [
            [_fetch(av, "get_financial_indicators",
                    [company, "2018Q1", "2018Q4"], "result1",
                    f"Fetch 2018 quarterly financials for {company}")],
            [_call("select_table_columns", ["result1", ["quarter", column]],
                   "result2", f"Keep quarter and {column}")
             if "select_table_columns" in av else
             _call("__raw_code__", ["result1"], "result2",
                   f"Keep quarter and {column}")],
            [_viz(av, fmt, ["result2"], "result3", title, label)],
        ]
        return _plan_json(steps)
    return build


def _plan_gdp(column, steps_after):
    def build(av: set) -> str:
        steps = [[_macro(av, "gdp", "China", "2014Q1", "2018Q4", "result1")]]
        steps.extend(steps_after(av))
        return _plan_json(steps)
    return build


def _plan_gdp_line(av: set) -> str:
    steps = [
        [_macro(av, "gdp", "China", "2014Q1", "2018Q4", "result1")],
        [_call("select_table_columns", ["result1", ["quarter", "gdp"]],
               "result2", "Keep quarter and gdp")
         if "select_table_columns" in av else
         _call("__raw_code__", ["result1"], "result2", "Keep quarter and gdp")],
        [_viz(av, "line", ["result2"], "result3",
              "China quarterly GDP, last five years",
              "Draw the GDP series as a line chart")],
    ]
    return _plan_json(steps)


def _plan_gdp_compare(av: set) -> str:
    fetches, selects = [], []
    for i, region in enumerate(["China", "United States"], start=1):
        fetches.append(_macro(av, "gdp", region, "2014Q1", "2018Q4", f"result{i}"))
        selects.append(
            _call("select_table_columns",
                  [f"result{i}", ["quarter", "country", "gdp_yoy"]],
                  f"result{i + 2}", f"Keep quarter, country and growth for {region}")
            if "select_table_columns" in av else
            _call("__raw_code__", [f"result{i}"], f"result{i + 2}",
                  f"Keep quarter, country and growth for {region}"))
    steps = [fetches, selects,
             [_viz(av, "line", ["result3", "result4"], "result5",
                   "Quarterly GDP growth, China vs United States",
                   "Plot both growth series on one chart")]]
    return _plan_json(steps)


def _plan_gdp_growth_bar(av: set) -> str:
    steps = [
        [_macro(av, "gdp", "China", "2014Q1", "2018Q4", "result1")],
        [_call("select_table_columns", ["result1", ["quarter", "gdp_yoy"]],
               "result2", "Keep quarter and year-over-year growth")
         if "select_table_columns" in av else
         _call("__raw_code__", ["result1"], "result2",
               "Keep quarter and year-over-year growth")],
        [_viz(av, "bar", ["result2"], "result3",
              "China GDP year-over-year growth, last five years",
              "Draw the growth series as a bar chart")],
    ]
    return _plan_json(steps)


def _plan_gdp_predict(av: set) -> str:
    steps = [
        [_macro(av, "gdp", "China", "2014Q1", "2018Q4", "result1")],
        [_call("predict_indicator", ["result1", "gdp", 2], "result2",
               "Forecast the next two quarterly GDP values")
         if "predict_indicator" in av else
         _call("__raw_code__", ["result1"], "result2",
               "Forecast the next two quarterly GDP values")],
    ]
    return _plan_json(steps)


def _plan_gdp_best_quarter(av: set) -> str:
    steps = [
        [_macro(av, "gdp", "China", "2014Q1", "2018Q4", "result1")],
        [_call("rank_by_column", ["result1", "gdp_yoy", 1], "result2",
               "Keep the quarter with the highest growth")
         if "rank_by_column" in av else
         _call("__raw_code__", ["result1"], "result2",
               "Keep the quarter with the highest growth")],
    ]
    return _plan_json(steps)


def _plan_radar(av: set) -> str:
    steps = [
        [_fetch(av, "get_financial_indicators",
                ["Guizhou Maotai", "2018Q4", "2018Q4"], "result1",
                "Fetch Guizhou Maotai financials for 2018Q4")],
        [_viz(av, "radar", ["result1"], "result2",
              "Guizhou Maotai key financial indicators, 2018Q4",
              "Draw the quarterly financial indicators as a radar chart")],
    ]
    return _plan_json(steps)


REQUEST_SPECS = [
    _spec(SEED_TEXTS[0], "stock", "single", "line", _YEAR_BACK,
          ["Guizhou Maotai"], {"sources": [_STOCK_SRC], "entities": ["Guizhou Maotai"]},
          ["get_stock_prices_data", "calculate_stock_index", "viz:line"],
          _plan_seed_maotai),
    _spec(SEED_TEXTS[1], "other", "single", "line", ("2016-03-13", CLOCK),
          ["China"], {"sources": [("econ.cpi", ["date", "country", "cpi"])],
                      "entities": ["China"]},
          ["macro:cpi", "viz:line"], _plan_seed_cpi),
    _spec(SYNTH_TEXTS["stock"][0], "stock", "single", "kline",
          ("2018-12-13", CLOCK), ["Ningde Times"],
          {"sources": [("stock.daily",
                        ["date", "ticker", "open", "high", "low", "close"])],
           "entities": ["Ningde Times"]},
          ["get_stock_prices_data", "viz:kline"], _plan_kline),
    _spec(SYNTH_TEXTS["stock"][1], "stock", "multiple", "line",
          ("2019-01-01", CLOCK), ["CSI 300", "GEM Index", "CSI 1000"],
          {"sources": [_STOCK_SRC], "entities": ["CSI 300", "GEM Index", "CSI 1000"]},
          ["get_stock_prices_data", "calculate_return", "viz:line"],
          _plan_index_returns),
    _spec(SYNTH_TEXTS["stock"][2], "stock", "single", "line",
          ("2018-01-01", "2018-12-31"), ["CSI 300"],
          {"sources": [_STOCK_SRC], "entities": ["CSI 300"]},
          ["get_stock_prices_data", "calculate_stock_index",
           "calculate_moving_average", "viz:line"], _plan_moving_average),
    _spec(SYNTH_TEXTS["stock"][3], "stock", "single", "bar",
          ("2019-02-13", CLOCK), ["Guizhou Maotai"],
          {"sources": [("stock.daily", ["date", "ticker", "volume"])],
           "entities": ["Guizhou Maotai"]},
          ["get_stock_prices_data", "calculate_stock_index", "viz:bar"],
          _plan_volume_bar),
    _spec(SYNTH_TEXTS["stock"][4], "stock", "single", "line", _YEAR_BACK,
          ["GEM Index"], {"sources": [_STOCK_SRC], "entities": ["GEM Index"]},
          ["get_stock_prices_data", "calculate_stock_index", "viz:line"],
          _plan_weekly_close),
    _spec(SYNTH_TEXTS["stock"][5], "stock", "single", "table", _YEAR_BACK,
          ["Guizhou Maotai"],
          {"sources": [_STOCK_SRC], "entities": ["Guizhou Maotai"]},
          ["get_stock_prices_data", "calculate_stock_index", "rank_by_column"],
          _plan_top_days),
    _spec(SYNTH_TEXTS["stock"][6], "stock", "multiple", "line",
          ("2019-01-01", CLOCK), ["Guizhou Maotai", "Ningde Times"],
          {"sources": [_STOCK_SRC], "entities": ["Guizhou Maotai", "Ningde Times"]},
          ["get_stock_prices_data", "select_table_columns", "viz:line"],
          _plan_two_stocks),
    _spec(SYNTH_TEXTS["stock"][7], "stock", "single", "line", _YEAR_BACK,
          ["Guizhou Maotai"],
          {"sources": [_STOCK_SRC], "entities": ["Guizhou Maotai"]},
          ["get_stock_prices_data", "calculate_stock_index", "viz:line"],
          _plan_seed_maotai),
    _spec(SYNTH_TEXTS["stock"][8], "stock", "single", "table",
          ("2018-01-01", CLOCK), [],
          {"sources": [_NEWS_SRC], "entities": []},
          ["get_financial_news", "rank_by_column", "select_table_columns"],
          _plan_news("stock", "stock market")),
    _spec(SYNTH_TEXTS["fund"][0], "fund", "single", "line", _YEAR_BACK,
          ["E Fund Blue Chip"],
          {"sources": [("fund.nav", ["date", "fund", "nav"])],
           "entities": ["E Fund Blue Chip"]},
          ["get_fund_nav_data", "calculate_stock_index", "viz:line"],
          _plan_fund_nav),
    _spec(SYNTH_TEXTS["fund"][1], "fund", "multiple", "line", _YEAR_BACK,
          ["Huaxia Growth", "Southern Select"],
          {"sources": [("fund.nav", ["date", "fund", "nav"])],
           "entities": ["Huaxia Growth", "Southern Select"]},
          ["get_fund_nav_data", "calculate_return", "viz:line"],
          _plan_fund_returns),
    _spec(SYNTH_TEXTS["fund"][2], "fund", "single", "text", None,
          ["Huaxia Growth"],
          {"sources": [("fund.nav", ["date", "fund", "manager"])],
           "entities": ["Huaxia Growth"]},
          ["get_fund_nav_data", "select_table_columns"], _plan_fund_manager),
    _spec(SYNTH_TEXTS["fund"][3], "fund", "single", "table", None,
          ["GF Stable Gain"],
          {"sources": [("fund.nav", ["date", "fund", "nav"])],
           "entities": ["GF Stable Gain"]},
          ["get_fund_nav_data", "predict_indicator"], _plan_fund_predict),
    _spec(SYNTH_TEXTS["corporation"][0], "corporation", "complex_relations",
          "table", ("2018-10-01", "2018-12-31"), [],
          {"sources": [_CORP_ROE], "entities": []},
          ["get_financial_indicators", "rank_by_column"],
          _plan_roe_rank("2018Q4", 5,
                         "Keep the five companies with the highest ROE")),
    _spec(SYNTH_TEXTS["corporation"][1], "corporation", "complex_relations",
          "table", ("2023-01-01", "2023-12-31"), [],
          {"sources": [("corp.financials", ["quarter", "ticker", "net_profit"])],
           "entities": []},
          ["get_financial_indicators", "summarize_group"], _plan_profit_summary),
    _spec(SYNTH_TEXTS["corporation"][2], "corporation", "single", "bar",
          ("2018-01-01", "2018-12-31"), ["Guizhou Maotai"],
          {"sources": [("corp.financials", ["quarter", "ticker", "revenue"])],
           "entities": ["Guizhou Maotai"]},
          ["get_financial_indicators", "select_table_columns", "viz:bar"],
          _plan_corp_column("Guizhou Maotai", "revenue", "bar",
                            "Guizhou Maotai quarterly revenue, 2018",
                            "Draw quarterly revenue as bars")),
    _spec(SYNTH_TEXTS["corporation"][3], "corporation", "single", "line",
          ("2018-01-01", "2018-12-31"), ["BYD"],
          {"sources": [("corp.financials",
                        ["quarter", "ticker", "net_profit_yoy"])],
           "entities": ["BYD"]},
          ["get_financial_indicators", "select_table_columns", "viz:line"],
          _plan_corp_column("BYD", "net_profit_yoy", "line",
                            "BYD net profit growth by quarter, 2018",
                            "Draw the growth series as a line chart")),
    _spec(SYNTH_TEXTS["corporation"][4], "corporation", "complex_relations",
          "table", ("2024-10-01", "2024-12-31"), [],
          {"sources": [_CORP_ROE], "entities": []},
          ["get_financial_indicators", "rank_by_column"],
          _plan_roe_rank("2024Q4", 1,
                         "Keep the company with the highest ROE")),
    _spec(SYNTH_TEXTS["other"][0], "other", "single", "line", _FIVE_BACK,
          ["China"],
          {"sources": [("econ.gdp", ["quarter", "country", "gdp"])],
           "entities": ["China"]},
          ["macro:gdp", "select_table_columns", "viz:line"], _plan_gdp_line),
    _spec(SYNTH_TEXTS["other"][1], "other", "multiple", "line", _FIVE_BACK,
          ["China", "United States"],
          {"sources": [("econ.gdp", ["quarter", "country", "gdp_yoy"])],
           "entities": ["China", "United States"]},
          ["macro:gdp", "select_table_columns", "viz:line"], _plan_gdp_compare),
    _spec(SYNTH_TEXTS["other"][2], "other", "single", "bar", _FIVE_BACK,
          ["China"],
          {"sources": [("econ.gdp", ["quarter", "country", "gdp_yoy"])],
           "entities": ["China"]},
          ["macro:gdp", "select_table_columns", "viz:bar"], _plan_gdp_growth_bar),
    _spec(SYNTH_TEXTS["other"][3], "other", "single", "table", None,
          ["China"],
          {"sources": [("econ.gdp", ["quarter", "country", "gdp"])],
           "entities": ["China"]},
          ["macro:gdp", "predict_indicator"], _plan_gdp_predict),
    _spec(SYNTH_TEXTS["other"][4], "other", "single", "table",
          ("2018-01-01", CLOCK), [],
          {"sources": [_NEWS_SRC], "entities": []},
          ["get_financial_news", "rank_by_column", "select_table_columns"],
          _plan_news("macro", "macro policy")),
    _spec(SYNTH_TEXTS["other"][5], "other", "single", "table", _FIVE_BACK,
          ["China"],
          {"sources": [("econ.gdp", ["quarter", "country", "gdp_yoy"])],
           "entities": ["China"]},
          ["macro:gdp", "rank_by_column"], _plan_gdp_best_quarter),
    _spec(SYNTH_TEXTS["other"][6], "other", "single", "line",
          ("2016-03-13", CLOCK), ["China"],
          {"sources": [("econ.cpi", ["date", "country", "cpi"])],
           "entities": ["China"]},
          ["macro:cpi", "viz:line"], _plan_seed_cpi),
    _spec(RADAR_TEXT, "corporation", "single", "radar",
          ("2018-10-01", "2018-12-31"), ["Guizhou Maotai"],
          {"sources": [("corp.financials",
                        ["quarter", "ticker", "revenue", "net_profit", "roe"])],
           "entities": ["Guizhou Maotai"]},
          ["get_financial_indicators", "viz:radar"], _plan_radar),
]

BY_TEXT = {spec["text"]: spec for spec in REQUEST_SPECS}

# texts the greedy near-duplicate filter drops, in corpus build order
DUPLICATE_TEXTS = [SYNTH_TEXTS["stock"][7], SYNTH_TEXTS["other"][6]]

# the committed corpus: seeds first, then synthesized survivors by topic
CORPUS_TEXTS = [t for t in (
    SEED_TEXTS
    + SYNTH_TEXTS["stock"] + SYNTH_TEXTS["fund"]
    + SYNTH_TEXTS["corporation"] + SYNTH_TEXTS["other"]
) if t not in DUPLICATE_TEXTS]


# -- benchmark request family ------------------------------------------------

BENCH_WINDOWS = [
    ("2018-01-02", "2018-03-30"), ("2018-02-01", "2018-04-27"),
    ("2018-03-01", "2018-05-31"), ("2018-04-02", "2018-06-29"),
    ("2018-05-02", "2018-07-31"), ("2018-06-01", "2018-08-31"),
    ("2018-07-02", "2018-09-28"), ("2018-08-01", "2018-10-31"),
    ("2018-09-03", "2018-11-30"), ("2018-10-08", "2018-12-28"),
]
BENCH_TICKERS = ["CSI 1000", "CSI 300", "GEM Index", "Guizhou Maotai",
                 "Ningde Times"]
BENCH_RE = re.compile(
    r"^Plot the closing price of (?P<ticker>.+) from "
    r"(?P<start>\d{4}-\d{2}-\d{2}) to (?P<end>\d{4}-\d{2}-\d{2})$"
)


def bench_requests() -> list:
    out = []
    for ticker in BENCH_TICKERS:
        for start, end in BENCH_WINDOWS:
            out.append(f"Plot the closing price of {ticker} from {start} to {end}")
    return out


def _bench_plan(av: set, ticker: str, start: str, end: str) -> str:
    title = f"{ticker} closing price, {start} to {end}"
    steps = [
        [_fetch(av, "get_stock_prices_data", [ticker, start, end, "daily"],
                "result1", f"Fetch daily prices for {ticker}")],
        [_fetch(av, "calculate_stock_index", ["result1", "close"], "result2",
                "Keep the date and closing price columns")],
        [_viz(av, "line", ["result2"], "result3", title,
              "Draw the closing price as a line chart")],
    ]
    return _plan_json(steps)


def _bench_script(ticker: str, start: str, end: str) -> str:
    title = f"{ticker} closing price, {start} to {end}"
    code = f'''import csv
import json

# Closing price line for {ticker}, window {start} .. {end}.
# The working directory carries the fetched rows as data.csv; the last
# stdout line must be one JSON document describing the figure.
with open("data.csv", encoding="utf-8") as handle:
    rows = list(csv.DictReader(handle))

window = [row for row in rows if "{start}" <= row["date"] <= "{end}"]
window.sort(key=lambda row: row["date"])
if not window:
    raise SystemExit("no rows inside the requested window")

dates = [row["date"] for row in window]
closes = []
for row in window:
    try:
        closes.append(float(row["close"]))
    except (KeyError, ValueError) as exc:
        raise SystemExit(f"bad close value on {{row.get('date')}}: {{exc}}")

chart = {{
    "type": "line",
    "title": {title!r},
    "x_label": "date",
    "y_label": "close (CNY)",
    "series": [
        {{"name": "close", "x": dates, "y": closes, "color": "#5470c6"}},
    ],
}}
print(json.dumps({{"chart": chart}}, ensure_ascii=False))
'''
    return f"```python\n{code}```"


RADAR_SCRIPT = '''```python
import csv
import json

# Radar of the five indicator columns for the requested quarter. The
# working directory carries the fetched rows as data.csv; the last
# stdout line must be one JSON document describing the figure.
with open("data.csv", encoding="utf-8") as handle:
    rows = list(csv.DictReader(handle))
if not rows:
    raise SystemExit("no indicator rows to draw")

row = rows[-1]
axes = ["revenue", "revenue_yoy", "net_profit", "net_profit_yoy", "roe"]
palette = ["#5470c6", "#91cc75", "#fac858", "#ee6666", "#73c0de"]
series = []
for position, name in enumerate(axes):
    try:
        value = float(row[name])
    except (KeyError, ValueError) as exc:
        raise SystemExit(f"bad indicator {name}: {exc}")
    series.append({
        "name": name,
        "x": [row["quarter"]],
        "y": [value],
        "color": palette[position % len(palette)],
    })

chart = {
    "type": "radar",
    "title": "Guizhou Maotai key financial indicators, 2018Q4",
    "x_label": "quarter",
    "y_label": ", ".join(axes),
    "series": series,
}
print(json.dumps({"chart": chart}, ensure_ascii=False))
```'''


# -- prompt parsing helpers --------------------------------------------------


def _line_after(text: str, prefix: str) -> str:
    for line in text.splitlines():
        if line.startswith(prefix):
            return line[len(prefix):].strip()
    raise RuleMiss(f"prompt has no {prefix!r} line: {text[:90]!r}")


def _listed_names(text: str) -> set:
    return set(re.findall(r"^- ([a-z_0-9]+)\(", text, re.M))


def _sampled_rows(text: str) -> list:
    lines = text.splitlines()
    start = next(i for i, ln in enumerate(lines)
                 if ln.startswith("Sampled data from")) + 1
    end = next(i for i, ln in enumerate(lines) if ln.startswith("Reply with JSON"))
    rows = list(csv.reader(io.StringIO("\n".join(lines[start:end]))))
    return [dict(zip(rows[0], r)) for r in rows[1:]]


def _spec_for(text_line: str) -> dict:
    if text_line in BY_TEXT:
        return BY_TEXT[text_line]
    raise RuleMiss(f"unknown request {text_line!r}")


# -- explorer tier -----------------------------------------------------------


def _reply_synthesize(prompt: str) -> str:
    head = prompt.splitlines()[0]
    match = re.match(r"Synthesize (\d+) financial analysis requests about (\w+)\.",
                     head)
    if not match:
        raise RuleMiss(head)
    count, topic = int(match.group(1)), match.group(2)
    texts = SYNTH_TEXTS.get(topic)
    if texts is None or len(texts) != count:
        raise RuleMiss(f"no {count} scripted requests for topic {topic!r}")
    return json.dumps(texts, ensure_ascii=False)


def _reply_verify(prompt: str) -> str:
    text = _line_after(prompt, "Request: ")
    spec = _spec_for(text)
    verify = spec["verify"]
    return json.dumps({
        "sources": [{"id": sid, "columns": cols} for sid, cols in verify["sources"]],
        "entities": verify["entities"],
    }, ensure_ascii=False)


def _reply_classify(prompt: str) -> str:
    text = _line_after(prompt, "Request: ")
    spec = _spec_for(text)
    return json.dumps(
        {"task_type": spec["task_type"], "complexity": spec["complexity"]},
        ensure_ascii=False,
    )


def _draft_payload(name: str) -> dict:
    canon = INTERFACES[name]
    out = {
        "name": name,
        "params": canon["params"],
        "description": canon["description"],
        "category": canon["category"],
        "task_tags": canon["task_tags"],
        "body": DRAFT_BODIES.get(name, canon["body"]),
    }
    if name in DRAFT_ORACLES:
        out["oracle"] = DRAFT_ORACLES[name]
    return out


def _reply_design(prompt: str) -> str:
    text = _line_after(prompt, "Request: ")
    spec = _spec_for(text)
    listed = _listed_names(prompt)
    reused: list = []
    drafted: list = []
    for need in spec["needs"]:
        satisfiers = ALIASES.get(need, (need,))
        present = [n for n in satisfiers if n in listed]
        if present:
            if present[0] not in reused:
                reused.append(present[0])
        else:
            target = DRAFT_TARGET.get(need, need)
            if target not in drafted:
                drafted.append(target)
    return json.dumps({
        "reused": reused,
        "new": [_draft_payload(name) for name in drafted],
        "sketch": f"cover: {text}",
    }, ensure_ascii=False)


# bindings for computed interfaces; acquisition bindings come from the row
_COMPUTED_BINDINGS = {
    "calculate_return": {"table": PH, "value_col": "nav"},
    "calculate_moving_average": {"table": PH, "value_col": "nav", "window": 3},
    "calculate_stock_index": {"table": PH, "index_name": "nav"},
    "predict_indicator": {"table": PH, "value_col": "revenue", "horizon": 2},
    "select_table_columns": {"table": PH, "cols": ["quarter", "ticker"]},
    "rank_by_column": {"table": PH, "sort_col": "roe", "k": 3},
    "summarize_group": {"table": PH, "group_col": "ticker",
                        "value_col": "revenue"},
    "plot_line_chart": {"table": PH, "title": "Sampled columns as lines"},
    "plot_kline_chart": {"table": PH, "title": "Sampled daily candles"},
    "plot_bar_chart": {"table": PH, "title": "Sampled columns as bars"},
    "plot_radar_chart": {"table": PH, "title": "Sampled indicator radar"},
}


def _acquisition_bindings(name: str, row: dict) -> dict:
    if name == "get_stock_prices_data":
        return {"stock_name": row["ticker"], "start_date": row["date"],
                "end_date": row["date"], "frequency": "daily"}
    if name == "get_fund_nav_data":
        return {"fund_name": row["fund"], "start_date": row["date"],
                "end_date": row["date"]}
    if name == "get_financial_indicators":
        return {"company": row["ticker"], "start_quarter": row["quarter"],
                "end_quarter": row["quarter"]}
    if name == "get_financial_news":
        return {"topic": row["tag"], "start_date": row["date"],
                "end_date": row["date"]}
    if name in ("query_gdp_data", "query_cpi_data"):
        key = row.get("quarter") or row["date"]
        return {"region": row["country"], "start_date": key, "end_date": key}
    raise RuleMiss(f"no invocation rule for {name}")


def _reply_invocation(prompt: str) -> str:
    head = prompt.splitlines()[0]
    match = re.match(r"Write a test invocation for ([a-z_0-9]+)\(", head)
    if not match:
        raise RuleMiss(head)
    name = match.group(1)
    rows = _sampled_rows(prompt)
    if name in _COMPUTED_BINDINGS:
        bindings = dict(_COMPUTED_BINDINGS[name])
        request_text = f"Exercise {name} on {len(rows)} sampled rows"
    else:
        bindings = _acquisition_bindings(name, rows[0])
        anchor = next(iter(rows[0].values()))
        request_text = f"Fetch the sampled record at {anchor}"
    return json.dumps({"request_text": request_text, "bindings": bindings},
                      ensure_ascii=False)


def _reply_repair(prompt: str) -> str:
    signature = _line_after(prompt, "Interface: ")
    name = signature.split("(", 1)[0]
    body = REPAIRED_BODIES.get(name)
    if body is None:
        raise RuleMiss(f"no scripted repair for {name}")
    return f"```\n{body}```"


_MACRO_MERGE = {
    "decision": "merge",
    "targets": ["query_cpi_data"],
    "merged": {
        "name": "get_macro_data",
        "params": INTERFACES["get_macro_data"]["params"],
        "description": INTERFACES["get_macro_data"]["description"],
        "category": "data_acquisition",
        "task_tags": ["other"],
        "body": MACRO_BODY,
    },
    "call_mappings": {
        "query_gdp_data": {
            "params": {"region": "region", "start_date": "start_date",
                       "end_date": "end_date"},
            "fixed": {"indicator": "gdp"},
        },
        "query_cpi_data": {
            "params": {"region": "region", "start_date": "start_date",
                       "end_date": "end_date"},
            "fixed": {"indicator": "cpi"},
        },
    },
    "rationale": "same fetch-and-filter shape; the source differs only "
                 "by indicator name",
}

_PLOT_MERGE = {
    "decision": "merge",
    "targets": ["plot_line_chart"],
    "merged": {
        "name": "plot_stock_data",
        "params": INTERFACES["plot_stock_data"]["params"],
        "description": INTERFACES["plot_stock_data"]["description"],
        "category": "visualization",
        "task_tags": ["stock", "fund", "corporation", "other"],
        "body": PLOT_STOCK_BODY,
    },
    "call_mappings": {
        "plot_line_chart": {
            "params": {"table": "tables", "title": "title"},
            "fixed": {"chart_type": "line"},
            "listify": ["tables"],
        },
        "plot_kline_chart": {
            "params": {"table": "tables", "title": "title"},
            "fixed": {"chart_type": "kline"},
            "listify": ["tables"],
        },
    },
    "rationale": "both draw one table against its time axis; the style "
                 "becomes a parameter and the input generalizes to a list",
}


def _reply_merge(prompt: str) -> str:
    new_name = _line_after(prompt, "New interface: ").split("(", 1)[0]
    candidates = set(re.findall(r"^\[\d\.\d\d\] ([a-z_0-9]+)\(", prompt, re.M))
    if new_name == "query_gdp_data" and "query_cpi_data" in candidates:
        return json.dumps(_MACRO_MERGE, ensure_ascii=False)
    if new_name == "plot_kline_chart" and "plot_line_chart" in candidates:
        return json.dumps(_PLOT_MERGE, ensure_ascii=False)
    return json.dumps({
        "decision": "keep",
        "rationale": f"{new_name} reads differently from every candidate; "
                     "a shared signature would blur both descriptions",
    }, ensure_ascii=False)


def explorer_reply(messages) -> str:
    prompt = messages[-1].text
    if prompt.startswith("Synthesize "):
        return _reply_synthesize(prompt)
    if prompt.startswith("Map the request to data sources."):
        return _reply_verify(prompt)
    if prompt.startswith("Classify the request."):
        return _reply_classify(prompt)
    if prompt.startswith("Design interfaces for the request."):
        return _reply_design(prompt)
    if prompt.startswith("Write a test invocation for "):
        return _reply_invocation(prompt)
    if prompt.startswith("Fix the interface body."):
        return _reply_repair(prompt)
    if prompt.startswith("Decide whether to merge"):
        return _reply_merge(prompt)
    raise RuleMiss(f"explorer prompt not scripted: {prompt[:90]!r}")


# -- deployer tier -----------------------------------------------------------


def _reply_intent(prompt: str) -> str:
    text = _line_after(prompt, "Request: ")
    bench = BENCH_RE.match(text)
    if bench:
        start, end = bench.group("start"), bench.group("end")
        payload = {
            "rewritten_text": f"Line chart of {bench.group('ticker')} daily "
                              f"closing prices, {start} to {end}",
            "time_range": {"start": start, "end": end},
            "location": "China",
            "objects": [bench.group("ticker")],
            "output_format": "line",
        }
        return json.dumps(payload, ensure_ascii=False)
    spec = _spec_for(text)
    window = spec["time"]
    payload = {
        "rewritten_text": f"{text} (as of {CLOCK})",
        "time_range": (
            {"start": window[0], "end": window[1]} if window else None
        ),
        "location": "China",
        "objects": spec["objects"],
        "output_format": spec["fmt"],
    }
    return json.dumps(payload, ensure_ascii=False)


_TASK_FOR = {
    "stock": "stock_task",
    "corporation": "stock_task",
    "fund": "fund_task",
    "other": "economic_task",
}


def _reply_tasks(prompt: str) -> str:
    intent = json.loads(_line_after(prompt, "Intent: "))
    text = intent.get("original_text", "")
    if BENCH_RE.match(text):
        task = "stock_task"
        instruction = "Fetch the closing prices and draw them"
    else:
        spec = _spec_for(text)
        task = _TASK_FOR[spec["task_type"]]
        instruction = f"Resolve the request: {spec['text'][:60]}"
    return json.dumps({"tasks": [{"name": task, "instruction": instruction}]},
                      ensure_ascii=False)


def _reply_plan(prompt: str) -> str:
    intent = json.loads(_line_after(prompt, "Intent: "))
    text = intent.get("original_text", "")
    av = _listed_names(prompt)
    bench = BENCH_RE.match(text)
    if bench:
        return _bench_plan(av, bench.group("ticker"), bench.group("start"),
                           bench.group("end"))
    spec = _spec_for(text)
    return spec["plan"](av)


def _reply_goal(prompt: str) -> str:
    goal = _line_after(prompt, "Goal: ")
    bench = BENCH_RE.match(goal)
    if bench:
        return _bench_script(bench.group("ticker"), bench.group("start"),
                             bench.group("end"))
    if goal == RADAR_TEXT:
        return RADAR_SCRIPT
    raise RuleMiss(f"no scripted code for goal {goal!r}")


def deployer_reply(messages) -> str:
    prompt = messages[-1].text
    if prompt.startswith("Today is "):
        return _reply_intent(prompt)
    if prompt.startswith("Intent: "):
        if "Choose from stock_task" in prompt:
            return _reply_tasks(prompt)
        return _reply_plan(prompt)
    if prompt.startswith("Goal: "):
        return _reply_goal(prompt)
    raise RuleMiss(f"deployer prompt not scripted: {prompt[:90]!r}")
