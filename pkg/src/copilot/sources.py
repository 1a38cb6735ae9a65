"""Default data source descriptors for the bundled fixture corpus."""

from __future__ import annotations

from pathlib import Path

from .catalog import Catalog, DataSource
from .tables import ColumnSchema as Col

STOCK_TICKERS = [
    "Guizhou Maotai",
    "Ningde Times",
    "CSI 300",
    "GEM Index",
    "CSI 1000",
]

FUND_NAMES = [
    "Huaxia Growth",
    "E Fund Blue Chip",
    "Southern Select",
    "GF Stable Gain",
    "Bosera Theme",
]

COMPANY_TICKERS = STOCK_TICKERS[:2] + [
    "BYD",
    "Bank of Hangzhou",
    "Industrial Bank",
    "Vanke",
    "Gree Electric",
    "Midea Group",
    "Hikvision",
    "SF Holding",
]


def default_sources() -> list[DataSource]:
    return [
        DataSource(
            id="econ.gdp",
            kind="csv_file",
            locator="fixtures/gdp.csv",
            task_tags=frozenset({"other"}),
            description="Quarterly gross domestic product by country with year-over-year growth.",
            schema=[
                Col("quarter", "quarter", "reporting quarter"),
                Col("country", "identifier", "country name"),
                Col("gdp", "currency", "GDP for the quarter", unit="billion CNY"),
                Col("gdp_yoy", "percent", "GDP growth versus the same quarter last year", unit="%"),
            ],
        ),
        DataSource(
            id="econ.cpi",
            kind="csv_file",
            locator="fixtures/cpi.csv",
            task_tags=frozenset({"other"}),
            description="Monthly consumer price index by country with year-over-year change.",
            schema=[
                Col("date", "date", "month end date"),
                Col("country", "identifier", "country name"),
                Col("cpi", "number", "consumer price index level"),
                Col("cpi_yoy", "percent", "CPI change versus the same month last year", unit="%"),
            ],
        ),
        DataSource(
            id="stock.daily",
            kind="csv_file",
            locator="fixtures/stocks_daily.csv",
            task_tags=frozenset({"stock"}),
            description="Daily open, high, low, close and volume for stocks and stock indexes.",
            schema=[
                Col("date", "date", "trading day"),
                Col("ticker", "identifier", "stock or index name"),
                Col("open", "currency", "opening price", unit="CNY"),
                Col("high", "currency", "highest price of the day", unit="CNY"),
                Col("low", "currency", "lowest price of the day", unit="CNY"),
                Col("close", "currency", "closing price", unit="CNY"),
                Col("volume", "number", "shares traded"),
            ],
        ),
        DataSource(
            id="fund.nav",
            kind="csv_file",
            locator="fixtures/funds_nav.csv",
            task_tags=frozenset({"fund"}),
            description="Daily net asset value per share for mutual funds with fund manager.",
            schema=[
                Col("date", "date", "valuation day"),
                Col("fund", "identifier", "fund name"),
                Col("nav", "currency", "net asset value per share", unit="CNY"),
                Col("manager", "text", "fund manager name"),
            ],
        ),
        DataSource(
            id="corp.financials",
            kind="csv_file",
            locator="fixtures/financials.csv",
            task_tags=frozenset({"corporation", "stock"}),
            description="Quarterly financial statement indicators for listed companies.",
            schema=[
                Col("quarter", "quarter", "reporting quarter"),
                Col("ticker", "identifier", "company name"),
                Col("revenue", "currency", "operating revenue", unit="billion CNY"),
                Col("revenue_yoy", "percent", "revenue growth year over year", unit="%"),
                Col("net_profit", "currency", "net profit", unit="billion CNY"),
                Col("net_profit_yoy", "percent", "net profit growth year over year", unit="%"),
                Col("roe", "percent", "return on equity", unit="%"),
            ],
        ),
        DataSource(
            id="news.live",
            kind="csv_file",
            locator="fixtures/news.jsonl",
            task_tags=frozenset({"other"}),
            description="Financial news headlines with body text and topic tag.",
            schema=[
                Col("date", "date", "publication day"),
                Col("title", "text", "headline"),
                Col("content", "text", "article body"),
                Col("tag", "identifier", "topic tag"),
            ],
        ),
    ]


def default_catalog(base_dir: str | Path) -> Catalog:
    catalog = Catalog(base_dir=base_dir)
    for src in default_sources():
        catalog.register_source(src)
    return catalog
