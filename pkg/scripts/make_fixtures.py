"""Generate the bundled fixture datasets under fixtures/.

Deterministic: fixed seeds, stable iteration order. Re-running must
produce byte-identical files. Series are random walks with drift; the
year-over-year columns are computed from the generated levels so derived
indicators stay internally consistent (generation starts one year before
the first emitted period to make that possible).
"""

from __future__ import annotations

import datetime
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures"

FIRST_YEAR = 2018
LAST_YEAR = 2024

STOCKS = {
    # name: (start price, daily drift, daily vol, volume base)
    "Guizhou Maotai": (700.0, 0.0009, 0.018, 3_200_000),
    "Ningde Times": (80.0, 0.0012, 0.026, 9_500_000),
    "CSI 300": (4000.0, 0.0003, 0.012, 180_000_000),
    "GEM Index": (1700.0, 0.0005, 0.017, 110_000_000),
    "CSI 1000": (6200.0, 0.0002, 0.014, 95_000_000),
}

FUNDS = {
    # name: (start nav, daily drift, daily vol, manager)
    "Huaxia Growth": (1.20, 0.0005, 0.009, "Wang Yang"),
    "E Fund Blue Chip": (1.85, 0.0006, 0.011, "Zhang Kun"),
    "Southern Select": (0.95, 0.0004, 0.008, "Li Wei"),
    "GF Stable Gain": (1.42, 0.0003, 0.005, "Fu Youxing"),
    "Bosera Theme": (2.10, 0.0005, 0.012, "Chen Hao"),
}

COMPANIES = {
    # name: (quarterly revenue base in billion CNY, growth per quarter, vol, margin)
    "Guizhou Maotai": (18.0, 0.035, 0.05, 0.48),
    "Ningde Times": (9.0, 0.09, 0.10, 0.11),
    "BYD": (24.0, 0.06, 0.08, 0.045),
    "Bank of Hangzhou": (4.5, 0.04, 0.04, 0.38),
    "Industrial Bank": (38.0, 0.02, 0.03, 0.36),
    "Vanke": (65.0, 0.01, 0.09, 0.065),
    "Gree Electric": (42.0, 0.015, 0.07, 0.13),
    "Midea Group": (60.0, 0.025, 0.05, 0.095),
    "Hikvision": (11.0, 0.03, 0.06, 0.18),
    "SF Holding": (20.0, 0.045, 0.07, 0.04),
}


def weekdays(first_year: int, last_year: int):
    d = datetime.date(first_year, 1, 1)
    stop = datetime.date(last_year, 12, 31)
    while d <= stop:
        if d.weekday() < 5:
            yield d
        d += datetime.timedelta(days=1)


def month_ends(first_year: int, last_year: int):
    for year in range(first_year, last_year + 1):
        for month in range(1, 13):
            if month == 12:
                yield datetime.date(year, 12, 31)
            else:
                yield datetime.date(year, month + 1, 1) - datetime.timedelta(days=1)


def quarters(first_year: int, last_year: int):
    for year in range(first_year, last_year + 1):
        for q in range(1, 5):
            yield f"{year}Q{q}"


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(cell) for cell in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def gen_gdp() -> None:
    rng = random.Random(4101)
    rows = []
    levels = {"China": 21000.0, "United States": 34000.0}
    drift = {"China": 0.016, "United States": 0.011}
    history: dict[tuple[str, str], float] = {}
    for q in quarters(FIRST_YEAR - 1, LAST_YEAR):
        for country in ("China", "United States"):
            levels[country] *= 1 + drift[country] + rng.uniform(-0.006, 0.006)
            gdp = round(levels[country], 1)
            history[(country, q)] = gdp
            if int(q[:4]) < FIRST_YEAR:
                continue
            prev = history[(country, f"{int(q[:4]) - 1}{q[4:]}")]
            yoy = round((gdp / prev - 1) * 100, 2)
            rows.append([q, country, f"{gdp:.1f}", f"{yoy:.2f}"])
    write_csv(OUT / "gdp.csv", ["quarter", "country", "gdp", "gdp_yoy"], rows)


def gen_cpi() -> None:
    rng = random.Random(4102)
    rows = []
    levels = {"China": 101.0, "United States": 104.0}
    drift = {"China": 0.0016, "United States": 0.0024}
    history: dict[tuple[str, str], float] = {}
    for d in month_ends(FIRST_YEAR - 1, LAST_YEAR):
        for country in ("China", "United States"):
            levels[country] *= 1 + drift[country] + rng.uniform(-0.0012, 0.0012)
            cpi = round(levels[country], 2)
            history[(country, f"{d.year}-{d.month:02d}")] = cpi
            if d.year < FIRST_YEAR:
                continue
            prev = history[(country, f"{d.year - 1}-{d.month:02d}")]
            yoy = round((cpi / prev - 1) * 100, 2)
            rows.append([d.isoformat(), country, f"{cpi:.2f}", f"{yoy:.2f}"])
    write_csv(OUT / "cpi.csv", ["date", "country", "cpi", "cpi_yoy"], rows)


def gen_stocks() -> None:
    rng = random.Random(4103)
    rows = []
    prices = {name: spec[0] for name, spec in STOCKS.items()}
    for d in weekdays(FIRST_YEAR, LAST_YEAR):
        for name, (_, drift, vol, volume_base) in STOCKS.items():
            prev = prices[name]
            close = prev * (1 + drift + rng.gauss(0, vol))
            close = max(close, prev * 0.9)
            open_ = prev * (1 + rng.gauss(0, vol / 3))
            high = max(open_, close) * (1 + abs(rng.gauss(0, vol / 2)))
            low = min(open_, close) * (1 - abs(rng.gauss(0, vol / 2)))
            volume = int(volume_base * (1 + rng.uniform(-0.45, 0.45)))
            prices[name] = close
            rows.append(
                [
                    d.isoformat(),
                    name,
                    f"{open_:.2f}",
                    f"{high:.2f}",
                    f"{low:.2f}",
                    f"{close:.2f}",
                    volume,
                ]
            )
    write_csv(
        OUT / "stocks_daily.csv",
        ["date", "ticker", "open", "high", "low", "close", "volume"],
        rows,
    )


def gen_funds() -> None:
    rng = random.Random(4104)
    rows = []
    navs = {name: spec[0] for name, spec in FUNDS.items()}
    for d in weekdays(FIRST_YEAR, LAST_YEAR):
        for name, (_, drift, vol, manager) in FUNDS.items():
            navs[name] *= 1 + drift + rng.gauss(0, vol)
            navs[name] = max(navs[name], 0.2)
            rows.append([d.isoformat(), name, f"{navs[name]:.4f}", manager])
    write_csv(OUT / "funds_nav.csv", ["date", "fund", "nav", "manager"], rows)


def gen_financials() -> None:
    rng = random.Random(4105)
    rows = []
    revenue = {name: spec[0] for name, spec in COMPANIES.items()}
    rev_hist: dict[tuple[str, str], float] = {}
    profit_hist: dict[tuple[str, str], float] = {}
    for q in quarters(FIRST_YEAR - 1, LAST_YEAR):
        for name, (_, growth, vol, margin) in COMPANIES.items():
            revenue[name] *= 1 + growth + rng.uniform(-vol, vol)
            rev = round(revenue[name], 2)
            profit = round(rev * margin * (1 + rng.uniform(-0.12, 0.12)), 2)
            roe = round(margin * 32 * (1 + rng.uniform(-0.15, 0.15)), 2)
            rev_hist[(name, q)] = rev
            profit_hist[(name, q)] = profit
            if int(q[:4]) < FIRST_YEAR:
                continue
            prev_q = f"{int(q[:4]) - 1}{q[4:]}"
            rev_yoy = round((rev / rev_hist[(name, prev_q)] - 1) * 100, 2)
            profit_yoy = round((profit / profit_hist[(name, prev_q)] - 1) * 100, 2)
            rows.append(
                [
                    q,
                    name,
                    f"{rev:.2f}",
                    f"{rev_yoy:.2f}",
                    f"{profit:.2f}",
                    f"{profit_yoy:.2f}",
                    f"{roe:.2f}",
                ]
            )
    write_csv(
        OUT / "financials.csv",
        ["quarter", "ticker", "revenue", "revenue_yoy", "net_profit", "net_profit_yoy", "roe"],
        rows,
    )


NEWS_TEMPLATES = [
    ("{t} shares rally on strong quarterly report", "stock",
     "{t} closed sharply higher after reporting quarterly results above market consensus."),
    ("{t} announces capacity expansion plan", "corporate",
     "{t} said it will expand production capacity over the next two years to meet demand."),
    ("Analysts raise price target for {t}", "stock",
     "Several brokerages lifted their price targets for {t}, citing improving fundamentals."),
    ("{t} slips as sector rotation continues", "stock",
     "{t} fell with peers as investors rotated out of the sector during the session."),
    ("{f} tops fund performance ranking", "fund",
     "{f} ranked first among comparable funds for trailing one-year return."),
    ("{f} manager comments on positioning", "fund",
     "The manager of {f} said the portfolio remains tilted toward high quality growth names."),
    ("CPI print comes in below expectations", "macro",
     "The latest consumer price data rose less than forecast, easing inflation concerns."),
    ("GDP growth steady in latest quarter", "macro",
     "Quarterly output expanded at a pace in line with the prior reading, official data showed."),
    ("Central bank keeps policy rate unchanged", "macro",
     "The central bank held its benchmark rate steady and repeated its prudent policy stance."),
    ("Regulator publishes draft rules for listed firms", "corporate",
     "The securities regulator sought comment on updated disclosure rules for listed firms."),
]


def gen_news() -> None:
    rng = random.Random(4106)
    entities = list(STOCKS) + list(COMPANIES)[2:]
    funds = list(FUNDS)
    items = []
    day = datetime.date(FIRST_YEAR, 1, 8)
    for i in range(40):
        title_tpl, tag, content_tpl = NEWS_TEMPLATES[i % len(NEWS_TEMPLATES)]
        subs = {"t": entities[i % len(entities)], "f": funds[i % len(funds)]}
        items.append(
            {
                "date": day.isoformat(),
                "title": title_tpl.format(**subs),
                "content": content_tpl.format(**subs),
                "tag": tag,
            }
        )
        day += datetime.timedelta(days=rng.randint(40, 70))
    lines = [json.dumps(item, ensure_ascii=False) for item in items]
    (OUT / "news.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    gen_gdp()
    gen_cpi()
    gen_stocks()
    gen_funds()
    gen_financials()
    gen_news()
    for p in sorted(OUT.iterdir()):
        print(f"{p.name}: {p.stat().st_size} bytes")


if __name__ == "__main__":
    main()
