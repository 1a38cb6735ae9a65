"""Naive reference implementations and randomized trial runners.

These are the independent oracles for the numeric builtins: plain loops
written directly from the documented contracts, no code shared with the
interpreter. The trial runners are also invoked by the acceptance suite.
"""

import random

from copilot.bodylang import parse_and_check, run_body
from copilot.tables import ColumnSchema, DataTable

TRIALS = 200


# -- references ------------------------------------------------------------


def naive_pct_change(series, lag):
    out = []
    for i in range(len(series)):
        prev = series[i - lag] if i >= lag else None
        if series[i] is None or prev is None or prev == 0:
            out.append(None)
        else:
            out.append((series[i] - prev) / prev)
    return out


def naive_moving_avg(series, window):
    out = []
    for i in range(len(series)):
        if i < window - 1:
            out.append(None)
            continue
        bucket = []
        for j in range(i - window + 1, i + 1):
            if series[j] is not None:
                bucket.append(series[j])
        out.append(sum(bucket) / len(bucket) if bucket else None)
    return out


def naive_cum_return(series):
    base = None
    for v in series:
        if v is not None:
            base = v
            break
    out = []
    seen = False
    for v in series:
        if v is not None:
            seen = True
        if not seen or v is None or base is None or base == 0:
            out.append(None)
        else:
            out.append(v / base - 1)
    return out


def naive_topk(values, k, descending):
    decorated = [(v, i) for i, v in enumerate(values) if v is not None]
    decorated.sort(key=lambda p: (-p[0], p[1]) if descending else (p[0], p[1]))
    return [i for _, i in decorated[:k]]


def naive_groupby(groups, values):
    """Per distinct group in first-appearance order: all seven aggregates."""
    order, rows = [], {}
    for g, v in zip(groups, values):
        if g not in rows:
            rows[g] = []
            order.append(g)
        rows[g].append(v)
    out = []
    for g in order:
        non_null = [v for v in rows[g] if v is not None]
        out.append(
            {
                "group": g,
                "sum": sum(non_null) if non_null else 0,
                "avg": sum(non_null) / len(non_null) if non_null else None,
                "min": min(non_null) if non_null else None,
                "max": max(non_null) if non_null else None,
                "count": len(non_null),
                "first": non_null[0] if non_null else None,
                "last": non_null[-1] if non_null else None,
            }
        )
    return out


def ols_extrapolate(series, horizon):
    """Textbook normal-equation OLS, arranged differently from the builtin."""
    xs = [i for i, v in enumerate(series) if v is not None]
    ys = [v for v in series if v is not None]
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    intercept = (sy - slope * sx) / n
    return [intercept + slope * (len(series) + h) for h in range(horizon)]


# -- randomized trials -----------------------------------------------------


def _random_series(rng, min_len=0, max_len=50, null_rate=0.1, non_null_min=0):
    while True:
        n = rng.randint(min_len, max_len)
        series = []
        for _ in range(n):
            if rng.random() < null_rate:
                series.append(None)
            else:
                series.append(round(rng.uniform(-100, 100), 3))
        if sum(v is not None for v in series) >= non_null_min:
            return series


def _run(source, bindings, catalog=None):
    program = parse_and_check(source)
    assert not hasattr(program, "phase"), getattr(program, "message", "")
    result = run_body(program, bindings, catalog)
    assert not hasattr(result, "phase"), getattr(result, "message", "")
    return result


def trial_pct_change(rng):
    series = _random_series(rng)
    lag = rng.randint(1, 5)
    got = _run("out := pct_change(s, lag); return out", {"s": series, "lag": lag})
    return got, naive_pct_change(series, lag)


def trial_moving_avg(rng):
    series = _random_series(rng)
    window = rng.randint(1, 7)
    got = _run("out := moving_avg(s, w); return out", {"s": series, "w": window})
    return got, naive_moving_avg(series, window)


def trial_cum_return(rng):
    series = _random_series(rng)
    got = _run("out := cum_return(s); return out", {"s": series})
    return got, naive_cum_return(series)


def trial_topk(rng):
    series = _random_series(rng, max_len=50)
    table = DataTable(
        [ColumnSchema("id", "identifier"), ColumnSchema("v", "number")],
        [[f"r{i}" for i in range(len(series))], list(series)],
    )
    k = rng.randint(0, 60)
    order = rng.choice(["asc", "desc"])
    got = _run('out := topk(t, "v", k, o); return out', {"t": table, "k": k, "o": order})
    want = table.take(naive_topk(series, k, order == "desc"))
    return got.to_json_obj(), want.to_json_obj()


def trial_groupby_agg(rng):
    n = rng.randint(0, 50)
    names = [f"g{j}" for j in range(rng.randint(1, 6))]
    groups = [rng.choice(names) for _ in range(n)]
    values = _random_series(rng, min_len=n, max_len=n)
    table = DataTable(
        [ColumnSchema("grp", "identifier"), ColumnSchema("v", "number")],
        [groups, values],
    )
    got = _run(
        'out := groupby_agg(t, ["grp"], s := sum(v), a := avg(v), mn := min(v), '
        "mx := max(v), c := count(v), f := first(v), l := last(v)); return out",
        {"t": table},
    )
    want = naive_groupby(groups, values)
    got_rows = [got.row(i) for i in range(got.row_count)]
    want_rows = [
        [w["group"], w["sum"], w["avg"], w["min"], w["max"], w["count"], w["first"], w["last"]]
        for w in want
    ]
    return got_rows, want_rows


def trial_predict_next(rng):
    series = _random_series(rng, min_len=2, max_len=40, non_null_min=2)
    horizon = rng.randint(1, 5)
    got = _run("out := predict_next(s, h); return out", {"s": series, "h": horizon})
    return got, ols_extrapolate(series, horizon)


TRIAL_FNS = {
    "pct_change": trial_pct_change,
    "moving_avg": trial_moving_avg,
    "cum_return": trial_cum_return,
    "topk": trial_topk,
    "groupby_agg": trial_groupby_agg,
}


def run_builtin_trials(name, trials=TRIALS):
    """Exact-match trials; returns list of (case_index, got, want) failures."""
    rng = random.Random(f"builtin-{name}")
    failures = []
    for i in range(trials):
        got, want = TRIAL_FNS[name](rng)
        if got != want:
            failures.append((i, got, want))
    return failures


def run_predict_trials(trials=TRIALS, rtol=1e-9):
    rng = random.Random("builtin-predict_next")
    failures = []
    for i in range(trials):
        got, want = trial_predict_next(rng)
        for a, b in zip(got, want):
            if abs(a - b) > rtol * max(1.0, abs(a), abs(b)):
                failures.append((i, got, want))
                break
        if len(got) != len(want):
            failures.append((i, got, want))
    return failures
