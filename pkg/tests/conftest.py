from datetime import date, timedelta

from pricedir.ingest import CompanyPanel, MembershipSnapshot


def weekly_dates(n, start=date(2002, 1, 4)):
    return [start + timedelta(weeks=k) for k in range(n)]


def make_panel(ticker="TST", n=None, start=date(2002, 1, 4), **columns):
    """Build a CompanyPanel from keyword columns on consecutive Fridays."""
    if n is None:
        n = len(next(iter(columns.values())))
    return CompanyPanel(ticker, weekly_dates(n, start), {k: list(v) for k, v in columns.items()})


def make_snapshots(members_per_week, start=date(2002, 1, 4)):
    """One snapshot per entry; each entry is an iterable of member tickers."""
    return [
        MembershipSnapshot(day, day, frozenset(members))
        for day, members in zip(weekly_dates(len(members_per_week), start), members_per_week)
    ]
