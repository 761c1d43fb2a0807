"""Tweet classification: lexicon matching, bot filtering, per-user-period
flags, and the per-country-period Twitter outcome panels."""

from __future__ import annotations

import csv
import datetime as dt
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, SchemaError
from .panel import PanelSeries, PeriodCalendar, assign_period

_ASCII_LOWER = str.maketrans(string.ascii_uppercase, string.ascii_lowercase)

LEXICON_NAMES = ("collective", "political", "bot", "apple_source", "student")
DEFAULT_LEXICON_DIR = Path(__file__).parent / "lexicons" / "v1"

TWEET_CSV_COLUMNS = (
    "tweet_id",
    "user_id",
    "timestamp",
    "country_code",
    "text",
    "source",
    "user_created_at",
    "statuses_count",
    "user_description",
    "user_location",
    "user_lang",
    "tweet_lang",
)

USER_COUNT_OUTCOMES = (
    "users",
    "new_accounts",
    "infrequent_users",
    "not_apple_users",
    "student_users",
    "activist_users",
    "political_users",
)
TWEET_COUNT_OUTCOMES = ("tweets", "collective_tweets", "political_tweets")
PROPORTION_OUTCOMES = ("prop_collective_users", "prop_collective_tweets", "tax_mention_share")
OUTCOME_NAMES = USER_COUNT_OUTCOMES + TWEET_COUNT_OUTCOMES + PROPORTION_OUTCOMES


def ascii_lower(text: str) -> str:
    """Lowercase A-Z only; Unicode case folding is deliberately not applied."""
    return text.translate(_ASCII_LOWER)


@dataclass(frozen=True)
class PhraseLexicon:
    """Named list of exact lowercase phrases; embedded spaces are significant."""

    name: str
    phrases: tuple[str, ...]

    def __post_init__(self):
        for p in self.phrases:
            if not p:
                raise ConfigurationError(f"lexicon {self.name!r} contains an empty phrase")
            if p != ascii_lower(p):
                raise ConfigurationError(
                    f"lexicon {self.name!r} phrase {p!r} is not ASCII-lowercase"
                )


def load_lexicon(path: Path | str, name: str) -> PhraseLexicon:
    """Read one phrase per line; only the trailing newline is stripped."""
    phrases = []
    with open(path, encoding="utf-8", newline="") as f:
        for line in f:
            phrase = line.rstrip("\r\n")
            if phrase:
                phrases.append(phrase)
    return PhraseLexicon(name=name, phrases=tuple(phrases))


def load_lexicons(directory: Path | str | None = None) -> dict[str, PhraseLexicon]:
    """Load the full lexicon set and verify collective/political disjointness."""
    directory = Path(directory) if directory is not None else DEFAULT_LEXICON_DIR
    lexicons = {}
    for name in LEXICON_NAMES:
        path = directory / f"{name}.txt"
        if not path.is_file():
            raise ConfigurationError(f"missing lexicon file {path}")
        lexicons[name] = load_lexicon(path, name)
    overlap = set(lexicons["collective"].phrases) & set(lexicons["political"].phrases)
    if overlap:
        raise ConfigurationError(
            f"collective and political lexicons overlap: {sorted(overlap)}"
        )
    return lexicons


def match_phrases(text: str, lexicon: PhraseLexicon) -> bool:
    """True iff the ASCII-lowercased text contains any phrase as a substring."""
    low = ascii_lower(text)
    return any(p in low for p in lexicon.phrases)


@dataclass(frozen=True)
class TweetRecord:
    """One georeferenced tweet with the user metadata carried at tweet time."""

    tweet_id: str
    user_id: str
    timestamp: dt.datetime
    country_code: str
    text: str
    source: str
    user_created_at: dt.datetime
    statuses_count: int
    user_description: str
    user_location: str
    user_lang: str
    tweet_lang: str


@dataclass(frozen=True)
class UserPeriodFlags:
    """Classification flags for one user in one country-period."""

    user_id: str
    country_code: str
    period: int
    active: bool
    new_account: bool
    infrequent: bool
    not_apple: bool
    student: bool
    activist: bool
    political: bool


def _parse_timestamp(raw: str, row: int, column: str) -> dt.datetime:
    try:
        parsed = dt.datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise SchemaError(f"row {row}: column {column} is not an ISO-8601 timestamp: {raw!r}")
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=dt.timezone.utc)
    return parsed.astimezone(dt.timezone.utc)


def read_tweets_csv(path: Path | str) -> list[TweetRecord]:
    """Parse the tweet CSV schema (RFC 4180, header required, UTF-8)."""
    records = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("row 1: tweet CSV is empty; header row required")
        if tuple(header) != TWEET_CSV_COLUMNS:
            raise SchemaError(f"row 1: expected header {','.join(TWEET_CSV_COLUMNS)}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(TWEET_CSV_COLUMNS):
                raise SchemaError(f"row {row_no}: expected {len(TWEET_CSV_COLUMNS)} fields, got {len(row)}")
            raw = dict(zip(TWEET_CSV_COLUMNS, row))
            country = raw["country_code"]
            if len(country) != 2 or not country.isascii() or not country.isalpha():
                raise SchemaError(f"row {row_no}: country_code {country!r} is not two ASCII letters")
            if not raw["statuses_count"].strip():
                raise SchemaError(f"row {row_no}: statuses_count missing")
            try:
                statuses = int(raw["statuses_count"])
            except ValueError:
                raise SchemaError(f"row {row_no}: statuses_count {raw['statuses_count']!r} is not an integer")
            if statuses < 0:
                raise SchemaError(f"row {row_no}: statuses_count is negative")
            timestamp = _parse_timestamp(raw["timestamp"], row_no, "timestamp")
            created = _parse_timestamp(raw["user_created_at"], row_no, "user_created_at")
            if timestamp < created:
                raise SchemaError(f"row {row_no}: timestamp precedes user_created_at")
            records.append(
                TweetRecord(
                    tweet_id=raw["tweet_id"],
                    user_id=raw["user_id"],
                    timestamp=timestamp,
                    country_code=country.upper(),
                    text=raw["text"],
                    source=raw["source"],
                    user_created_at=created,
                    statuses_count=statuses,
                    user_description=raw["user_description"],
                    user_location=raw["user_location"],
                    user_lang=raw["user_lang"],
                    tweet_lang=raw["tweet_lang"],
                )
            )
    return records


def bot_filter(
    records: Iterable[TweetRecord], lexicons: dict[str, PhraseLexicon]
) -> list[TweetRecord]:
    """Drop every tweet whose user description matches the bot lexicon."""
    bot = lexicons["bot"]
    return [r for r in records if not match_phrases(r.user_description, bot)]


def user_period_flags(
    records: Sequence[TweetRecord],
    cal: PeriodCalendar,
    lexicons: dict[str, PhraseLexicon],
) -> list[UserPeriodFlags]:
    """Reduce bot-filtered tweets to per (user, country, period) flags.

    `infrequent` is a user-level flag fixed at the user's first appearance
    in the dataset: statuses_count divided by whole days since account
    creation (floored at one day) below one tweet per day.
    """
    apple = lexicons["apple_source"]
    student_lex = lexicons["student"]
    collective = lexicons["collective"]
    political = lexicons["political"]

    first_seen: dict[str, TweetRecord] = {}
    for r in records:
        cur = first_seen.get(r.user_id)
        if cur is None or (r.timestamp, r.tweet_id) < (cur.timestamp, cur.tweet_id):
            first_seen[r.user_id] = r
    infrequent_by_user = {}
    for user_id, r in first_seen.items():
        days = max(1, (r.timestamp - r.user_created_at).days)
        infrequent_by_user[user_id] = r.statuses_count / days < 1.0

    groups: dict[tuple[str, str, int], list[TweetRecord]] = {}
    for r in records:
        groups.setdefault((r.user_id, r.country_code, assign_period(r.timestamp, cal)), []).append(r)

    flags = []
    for (user_id, country, period) in sorted(groups):
        tweets = groups[(user_id, country, period)]
        # min() keeps the flag order-independent if records disagree on
        # the account creation time
        created_period = assign_period(min(t.user_created_at for t in tweets), cal)
        flags.append(
            UserPeriodFlags(
                user_id=user_id,
                country_code=country,
                period=period,
                active=True,
                new_account=created_period == period,
                infrequent=infrequent_by_user[user_id],
                not_apple=not any(match_phrases(t.source, apple) for t in tweets),
                student=any(
                    match_phrases(t.user_description, student_lex)
                    or match_phrases(t.user_location, student_lex)
                    for t in tweets
                ),
                activist=any(match_phrases(t.text, collective) for t in tweets),
                political=any(match_phrases(t.text, political) for t in tweets),
            )
        )
    return flags


def twitter_outcomes(
    flags: Sequence[UserPeriodFlags],
    records: Sequence[TweetRecord],
    cal: PeriodCalendar,
    lexicons: dict[str, PhraseLexicon],
    periods: tuple[int, int] | None = None,
) -> dict[str, PanelSeries]:
    """All per-country-period Twitter outcome panels, in levels.

    Count outcomes stay raw so callers can build log(1 + level) variants;
    proportions are emitted directly with zero-denominator cells set to 0
    and flagged.
    """
    collective = lexicons["collective"]
    political = lexicons["political"]

    user_counts = {name: {} for name in USER_COUNT_OUTCOMES}
    for f in flags:
        cell = (f.country_code, f.period)
        for name, value in (
            ("users", f.active),
            ("new_accounts", f.new_account),
            ("infrequent_users", f.infrequent),
            ("not_apple_users", f.not_apple),
            ("student_users", f.student),
            ("activist_users", f.activist),
            ("political_users", f.political),
        ):
            if value:
                user_counts[name][cell] = user_counts[name].get(cell, 0) + 1

    tweet_counts = {name: {} for name in TWEET_COUNT_OUTCOMES}
    tax_collective: dict[tuple[str, int], int] = {}
    for r in records:
        cell = (r.country_code, assign_period(r.timestamp, cal))
        tweet_counts["tweets"][cell] = tweet_counts["tweets"].get(cell, 0) + 1
        if match_phrases(r.text, collective):
            tweet_counts["collective_tweets"][cell] = (
                tweet_counts["collective_tweets"].get(cell, 0) + 1
            )
            if "tax" in ascii_lower(r.text):
                tax_collective[cell] = tax_collective.get(cell, 0) + 1
        if match_phrases(r.text, political):
            tweet_counts["political_tweets"][cell] = (
                tweet_counts["political_tweets"].get(cell, 0) + 1
            )

    if periods is None:
        all_ts = [t for counts in tweet_counts.values() for _, t in counts]
        if not all_ts:
            raise DataError("no tweets and no explicit period range")
        periods = (min(all_ts), max(all_ts))
    countries = tuple(
        sorted(
            {c for counts in tweet_counts.values() for c, _ in counts}
            | {f.country_code for f in flags}
        )
    )

    def to_panel(cells: dict[tuple[str, int], int], name: str) -> PanelSeries:
        lo, hi = periods
        values = np.zeros((len(countries), hi - lo + 1))
        for (c, t), count in cells.items():
            if lo <= t <= hi and c in countries:
                values[countries.index(c), t - lo] = count
        return PanelSeries(
            outcome_name=name,
            countries=countries,
            periods=tuple(range(lo, hi + 1)),
            values=values,
        )

    panels = {name: to_panel(user_counts[name], name) for name in USER_COUNT_OUTCOMES}
    panels.update({name: to_panel(tweet_counts[name], name) for name in TWEET_COUNT_OUTCOMES})

    def ratio_panel(numer: PanelSeries, denom: PanelSeries, name: str) -> PanelSeries:
        zero = denom.values == 0
        values = np.divide(
            numer.values, denom.values, out=np.zeros_like(numer.values), where=~zero
        )
        return PanelSeries(
            outcome_name=name,
            countries=countries,
            periods=numer.periods,
            values=values,
            flagged=zero,
        )

    panels["prop_collective_users"] = ratio_panel(
        panels["activist_users"], panels["users"], "prop_collective_users"
    )
    panels["prop_collective_tweets"] = ratio_panel(
        panels["collective_tweets"], panels["tweets"], "prop_collective_tweets"
    )
    panels["tax_mention_share"] = ratio_panel(
        to_panel(tax_collective, "tax_mention_share"),
        panels["collective_tweets"],
        "tax_mention_share",
    )
    return panels
