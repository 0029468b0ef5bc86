"""Time & Sales ingestion, lattice storage and increments.

Prices are stored as integer lattice indices ``m`` with ``price = m * delta``
so that reconstructing the last price from the first price and the
b-increments is exact.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from decimal import Decimal, InvalidOperation
from typing import Iterable, Iterator, Sequence, TextIO

log = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"


class TapeError(ValueError):
    """Malformed or inconsistent Time & Sales input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class LatticeSpec:
    delta: Decimal

    def __post_init__(self):
        object.__setattr__(self, "delta", Decimal(str(self.delta)))
        if self.delta <= 0:
            raise ValueError(f"lattice step must be positive, got {self.delta}")

    def index(self, price) -> int:
        """Lattice index of ``price``; raises if the price is off-lattice."""
        q = Decimal(str(price)) / self.delta
        if q != q.to_integral_value():
            raise ValueError(f"price {price} is not a multiple of {self.delta}")
        return int(q)

    def price(self, m: int) -> Decimal:
        return m * self.delta


@dataclass(frozen=True)
class Tick:
    timestamp: datetime
    m: int
    size: int


@dataclass(frozen=True)
class SessionWindow:
    """Daily time-of-day window; ``start > end`` means it opens the evening before."""

    label: str
    start: time
    end: time

    @property
    def overnight(self) -> bool:
        return self.start > self.end

    def session_date(self, ts: datetime) -> date | None:
        t = ts.time()
        if self.overnight:
            if t >= self.start:
                return ts.date() + timedelta(days=1)
            if t <= self.end:
                return ts.date()
            return None
        if self.start <= t <= self.end:
            return ts.date()
        return None

    def bounds(self, day: date) -> tuple[datetime, datetime]:
        begin_day = day - timedelta(days=1) if self.overnight else day
        return datetime.combine(begin_day, self.start), datetime.combine(day, self.end)


@dataclass(frozen=True)
class SessionRange:
    label: str
    start: datetime
    end: datetime
    ticks: tuple[Tick, ...]
    session: date | None = None

    def __len__(self) -> int:
        return len(self.ticks)

    @property
    def volume(self) -> int:
        return sum(t.size for t in self.ticks)

    @property
    def prices(self) -> list[int]:
        return [t.m for t in self.ticks]


@dataclass(frozen=True)
class IncrementSet:
    a: tuple[int, ...]
    b: tuple[int, ...]
    c: tuple[tuple[int, int], ...] = ()  # (c-increment, gap in seconds)

    def __post_init__(self):
        if len(self.a) != len(self.b):
            raise ValueError("a- and b-increments must have equal length")


@dataclass(frozen=True)
class LimitBand:
    """Daily price limits around the previous settlement, in lattice steps."""

    settle: int
    limit: int
    lattice: LatticeSpec | None = None

    def __post_init__(self):
        if self.limit <= 0:
            raise ValueError(f"limit must be a positive number of steps, got {self.limit}")

    @classmethod
    def from_prices(cls, settle, limit, lattice: LatticeSpec) -> "LimitBand":
        return cls(lattice.index(settle), lattice.index(limit), lattice)

    @property
    def up(self) -> int:
        return self.settle + self.limit

    @property
    def down(self) -> int:
        return self.settle - self.limit

    @property
    def levels(self) -> int:
        return 2 * self.limit + 1

    def contains(self, m: int) -> bool:
        return self.down <= m <= self.up


@dataclass
class ParseCounts:
    records: int = 0
    zero_size: int = 0
    outside: int = 0
    kept: int = 0

    def reconcile(self) -> bool:
        return self.records == self.zero_size + self.outside + self.kept


def _parse_timestamp(text: str, line: int) -> datetime:
    text = text.strip()
    try:
        return datetime.strptime(text, TIMESTAMP_FORMAT)
    except ValueError:
        try:
            # fractional seconds are accepted so finer tapes are not ruled out
            return datetime.fromisoformat(text)
        except ValueError:
            raise TapeError(f"bad timestamp {text!r}", line) from None


def iter_records(source: TextIO | str | Iterable[str], lattice: LatticeSpec) -> Iterator[tuple[int, Tick]]:
    """Yield ``(line_number, Tick)`` for every record, zero-size ones included."""
    if isinstance(source, str):
        source = io.StringIO(source)
    for lineno, row in enumerate(csv.reader(source), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if len(row) < 3:
            raise TapeError(f"expected timestamp,price,size but got {row!r}", lineno)
        if lineno == 1 and row[0].strip().lower() in ("timestamp", "time", "datetime"):
            continue
        ts = _parse_timestamp(row[0], lineno)
        try:
            price = Decimal(row[1].strip())
        except InvalidOperation:
            raise TapeError(f"bad price {row[1]!r}", lineno) from None
        try:
            size = int(row[2])
        except ValueError:
            raise TapeError(f"bad size {row[2]!r}", lineno) from None
        if size < 0:
            raise TapeError(f"negative size {size}", lineno)
        if price <= 0:
            raise TapeError(f"non-positive price {price}", lineno)
        try:
            m = lattice.index(price)
        except ValueError as exc:
            raise TapeError(str(exc), lineno) from None
        yield lineno, Tick(ts, m, size)


class TickParser:
    """Splits a tick stream into session ranges and keeps record counts."""

    def __init__(self, lattice: LatticeSpec, windows: Sequence[SessionWindow] = ()):
        self.lattice = lattice
        self.windows = tuple(windows)
        self.counts = ParseCounts()

    def _assign(self, ts: datetime) -> tuple[date, SessionWindow] | None:
        if not self.windows:
            return ts.date(), SessionWindow("custom", time.min, time.max)
        for w in self.windows:
            day = w.session_date(ts)
            if day is not None:
                return day, w
        return None

    def parse(self, source) -> list[SessionRange]:
        self.counts = ParseCounts()
        groups: dict[tuple[date, str], list[Tick]] = {}
        window_of: dict[tuple[date, str], SessionWindow] = {}
        last_line: dict[tuple[date, str], int] = {}
        for lineno, tick in iter_records(source, self.lattice):
            self.counts.records += 1
            if tick.size == 0:
                self.counts.zero_size += 1
                continue
            slot = self._assign(tick.timestamp)
            if slot is None:
                self.counts.outside += 1
                continue
            day, w = slot
            key = (day, w.label)
            ticks = groups.setdefault(key, [])
            if ticks and tick.timestamp < ticks[-1].timestamp:
                raise TapeError(
                    f"timestamp {tick.timestamp} precedes {ticks[-1].timestamp} (line {last_line[key]}) "
                    f"within range {w.label} of {day}",
                    lineno,
                )
            ticks.append(tick)
            window_of[key] = w
            last_line[key] = lineno
            self.counts.kept += 1
        ranges = []
        for key in sorted(groups, key=lambda k: (window_of[k].bounds(k[0])[0], k[1])):
            day, label = key
            ticks = groups[key]
            if self.windows:
                start, end = window_of[key].bounds(day)
            else:
                start, end = ticks[0].timestamp, ticks[-1].timestamp
            ranges.append(SessionRange(label, start, end, tuple(ticks), day))
        log.info(
            "parsed %d records: %d kept, %d zero-size, %d outside ranges",
            self.counts.records, self.counts.kept, self.counts.zero_size, self.counts.outside,
        )
        return ranges


def parse_ticks(source, lattice: LatticeSpec, windows: Sequence[SessionWindow] = ()) -> list[SessionRange]:
    """Parse a ``timestamp,price,size`` CSV stream into session ranges."""
    return TickParser(lattice, windows).parse(source)


def write_ticks(ranges: Iterable[SessionRange], lattice: LatticeSpec, out: TextIO, header: bool = False) -> None:
    if header:
        out.write("timestamp,price,size\n")
    for rng in ranges:
        for t in rng.ticks:
            out.write(f"{t.timestamp.strftime(TIMESTAMP_FORMAT)},{lattice.price(t.m)},{t.size}\n")


def increments(rng: SessionRange, previous: SessionRange | None = None) -> IncrementSet:
    """a- and b-increments of a range; a c-increment when ``previous`` is given."""
    ticks = rng.ticks
    c: tuple[tuple[int, int], ...] = ()
    if previous is not None and previous.ticks and ticks:
        gap = ticks[0].timestamp - previous.ticks[-1].timestamp
        c = ((ticks[0].m - previous.ticks[-1].m, round(gap.total_seconds())),)
    if len(ticks) < 2:
        log.warning("range %s %s has %d tick(s); no increments", rng.session, rng.label, len(ticks))
        return IncrementSet((), (), c)
    a = tuple(round((t1.timestamp - t0.timestamp).total_seconds()) for t0, t1 in zip(ticks, ticks[1:]))
    b = tuple(t1.m - t0.m for t0, t1 in zip(ticks, ticks[1:]))
    return IncrementSet(a, b, c)


def increment_sets(ranges: Sequence[SessionRange]) -> list[IncrementSet]:
    """Increments for consecutive ranges, each carrying the c-increment from its predecessor."""
    return [increments(r, ranges[i - 1] if i else None) for i, r in enumerate(ranges)]


def limit_ranks(band: LimitBand, m: int) -> tuple[int, int]:
    """Smallest and largest b-increment (in steps) reachable from lattice price ``m``."""
    if m < band.down:
        raise ValueError(f"price index {m} is below the down limit {band.down}")
    if m > band.up:
        raise ValueError(f"price index {m} is above the up limit {band.up}")
    return band.down - m, band.up - m
