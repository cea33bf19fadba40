"""Event streams: storage, windowing, file formats and synthetic generators.

Events are held column-wise in numpy arrays (``x``, ``y``, ``t``, ``p``).
Timestamps are int64 microseconds and polarity is always stored as -1/+1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

DEFAULT_WIDTH = 346
DEFAULT_HEIGHT = 260

# u16 x, u16 y, i64 t, i8 p -- packed, little-endian, 13 bytes per record
EVB_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<i8"), ("p", "i1")])

PATTERNS = ("moving_bar", "random", "two_blobs")


class EventFormatError(ValueError):
    """Raised for malformed or out-of-range event records."""


@dataclass(frozen=True)
class TimeWindow:
    t_start: int
    t_end: int

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"empty time window [{self.t_start}, {self.t_end})")

    @property
    def length(self) -> int:
        return self.t_end - self.t_start


class EventStream:
    """Immutable, time-sorted sequence of events from one sensor.

    Slicing (``stream[a:b]``) returns a stream whose arrays are views into
    this one, so windows never copy event data.
    """

    __slots__ = ("width", "height", "x", "y", "t", "p")

    def __init__(self, x, y, t, p, width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT, *, _trusted=False):
        self.width = int(width)
        self.height = int(height)
        if _trusted:
            arrays = (x, y, t, p)
        else:
            arrays = _validate(x, y, t, p, self.width, self.height)
        for a in arrays:
            a.flags.writeable = False
        self.x, self.y, self.t, self.p = arrays

    @classmethod
    def empty(cls, width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT) -> "EventStream":
        z = np.zeros(0, np.int64)
        return cls(z, z, z, z, width, height)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, item) -> "EventStream":
        if not isinstance(item, slice) or item.step not in (None, 1):
            raise TypeError("EventStream supports contiguous slicing only")
        return EventStream(
            self.x[item], self.y[item], self.t[item], self.p[item],
            self.width, self.height, _trusted=True,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            (self.width, self.height) == (other.width, other.height)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.p, other.p)
        )

    def __repr__(self) -> str:
        span = f"t=[{self.t[0]}, {self.t[-1]}]" if len(self) else "empty"
        return f"EventStream({len(self)} events, {self.width}x{self.height}, {span})"


def _validate(x, y, t, p, width, height):
    x = np.array(x, dtype=np.int64)
    y = np.array(y, dtype=np.int64)
    t = np.array(t, dtype=np.int64)
    p = np.array(p, dtype=np.int64)
    n = len(t)
    if not (x.shape == y.shape == t.shape == p.shape == (n,)):
        raise ValueError("x, y, t, p must be 1-D arrays of equal length")
    if n == 0:
        return x, y, t, p.astype(np.int8)
    bad = (x < 0) | (x >= width) | (y < 0) | (y >= height)
    if bad.any():
        i = int(np.argmax(bad))
        raise EventFormatError(
            f"event {i}: pixel ({x[i]}, {y[i]}) outside {width}x{height} sensor"
        )
    if (t < 0).any():
        i = int(np.argmax(t < 0))
        raise EventFormatError(f"event {i}: negative timestamp {t[i]}")
    badp = np.abs(p) != 1
    if badp.any():
        i = int(np.argmax(badp))
        raise EventFormatError(f"event {i}: polarity {p[i]} not in {{-1, +1}}")
    if (np.diff(t) < 0).any():
        order = np.argsort(t, kind="stable")
        x, y, t, p = x[order], y[order], t[order], p[order]
    return x, y, t, p.astype(np.int8)


# -- windowing ---------------------------------------------------------------

def window_iter(stream: EventStream, window_us: int) -> Iterator[tuple[TimeWindow, EventStream]]:
    """Partition ``stream`` into consecutive fixed-length half-open windows.

    Windows start at the first timestamp and continue until the last event
    is covered; empty windows in between are yielded too.
    """
    window_us = int(window_us)
    if window_us <= 0:
        raise ValueError("window_us must be positive")
    if len(stream) == 0:
        return
    t = stream.t
    t0 = int(t[0])
    n_windows = (int(t[-1]) - t0) // window_us + 1
    edges = t0 + window_us * np.arange(n_windows + 1, dtype=np.int64)
    bounds = np.searchsorted(t, edges, side="left")
    for k in range(n_windows):
        yield (
            TimeWindow(int(edges[k]), int(edges[k + 1])),
            stream[int(bounds[k]):int(bounds[k + 1])],
        )


def count_window_iter(stream: EventStream, count: int, *, drop_last: bool = False):
    """Partition ``stream`` into windows of ``count`` consecutive events.

    The window of each chunk spans its first timestamp up to one microsecond
    past its last, so every event lies strictly inside it.
    """
    count = int(count)
    if count <= 0:
        raise ValueError("count must be positive")
    for a in range(0, len(stream), count):
        b = min(a + count, len(stream))
        if drop_last and b - a < count:
            return
        span = stream[a:b]
        yield TimeWindow(int(span.t[0]), int(span.t[-1]) + 1), span


# -- parsing / serialization -------------------------------------------------

def parse_events(data: bytes, format: str, width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT,
                 *, zero_one_polarity: bool = False) -> EventStream:
    """Parse CSV or ``.evb`` binary bytes into a sorted :class:`EventStream`.

    With ``zero_one_polarity`` the input polarity must be 0/1 and is remapped
    to -1/+1; otherwise it must already be -1/+1.
    """
    if format == "csv":
        x, y, t, p = _parse_csv(data)
    elif format == "bin":
        if len(data) % EVB_DTYPE.itemsize:
            raise EventFormatError(
                f"binary input of {len(data)} bytes is not a whole number of "
                f"{EVB_DTYPE.itemsize}-byte records (trailing record at offset "
                f"{len(data) - len(data) % EVB_DTYPE.itemsize})"
            )
        rec = np.frombuffer(data, dtype=EVB_DTYPE)
        x, y, t, p = (rec[f].astype(np.int64) for f in ("x", "y", "t", "p"))
    else:
        raise ValueError(f"unknown event format {format!r}")

    allowed = (0, 1) if zero_one_polarity else (-1, 1)
    badp = (p != allowed[0]) & (p != allowed[1])
    if badp.any():
        i = int(np.argmax(badp))
        where = f"line {_csv_line(data, i)}" if format == "csv" else f"offset {i * EVB_DTYPE.itemsize}"
        raise EventFormatError(f"{where}: polarity {p[i]} not in {set(allowed)}")
    if zero_one_polarity:
        p = 2 * p - 1

    bad = (x < 0) | (x >= width) | (y < 0) | (y >= height) | (t < 0)
    if bad.any():
        i = int(np.argmax(bad))
        where = f"line {_csv_line(data, i)}" if format == "csv" else f"offset {i * EVB_DTYPE.itemsize}"
        raise EventFormatError(
            f"{where}: event ({x[i]}, {y[i]}, t={t[i]}) outside {width}x{height} sensor "
            "or negative timestamp"
        )
    return EventStream(x, y, t, p, width, height)


def _data_lines(data: bytes):
    for lineno, raw in enumerate(data.decode("ascii").split("\n"), start=1):
        line = raw.strip()
        if line:
            yield lineno, line


def _csv_line(data: bytes, record_index: int) -> int:
    records = [ln for ln, line in _data_lines(data) if not line[0].isalpha()]
    return records[record_index]


def _parse_csv(data: bytes):
    rows = []
    for lineno, line in _data_lines(data):
        if lineno == 1 and line.replace(" ", "").lower() == "x,y,t,p":
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise EventFormatError(f"line {lineno}: expected 4 fields, got {len(fields)}: {line!r}")
        try:
            rows.append([int(f) for f in fields])
        except ValueError:
            raise EventFormatError(f"line {lineno}: non-integer field in {line!r}") from None
    if not rows:
        z = np.zeros(0, np.int64)
        return z, z, z, z
    arr = np.array(rows, dtype=np.int64)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def serialize_events(stream: EventStream, format: str) -> bytes:
    """Canonical encoding: CSV with ``x,y,t,p`` header and LF rows, or packed ``.evb``."""
    if format == "csv":
        lines = ["x,y,t,p"]
        lines += [f"{a},{b},{c},{d}" for a, b, c, d in
                  zip(stream.x.tolist(), stream.y.tolist(), stream.t.tolist(), stream.p.tolist())]
        return ("\n".join(lines) + "\n").encode("ascii")
    if format == "bin":
        rec = np.empty(len(stream), dtype=EVB_DTYPE)
        rec["x"], rec["y"], rec["t"], rec["p"] = stream.x, stream.y, stream.t, stream.p
        return rec.tobytes()
    raise ValueError(f"unknown event format {format!r}")


def format_for_path(path) -> str:
    return "bin" if str(path).lower().endswith(".evb") else "csv"


def read_events(path, width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT, **kw) -> EventStream:
    with open(path, "rb") as f:
        return parse_events(f.read(), format_for_path(path), width, height, **kw)


def write_events(path, stream: EventStream) -> None:
    with open(path, "wb") as f:
        f.write(serialize_events(stream, format_for_path(path)))


# -- synthetic streams -------------------------------------------------------

def synth_events(pattern: str, rate: float, duration_us: int, seed: int = 0, *,
                 width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT, spacing: str = "uniform",
                 bar_width: int = 1) -> EventStream:
    """Deterministic synthetic stream.

    ``rate`` is in events per second. With ``spacing="uniform"`` exactly
    ``round(rate * duration)`` events are emitted at evenly spaced integer
    timestamps; ``spacing="poisson"`` draws the count and times at random.

    Patterns:
      moving_bar  vertical bar of ``bar_width`` columns sweeping left to right
                  once over the duration; the bar's left column at time t is
                  ``floor((width - bar_width + 1) * t / duration_us)``.
                  All events have polarity +1.
      random      uniform pixels and random polarity.
      two_blobs   two Gaussian blobs orbiting the sensor centre in opposite
                  directions, random polarity.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")
    if rate <= 0 or duration_us <= 0:
        raise ValueError("rate and duration_us must be positive")
    duration_us = int(duration_us)
    rng = np.random.default_rng(seed)

    expected = rate * duration_us / 1e6
    if spacing == "uniform":
        n = int(round(expected))
        t = (np.arange(n, dtype=np.int64) * duration_us) // max(n, 1)
    elif spacing == "poisson":
        n = int(rng.poisson(expected))
        t = np.sort(rng.integers(0, duration_us, n))
    else:
        raise ValueError(f"unknown spacing {spacing!r}")

    if pattern == "moving_bar":
        if not 1 <= bar_width <= width:
            raise ValueError("bar_width must be in [1, width]")
        left = bar_column(t, duration_us, width, bar_width)
        x = left + rng.integers(0, bar_width, n)
        y = rng.integers(0, height, n)
        p = np.ones(n, np.int64)
    elif pattern == "random":
        x = rng.integers(0, width, n)
        y = rng.integers(0, height, n)
        p = rng.choice(np.array([-1, 1]), n)
    else:
        phase = 2 * np.pi * t / duration_us
        which = rng.integers(0, 2, n)
        sign = np.where(which == 0, 1.0, -1.0)
        r = 0.25 * min(width, height)
        cx = width / 2 + r * np.cos(sign * phase + np.pi * which)
        cy = height / 2 + r * np.sin(sign * phase + np.pi * which)
        sigma = 0.04 * min(width, height)
        x = np.clip(np.rint(cx + sigma * rng.standard_normal(n)), 0, width - 1)
        y = np.clip(np.rint(cy + sigma * rng.standard_normal(n)), 0, height - 1)
        p = rng.choice(np.array([-1, 1]), n)
    return EventStream(x.astype(np.int64), y.astype(np.int64), t, p, width, height)


def bar_column(t, duration_us: int, width: int, bar_width: int = 1):
    """Left column of the ``moving_bar`` pattern at time(s) ``t``."""
    t = np.asarray(t, dtype=np.int64)
    return ((width - bar_width + 1) * t) // int(duration_us)
