"""Broadcast schedules: ordered (episode label, date) pairs."""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass

from .errors import ScheduleOutOfRange, UnsortedSchedule


@dataclass(frozen=True)
class EpisodeSchedule:
    entries: tuple

    def __post_init__(self):
        entries = tuple((str(label), date) for label, date in self.entries)
        if not entries:
            raise ValueError("a schedule needs at least one episode")
        for (_, a), (_, b) in zip(entries, entries[1:]):
            if not a < b:
                raise UnsortedSchedule(f"broadcast dates must be strictly increasing ({a} then {b})")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_dates(cls, dates, labels=None) -> "EpisodeSchedule":
        """Schedule with labels "1".."n" unless ``labels`` are given."""
        dates = list(dates)
        if labels is None:
            labels = [str(i + 1) for i in range(len(dates))]
        return cls(tuple(zip(labels, dates)))

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.entries]

    @property
    def dates(self) -> list[_dt.date]:
        return [date for _, date in self.entries]

    def __len__(self):
        return len(self.entries)

    def indices(self, grid) -> list[int]:
        """Grid index of every broadcast; raises if any falls off the grid."""
        out = []
        for label, date in self.entries:
            k = grid.index_of(date)
            if k is None:
                raise ScheduleOutOfRange(
                    f"episode {label} ({date}) is not a point of the grid "
                    f"{grid.t0}..{grid.end}"
                )
            out.append(k)
        return out
