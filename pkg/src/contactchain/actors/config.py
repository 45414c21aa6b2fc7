"""Protocol parameters and the zone map shared by every actor."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..raft import RaftTiming
from ..simnet import DAY, HOUR
from ..wire import Location, ZoneCategory

KDC_ADDR = "kdc"


def validator_addr(i: int) -> str:
    return f"v{i}"


@dataclass(frozen=True)
class ProtocolConfig:
    epoch_ms: int = DAY  # credential lifetime; every credential expires on an epoch boundary
    window_ms: int = 14 * DAY
    group_size: int | None = None  # None: one group per credential epoch
    upload_jitter_ms: int = 6 * HOUR
    stay_ms: int = HOUR
    contamination_ms: int = 4 * HOUR
    update_interval_ms: int = HOUR
    weights: tuple[float, float] = (1.0, 0.5)
    th1: float = 10
    th2: float = 50
    aggregation: bool = True
    bloom: bool = True
    raft_timing: RaftTiming = field(default_factory=lambda: RaftTiming().scaled(1000))
    place_validity_ms: int = 3650 * DAY
    unknown_zone: ZoneCategory | None = ZoneCategory.GREEN

    def __post_init__(self):
        if self.th1 >= self.th2:
            raise ValueError("th1 must be below th2")
        if self.group_size is not None and self.group_size < 1:
            raise ValueError("group size must be positive")
        if self.epoch_ms <= 0 or self.window_ms <= 0:
            raise ValueError("epoch and window must be positive")

    def epoch_of(self, t: int) -> int:
        return t // self.epoch_ms

    def epoch_end(self, t: int) -> int:
        return (t // self.epoch_ms + 1) * self.epoch_ms


@dataclass
class ZoneMap:
    """Zone centres; a location belongs to the nearest centre (ties to the lower id)."""

    centres: dict[int, Location] = field(default_factory=dict)

    def add(self, zone_id: int, lat: float, lon: float) -> Location:
        loc = Location.from_degrees(lat, lon)
        self.centres[zone_id] = loc
        return loc

    def zone_of(self, loc: Location) -> int:
        if not self.centres:
            return 0
        return min(self.centres, key=lambda z: ((self.centres[z].lat_q - loc.lat_q) ** 2
                                                + (self.centres[z].lon_q - loc.lon_q) ** 2, z))

    def location(self, zone_id: int) -> Location:
        return self.centres[zone_id]

    def ids(self) -> list[int]:
        return sorted(self.centres)
