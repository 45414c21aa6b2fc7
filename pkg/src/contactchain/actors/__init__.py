"""Protocol participants and the sessions between them."""

from .authority import HealthAuthorityActor
from .config import KDC_ADDR, ProtocolConfig, ZoneMap, validator_addr
from .evidence import Directory, Evidence, Kind, TraceState, UpdateEntry, derive, zone_records
from .kdc import KdcActor
from .place import PlaceActor, Visit
from .protocol import (Abort, HandshakeResult, TestOutcome, UploadPlan, Verdict, check_status, check_zone,
                       contact_handshake, renew_credentials, report_infection, resolve_latest_keys, run_status_update,
                       run_test, visit_place)
from .user import Health, RecordGroup, UserActor

__all__ = [
    "Abort", "Directory", "Evidence", "HandshakeResult", "Health", "HealthAuthorityActor", "KDC_ADDR", "KdcActor",
    "Kind", "PlaceActor", "ProtocolConfig", "RecordGroup", "TestOutcome", "TraceState", "UpdateEntry",
    "UploadPlan", "UserActor", "Verdict", "Visit", "ZoneMap", "check_status", "check_zone", "contact_handshake",
    "derive", "renew_credentials", "report_infection", "resolve_latest_keys", "run_status_update", "run_test",
    "validator_addr", "visit_place", "zone_records",
]
