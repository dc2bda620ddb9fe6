from .engine import OracleRecord, ProtocolRunError, RunResult, Transcript, View, replay, run_protocol, view
from .parties import PartyContext, PiGc, PiHyb, PiSgx, Protocol
from .transport import TRANSPORTS

__all__ = [
    "OracleRecord", "PartyContext", "PiGc", "PiHyb", "PiSgx", "Protocol", "ProtocolRunError",
    "RunResult", "TRANSPORTS", "Transcript", "View", "replay", "run_protocol", "view",
]
