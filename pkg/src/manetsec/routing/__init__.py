"""Trust-based secure routing: keys, messages and trust bookkeeping."""

from .keys import KeyStore, MissingPairwiseKey, mac, sign, verify
from .messages import (
    DataPacket,
    Evidence,
    RouteReply,
    RouteRequest,
    Signature,
    data_mark,
    mark_chain_valid,
    originate,
    prec_mac,
    prec_mac_valid,
    rreq_mark,
)
from .trust import (
    NeighborTrustTable,
    NoRoute,
    NttEntry,
    RouteEntry,
    TrustParams,
    TrustState,
    select_route,
)

__all__ = [
    "DataPacket", "Evidence", "KeyStore", "MissingPairwiseKey", "NeighborTrustTable", "NoRoute",
    "NttEntry", "RouteEntry", "RouteReply", "RouteRequest", "Signature", "TrustParams",
    "TrustState", "data_mark", "mac", "mark_chain_valid", "originate", "prec_mac",
    "prec_mac_valid", "rreq_mark", "select_route", "sign", "verify",
]
