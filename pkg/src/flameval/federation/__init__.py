"""Coordinator/participant protocol for FLAM evaluation over pluggable transports."""

from .messages import (
    MAX_FRAME,
    SCHEMA_VERSION,
    Phase,
    RoundMessage,
    decode_message,
    encode_message,
)
from .protocol import Coordinator, CoordinatorState, Participant, ParticipantState
from .runner import run_in_process, run_over_sockets, run_round
from .transport import Listener, SocketConnection, channel_pair
