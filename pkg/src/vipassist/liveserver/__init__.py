"""Live human-in-the-loop sessions over a websocket."""
from .core import (
    MODES,
    ModelSet,
    ServerConfig,
    SessionRecord,
    SessionScript,
    Task,
    TrialEngine,
    make_engine,
    record_session,
    replay_session,
    run_scripted_session,
    script_from_dict,
)
from .server import FrameQueue, drive_session, run_session, serve_session

__all__ = [
    "MODES",
    "ModelSet",
    "ServerConfig",
    "SessionRecord",
    "SessionScript",
    "Task",
    "TrialEngine",
    "FrameQueue",
    "drive_session",
    "make_engine",
    "record_session",
    "replay_session",
    "run_scripted_session",
    "run_session",
    "script_from_dict",
    "serve_session",
]
