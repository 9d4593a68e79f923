from .store import (
    Condition,
    DuplicateVote,
    Exhausted,
    MalformedVote,
    NotAssigned,
    PairState,
    Study,
    StudyConfig,
    StudyError,
    UnknownPair,
)
from .service import create_app, serve
