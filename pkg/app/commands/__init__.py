"""
Command layer for deintensify.
Each module registers its subcommands on the top-level parser.
"""
from app.core.models import (
    CLOSE_NOT_REJECTED,
    DECLARE_NI,
    STOP_INFERIOR,
    STOP_TOXICITY,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2

# Decision exit codes for scripting; continue and pause exit 0
DECISION_EXIT_CODES = {
    DECLARE_NI: 3,
    STOP_INFERIOR: 4,
    STOP_TOXICITY: 5,
    CLOSE_NOT_REJECTED: 6,
}


def decision_exit_code(decision: str) -> int:
    return DECISION_EXIT_CODES.get(decision, EXIT_OK)
