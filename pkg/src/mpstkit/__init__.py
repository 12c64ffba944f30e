"""mpstkit: multiparty session types as a compiler toolkit and runtime.

Parse protocol files, project global types onto roles with full merging,
check consistency, statically type process scripts, interpret local types as
finite-state machines, and execute checked processes over an in-process
message-passing network with delegation and use-once endpoints.
"""

from .core import (
    Com,
    End,
    END,
    EndpointPayload,
    Loop,
    Recur,
    RecVar,
    Recv,
    Role,
    Send,
    Sort,
    alpha_normalize,
    branch_lookup,
    struct_eq,
    substitute,
    unfold,
    well_formed,
)
from .projection import MergeError, ProjectionError, merge, merge_all, project
from .consistency import consistent, dual, restrict_to_partner
from .fsm import interpret, isomorphic, to_dot
from .surface import parse_protocol_file, render_file, render_local_type
from .elaborate import elaborate, instantiate, load_text
from .typecheck import check_expr, check_process, check_session
from .runtime import (
    Endpoint,
    GlobalSession,
    LinearityFault,
    ProtocolFault,
    SessionSetupFault,
    new_global_session,
    run,
)

__all__ = [
    "Com", "End", "END", "EndpointPayload", "Loop", "Recur", "RecVar",
    "Recv", "Role", "Send", "Sort",
    "alpha_normalize", "branch_lookup", "struct_eq", "substitute", "unfold",
    "well_formed",
    "MergeError", "ProjectionError", "merge", "merge_all", "project",
    "consistent", "dual", "restrict_to_partner",
    "interpret", "isomorphic", "to_dot",
    "parse_protocol_file", "render_file", "render_local_type",
    "elaborate", "instantiate", "load_text",
    "check_expr", "check_process", "check_session",
    "Endpoint", "GlobalSession", "LinearityFault", "ProtocolFault",
    "SessionSetupFault", "new_global_session", "run",
]
