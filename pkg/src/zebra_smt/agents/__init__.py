from .clients import ClientError, LiveClient, LlmClient, ReferenceClient, ScriptedClient, ScriptLibrary
from .loop import AttemptRecord, IterationRecord, RunConfig, RunResult, decompose, run_feedback_loop
from .state import (
    AgentState,
    Decision,
    Feedback,
    RolePrompt,
    classify_decision,
    evaluate,
    perceive_initial,
    refine_state,
    script_similarity,
)
