from .registry import (
    ROUTE_POLICY,
    KnowledgeBase,
    KnowledgeError,
    builtin,
    builtin_assets_dir,
    known_predicates,
    known_refiners,
    load_corpus_dir,
    load_manifest_dir,
)
from .retrieval import LexicalIndex, RetrievalHit, tokenize
from .templates import (
    TemplateError,
    instantiates_any,
    placeholders,
    render_command,
    template_pattern,
)
from .toolimpl import ToolError, bind_builtin_tools
from .types import (
    Binding,
    DisclosureStage,
    Enforcement,
    ExecutionType,
    HybridGraphTemplate,
    InstrumentRule,
    KnowledgeView,
    LoopSpec,
    NodeKind,
    NodeTemplate,
    ParamSpec,
    Precondition,
    RuleKind,
    ScpiDocEntry,
    SkillDefinition,
    StateUpdate,
    TemplateCriteria,
    ToolDefinition,
    VerificationKind,
    VerificationRule,
    WorkflowTemplate,
)

__all__ = [
    "ROUTE_POLICY",
    "Binding",
    "DisclosureStage",
    "Enforcement",
    "ExecutionType",
    "HybridGraphTemplate",
    "InstrumentRule",
    "KnowledgeBase",
    "KnowledgeError",
    "KnowledgeView",
    "LexicalIndex",
    "LoopSpec",
    "NodeKind",
    "NodeTemplate",
    "ParamSpec",
    "Precondition",
    "RetrievalHit",
    "RuleKind",
    "ScpiDocEntry",
    "SkillDefinition",
    "StateUpdate",
    "TemplateCriteria",
    "TemplateError",
    "ToolDefinition",
    "ToolError",
    "VerificationKind",
    "VerificationRule",
    "WorkflowTemplate",
    "bind_builtin_tools",
    "builtin",
    "builtin_assets_dir",
    "instantiates_any",
    "known_predicates",
    "known_refiners",
    "load_corpus_dir",
    "load_manifest_dir",
    "placeholders",
    "render_command",
    "template_pattern",
    "tokenize",
]
