"""Node-kind vocabulary and kind groupings.

Kinds are the node-type labels emitted by the bundled ESTree parser, plus two
synthetic kinds: ``Project`` (the per-project root) and ``SemanticName``
(identifier-linking nodes). The vocabulary is fixed so that models trained on
one project transfer to another; kinds outside it map to a reserved
out-of-vocabulary slot at encoding time.
"""

from __future__ import annotations

KIND_PROJECT = "Project"
KIND_SEMANTIC = "SemanticName"

# ESTree node types produced by the bundled parser (ES2023, script + module).
PARSER_KINDS: tuple[str, ...] = (
    "Program",
    # statements
    "ExpressionStatement",
    "BlockStatement",
    "EmptyStatement",
    "DebuggerStatement",
    "WithStatement",
    "ReturnStatement",
    "LabeledStatement",
    "BreakStatement",
    "ContinueStatement",
    "IfStatement",
    "SwitchStatement",
    "SwitchCase",
    "ThrowStatement",
    "TryStatement",
    "CatchClause",
    "WhileStatement",
    "DoWhileStatement",
    "ForStatement",
    "ForInStatement",
    "ForOfStatement",
    "StaticBlock",
    # declarations
    "FunctionDeclaration",
    "VariableDeclaration",
    "VariableDeclarator",
    "ClassDeclaration",
    "ClassExpression",
    "ClassBody",
    "MethodDefinition",
    "PropertyDefinition",
    # expressions
    "Identifier",
    "PrivateIdentifier",
    "Literal",
    "TemplateLiteral",
    "TemplateElement",
    "TaggedTemplateExpression",
    "ThisExpression",
    "ArrayExpression",
    "ObjectExpression",
    "Property",
    "FunctionExpression",
    "ArrowFunctionExpression",
    "YieldExpression",
    "AwaitExpression",
    "UnaryExpression",
    "UpdateExpression",
    "BinaryExpression",
    "LogicalExpression",
    "AssignmentExpression",
    "ConditionalExpression",
    "CallExpression",
    "NewExpression",
    "SequenceExpression",
    "MemberExpression",
    "ChainExpression",
    "ParenthesizedExpression",
    "SpreadElement",
    "Super",
    "MetaProperty",
    # patterns
    "RestElement",
    "ArrayPattern",
    "ObjectPattern",
    "AssignmentPattern",
    # modules
    "ImportDeclaration",
    "ImportSpecifier",
    "ImportDefaultSpecifier",
    "ImportNamespaceSpecifier",
    "ImportExpression",
    "ExportNamedDeclaration",
    "ExportDefaultDeclaration",
    "ExportAllDeclaration",
    "ExportSpecifier",
)

KIND_VOCAB: tuple[str, ...] = (KIND_PROJECT, KIND_SEMANTIC) + PARSER_KINDS

CALL_SITE_KINDS = frozenset({"CallExpression", "NewExpression"})

FUNCTION_DEF_KINDS = frozenset(
    {"FunctionDeclaration", "FunctionExpression", "ArrowFunctionExpression"}
)

NAMED_LEAF_KINDS = frozenset({"Identifier", "PrivateIdentifier"})

# Kinds removed by default when pruning. The set targets low-information
# intermediary and leaf nodes; reattachment preserves tree connectivity.
DEFAULT_PRUNE_KINDS = frozenset(
    {
        "ExpressionStatement",
        "BinaryExpression",
        "LogicalExpression",
        "UnaryExpression",
        "SequenceExpression",
        "ParenthesizedExpression",
        "Literal",
        "TemplateElement",
    }
)

# Kinds that house link endpoints or model features; pruning them is refused.
PROTECTED_KINDS = (
    frozenset(
        {
            KIND_PROJECT,
            KIND_SEMANTIC,
            "Program",
            "CallExpression",
            "NewExpression",
            "Identifier",
            "MemberExpression",
            "ObjectExpression",
            "Property",
            "VariableDeclarator",
            "AssignmentExpression",
            "ReturnStatement",
            "ClassDeclaration",
            "MethodDefinition",
        }
    )
    | FUNCTION_DEF_KINDS
)

EDGE_TYPES: tuple[str, ...] = ("ast", "ast_rev", "semantic", "semantic_rev", "call_msg")
