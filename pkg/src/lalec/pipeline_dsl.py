"""Textual front end for pipelines and grammars.

Combinator precedence is ``>>`` over ``&`` over ``|``, all left-associative,
so ``A | B >> C`` is a choice between A and the pipeline B-then-C. Note this
is the opposite of casual reading order: the pipe binds tightest.

Grammar files are lines of ``name := expression ;`` where lowercase-initial
names not present in the operator registry are nonterminal references.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .operator_graph import Individual, Operator, both, choose, configure, pipe


class DslError(Exception):
    pass


class SyntaxError_(DslError):
    def __init__(self, line, col, message):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")


class UnknownOperator(DslError):
    pass


class UndefinedNonterminal(DslError):
    pass


class MissingStart(DslError):
    pass


class NotExpressible(DslError):
    """The operator graph is not a series-parallel shape the DSL can spell."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class ExprAst:
    pass


@dataclass(frozen=True)
class Ref(ExprAst):
    name: str


@dataclass(frozen=True)
class NontermRef(ExprAst):
    name: str


@dataclass(frozen=True)
class Call(ExprAst):
    name: str
    args: tuple[tuple[str, object], ...]


@dataclass(frozen=True)
class Pipe(ExprAst):
    left: ExprAst
    right: ExprAst


@dataclass(frozen=True)
class Both(ExprAst):
    left: ExprAst
    right: ExprAst


@dataclass(frozen=True)
class Choose(ExprAst):
    left: ExprAst
    right: ExprAst


@dataclass(frozen=True)
class GrammarFile:
    rules: tuple[tuple[str, ExprAst], ...]
    start: str = "start"

    def body(self, name: str) -> ExprAst:
        for rule, expr in self.rules:
            if rule == name:
                return expr
        raise UndefinedNonterminal(name)


# ---------------------------------------------------------------------------
# Tokenizer


@dataclass(frozen=True)
class _Token:
    kind: str  # name, number, string, punct, end
    value: object
    line: int
    col: int


_PUNCT = (">>", ":=", "(", ")", "|", "&", ",", "=", ";")


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        matched = next((p for p in _PUNCT if text.startswith(p, i)), None)
        if matched:
            tokens.append(_Token("punct", matched, line, start_col))
            i += len(matched)
            col += len(matched)
            continue
        if c == '"':
            j = i + 1
            chars = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    chars.append(text[j + 1])
                    j += 2
                else:
                    chars.append(text[j])
                    j += 1
            if j >= n:
                raise SyntaxError_(line, start_col, "unterminated string literal")
            tokens.append(_Token("string", "".join(chars), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit() or (c in "+-" and i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == ".")) \
                or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            if text[j] in "+-":
                j += 1
            while j < n and (text[j].isdigit() or text[j] in ".eE" or
                             (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            literal = text[i:j]
            try:
                value = int(literal)
            except ValueError:
                try:
                    value = float(literal)
                except ValueError:
                    raise SyntaxError_(line, start_col, f"bad number literal {literal!r}") from None
            tokens.append(_Token("number", value, line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        raise SyntaxError_(line, start_col, f"unexpected character {c!r}")
    tokens.append(_Token("end", None, line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent following the precedence ladder)


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, value: str) -> _Token:
        token = self.peek()
        if token.kind == "punct" and token.value == value:
            return self.advance()
        raise SyntaxError_(token.line, token.col, f"expected {value!r}")

    def fail(self, message: str):
        token = self.peek()
        raise SyntaxError_(token.line, token.col, message)

    def parse_expression(self) -> ExprAst:
        node = self.parse_both()
        while self.peek().kind == "punct" and self.peek().value == "|":
            self.advance()
            node = Choose(node, self.parse_both())
        return node

    def parse_both(self) -> ExprAst:
        node = self.parse_pipe()
        while self.peek().kind == "punct" and self.peek().value == "&":
            self.advance()
            node = Both(node, self.parse_pipe())
        return node

    def parse_pipe(self) -> ExprAst:
        node = self.parse_atom()
        while self.peek().kind == "punct" and self.peek().value == ">>":
            self.advance()
            node = Pipe(node, self.parse_atom())
        return node

    def parse_atom(self) -> ExprAst:
        token = self.peek()
        if token.kind == "punct" and token.value == "(":
            self.advance()
            node = self.parse_expression()
            self.expect(")")
            return node
        if token.kind == "name":
            self.advance()
            if self.peek().kind == "punct" and self.peek().value == "(":
                self.advance()
                args = self.parse_args()
                self.expect(")")
                return Call(token.value, args)
            return Ref(token.value)
        self.fail("expected an operator name or parenthesized expression")

    def parse_args(self) -> tuple:
        args = []
        if self.peek().kind == "punct" and self.peek().value == ")":
            return ()
        while True:
            name_token = self.peek()
            if name_token.kind != "name":
                self.fail("expected an argument name")
            self.advance()
            self.expect("=")
            args.append((name_token.value, self.parse_literal()))
            if self.peek().kind == "punct" and self.peek().value == ",":
                self.advance()
                continue
            return tuple(args)

    def parse_literal(self):
        token = self.peek()
        if token.kind in ("number", "string"):
            self.advance()
            return token.value
        if token.kind == "name":
            self.advance()
            if token.value == "true":
                return True
            if token.value == "false":
                return False
            if token.value == "null":
                return None
            return Ref(token.value)  # operator-valued argument
        self.fail("expected a literal or operator name")


def parse_expr_ast(text: str) -> ExprAst:
    parser = _Parser(_tokenize(text))
    node = parser.parse_expression()
    if parser.peek().kind != "end":
        parser.fail("unexpected trailing input")
    return node


# ---------------------------------------------------------------------------
# Building operators from ASTs


def build_operator(ast: ExprAst, registry: Mapping[str, Individual]) -> Operator:
    if isinstance(ast, Ref):
        return _resolve(ast.name, registry)
    if isinstance(ast, NontermRef):
        raise UnknownOperator(f"nonterminal {ast.name!r} outside a grammar")
    if isinstance(ast, Call):
        op = _resolve(ast.name, registry)
        config = {}
        for key, value in ast.args:
            if isinstance(value, Ref):
                value = _resolve(value.name, registry)
            config[key] = value
        return configure(op, config)
    if isinstance(ast, Pipe):
        return pipe(build_operator(ast.left, registry), build_operator(ast.right, registry))
    if isinstance(ast, Both):
        return both(build_operator(ast.left, registry), build_operator(ast.right, registry))
    if isinstance(ast, Choose):
        return choose([build_operator(ast.left, registry), build_operator(ast.right, registry)])
    raise TypeError(f"not an expression node: {ast!r}")


def _resolve(name: str, registry: Mapping[str, Individual]) -> Individual:
    try:
        return registry[name]
    except KeyError:
        raise UnknownOperator(f"unknown operator {name!r}") from None


def parse_expr(text: str, registry: Mapping[str, Individual]) -> Operator:
    """Parse a combinator expression into a planned operator."""
    return build_operator(parse_expr_ast(text), registry)


# ---------------------------------------------------------------------------
# Grammar files


def parse_grammar(text: str, registry: Mapping[str, Individual],
                  start: str = "start") -> GrammarFile:
    """Parse ``name := expression ;`` rules; bare lowercase names that are
    not registered operators become nonterminal references."""
    parser = _Parser(_tokenize(text))
    rules: list[tuple[str, ExprAst]] = []
    while parser.peek().kind != "end":
        name_token = parser.peek()
        if name_token.kind != "name":
            parser.fail("expected a rule name")
        parser.advance()
        parser.expect(":=")
        body = parser.parse_expression()
        parser.expect(";")
        rules.append((name_token.value, body))
    rule_names = [name for name, _ in rules]
    if len(set(rule_names)) != len(rule_names):
        raise DslError("duplicate rule names in grammar")
    for name in rule_names:
        if name in registry:
            raise DslError(f"rule {name!r} shadows a registered operator")
        if not name[0].islower():
            raise DslError(f"rule names must start lowercase, got {name!r}")
    resolved = tuple((name, _mark_nonterminals(body, set(rule_names), registry))
                     for name, body in rules)
    if start not in rule_names:
        raise MissingStart(f"grammar has no {start!r} rule")
    for name, body in resolved:
        _check_refs(body, set(rule_names), registry)
    return GrammarFile(resolved, start)


def _mark_nonterminals(ast: ExprAst, rule_names, registry) -> ExprAst:
    if isinstance(ast, Ref):
        if ast.name not in registry and ast.name[0].islower():
            return NontermRef(ast.name)
        return ast
    if isinstance(ast, (Call, NontermRef)):
        return ast
    if isinstance(ast, Pipe):
        return Pipe(_mark_nonterminals(ast.left, rule_names, registry),
                    _mark_nonterminals(ast.right, rule_names, registry))
    if isinstance(ast, Both):
        return Both(_mark_nonterminals(ast.left, rule_names, registry),
                    _mark_nonterminals(ast.right, rule_names, registry))
    if isinstance(ast, Choose):
        return Choose(_mark_nonterminals(ast.left, rule_names, registry),
                      _mark_nonterminals(ast.right, rule_names, registry))
    return ast


def _check_refs(ast: ExprAst, rule_names, registry) -> None:
    if isinstance(ast, NontermRef):
        if ast.name not in rule_names:
            raise UndefinedNonterminal(f"nonterminal {ast.name!r} has no rule")
        return
    if isinstance(ast, Ref):
        if ast.name not in registry:
            raise UnknownOperator(f"unknown operator {ast.name!r}")
        return
    if isinstance(ast, Call):
        if ast.name not in registry:
            raise UnknownOperator(f"unknown operator {ast.name!r}")
        return
    if isinstance(ast, (Pipe, Both, Choose)):
        _check_refs(ast.left, rule_names, registry)
        _check_refs(ast.right, rule_names, registry)


# ---------------------------------------------------------------------------
# Pretty printing


_PREC_ATOM, _PREC_PIPE, _PREC_BOTH, _PREC_CHOOSE = 4, 3, 2, 1


def pretty_print(op: Operator) -> str:
    """Canonical minimally parenthesized text for series-parallel operators.

    Raises NotExpressible for graphs the combinators cannot spell; callers
    fall back to an explicit steps/edges rendering.
    """
    text, _ = _print(op)
    return text


def _print(op: Operator) -> tuple[str, int]:
    from .operator_graph import Choice, Pipeline

    if isinstance(op, Individual):
        if not op.bound:
            return op.name, _PREC_ATOM
        parts = []
        for key in sorted(op.bound):
            parts.append(f"{key}={_literal(op.bound[key])}")
        return f"{op.name}({', '.join(parts)})", _PREC_ATOM
    if isinstance(op, Choice):
        rendered = [_wrap(_print(a), _PREC_CHOOSE) for a in op.alternatives]
        return " | ".join(rendered), _PREC_CHOOSE
    if isinstance(op, Pipeline):
        return _print_graph(list(range(len(op.steps))), op)
    raise TypeError(f"not an operator: {op!r}")


def _wrap(printed: tuple[str, int], parent_prec: int) -> str:
    text, prec = printed
    return f"({text})" if prec < parent_prec else text


def _literal(value) -> str:
    if value is True:
        return "true"
    if value is False:
        return "false"
    if value is None:
        return "null"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, Individual) and not value.bound:
        return value.name
    raise NotExpressible(f"cannot spell argument {value!r} in the pipeline language")


def _print_graph(nodes: list[int], pipeline) -> tuple[str, int]:
    if len(nodes) == 1:
        return _print(pipeline.steps[nodes[0]])
    node_set = set(nodes)
    internal = [(i, j) for i, j in pipeline.edges if i in node_set and j in node_set]

    components = _components(nodes, internal)
    if len(components) > 1:
        rendered = [_wrap(_print_graph(sorted(c), pipeline), _PREC_BOTH) for c in components]
        return " & ".join(rendered), _PREC_BOTH

    # Series decomposition: the shortest prefix whose boundary is a complete
    # sinks-to-sources bipartite cut (exactly what the pipe combinator built).
    order = sorted(nodes)
    for cut in range(1, len(order)):
        prefix, suffix = set(order[:cut]), set(order[cut:])
        crossing = [(i, j) for i, j in internal if i in prefix and j in suffix]
        backward = [(i, j) for i, j in internal if i in suffix and j in prefix]
        if backward:
            continue
        prefix_sinks = {i for i in prefix
                        if not any(a == i and b in prefix for a, b in internal)}
        suffix_sources = {j for j in suffix
                          if not any(b == j and a in suffix for a, b in internal)}
        expected = {(i, j) for i in prefix_sinks for j in suffix_sources}
        if set(crossing) == expected and expected:
            left = _print_graph(sorted(prefix), pipeline)
            right = _print_graph(sorted(suffix), pipeline)
            return f"{_wrap(left, _PREC_PIPE)} >> {_wrap(right, _PREC_PIPE)}", _PREC_PIPE
    raise NotExpressible("pipeline graph is not series-parallel")


def _components(nodes, edges) -> list[set[int]]:
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    groups: dict[int, set[int]] = {}
    for n in nodes:
        groups.setdefault(find(n), set()).add(n)
    return sorted(groups.values(), key=min)
