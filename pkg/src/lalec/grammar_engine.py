"""Turn pipeline grammars into planned pipelines.

Unfolding expands every nonterminal up to a per-nonterminal depth along each
derivation path, then prunes choice alternatives that still contain an
unresolved nonterminal. Sampling walks the grammar once, resolving each
choice with a seeded generator, so the result has no choices at all.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping

from .operator_graph import Individual, Operator
from .pipeline_dsl import (
    Both,
    Call,
    Choose,
    ExprAst,
    GrammarFile,
    NontermRef,
    Pipe,
    Ref,
    build_operator,
)


class GrammarError(Exception):
    pass


class EmptyAfterPruning(GrammarError):
    pass


class NoTerminatingAlternative(GrammarError):
    pass


@dataclass(frozen=True)
class _Blocked:
    """Marks a nonterminal left unexpanded because its depth ran out."""

    name: str


def unfold(grammar: GrammarFile, depth: int, registry: Mapping[str, Individual]) -> Operator:
    """Expand the start rule, bounding each nonterminal to `depth` expansions
    per derivation path, then prune unresolved alternatives."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    expanded = _expand(grammar.body(grammar.start), grammar, {grammar.start: 1}, depth)
    pruned = _prune(expanded)
    if pruned is None:
        raise EmptyAfterPruning("every alternative still contained a nonterminal")
    return build_operator(pruned, registry)


def _expand(ast: ExprAst, grammar: GrammarFile, counts: dict[str, int], depth: int):
    if isinstance(ast, NontermRef):
        used = counts.get(ast.name, 0)
        if used >= depth:
            return _Blocked(ast.name)
        next_counts = dict(counts)
        next_counts[ast.name] = used + 1
        return _expand(grammar.body(ast.name), grammar, next_counts, depth)
    if isinstance(ast, Pipe):
        return Pipe(_expand(ast.left, grammar, counts, depth),
                    _expand(ast.right, grammar, counts, depth))
    if isinstance(ast, Both):
        return Both(_expand(ast.left, grammar, counts, depth),
                    _expand(ast.right, grammar, counts, depth))
    if isinstance(ast, Choose):
        return Choose(_expand(ast.left, grammar, counts, depth),
                      _expand(ast.right, grammar, counts, depth))
    return ast


def _prune(node):
    """Drop choice alternatives containing blocked nonterminals; collapse
    single-alternative choices; None means the whole subtree is unresolved."""
    if isinstance(node, _Blocked):
        return None
    if isinstance(node, (Ref, Call)):
        return node
    if isinstance(node, Pipe):
        left, right = _prune(node.left), _prune(node.right)
        if left is None or right is None:
            return None
        return Pipe(left, right)
    if isinstance(node, Both):
        left, right = _prune(node.left), _prune(node.right)
        if left is None or right is None:
            return None
        return Both(left, right)
    if isinstance(node, Choose):
        alternatives = [a for a in (_prune(c) for c in _choice_list(node)) if a is not None]
        if not alternatives:
            return None
        if len(alternatives) == 1:
            return alternatives[0]
        out = alternatives[0]
        for alt in alternatives[1:]:
            out = Choose(out, alt)
        return out
    raise TypeError(f"unexpected node {node!r}")


def _choice_list(node) -> list:
    if isinstance(node, Choose):
        return _choice_list(node.left) + _choice_list(node.right)
    return [node]


def sample(grammar: GrammarFile, seed: int, max_depth: int,
           registry: Mapping[str, Individual]) -> Operator:
    """Draw one concrete pipeline: choices resolve uniformly at random, and
    each nonterminal expands at most max_depth times along a derivation path."""
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    rng = random.Random(seed)
    ast = _sample(grammar.body(grammar.start), grammar, {grammar.start: 1}, max_depth, rng)
    return build_operator(ast, registry)


def _sample(ast: ExprAst, grammar, counts, max_depth, rng) -> ExprAst:
    if isinstance(ast, NontermRef):
        used = counts.get(ast.name, 0)
        if used >= max_depth:
            raise NoTerminatingAlternative(
                f"nonterminal {ast.name!r} forced beyond the depth limit"
            )
        next_counts = dict(counts)
        next_counts[ast.name] = used + 1
        return _sample(grammar.body(ast.name), grammar, next_counts, max_depth, rng)
    if isinstance(ast, Choose):
        alternatives = _choice_list(ast)
        eligible = [a for a in alternatives if _expandable(a, counts, max_depth)]
        if not eligible:
            raise NoTerminatingAlternative("no alternative free of exhausted nonterminals")
        return _sample(rng.choice(eligible), grammar, counts, max_depth, rng)
    if isinstance(ast, Pipe):
        return Pipe(_sample(ast.left, grammar, counts, max_depth, rng),
                    _sample(ast.right, grammar, counts, max_depth, rng))
    if isinstance(ast, Both):
        return Both(_sample(ast.left, grammar, counts, max_depth, rng),
                    _sample(ast.right, grammar, counts, max_depth, rng))
    return ast


def _expandable(ast: ExprAst, counts, max_depth) -> bool:
    """True when every nonterminal in the alternative can still expand."""
    if isinstance(ast, NontermRef):
        return counts.get(ast.name, 0) < max_depth
    if isinstance(ast, (Pipe, Both, Choose)):
        return _expandable(ast.left, counts, max_depth) and \
            _expandable(ast.right, counts, max_depth)
    return True


# ---------------------------------------------------------------------------
# Derivation membership (test oracle for grammars without the & combinator)


def derives(grammar: GrammarFile, op: Operator) -> bool:
    """Oracle: can the grammar derive this concrete linear pipeline?"""
    chain = _linear_chain(op)
    if chain is None:
        raise GrammarError("the membership oracle only covers linear pipelines")
    return _derives_expr(NontermRef(grammar.start), tuple(chain), grammar,
                         {grammar.start: 0}, memo_depth=len(chain) + _grammar_size(grammar))


def _grammar_size(grammar: GrammarFile) -> int:
    return 2 * len(grammar.rules) + 2


def _linear_chain(op: Operator):
    from .operator_graph import Pipeline

    if isinstance(op, Individual):
        return [op.name]
    if not isinstance(op, Pipeline):
        return None
    chain = []
    order = sorted(range(len(op.steps)))
    expected_edges = {(order[i], order[i + 1]) for i in range(len(order) - 1)}
    if set(op.edges) != expected_edges:
        return None
    for index in order:
        step = op.steps[index]
        if not isinstance(step, Individual):
            return None
        chain.append(step.name)
    return chain


def _derives_expr(ast: ExprAst, target: tuple, grammar, counts, memo_depth) -> bool:
    if isinstance(ast, NontermRef):
        # Bound recursion by the target length: deeper derivations can only
        # produce longer chains for the grammars this oracle serves.
        if counts.get(ast.name, 0) > memo_depth:
            return False
        next_counts = dict(counts)
        next_counts[ast.name] = next_counts.get(ast.name, 0) + 1
        return _derives_expr(grammar.body(ast.name), target, grammar, next_counts, memo_depth)
    if isinstance(ast, (Ref, Call)):
        name = ast.name
        return len(target) == 1 and target[0] == name
    if isinstance(ast, Choose):
        return any(_derives_expr(alt, target, grammar, counts, memo_depth)
                   for alt in _choice_list(ast))
    if isinstance(ast, Pipe):
        return any(
            _derives_expr(ast.left, target[:cut], grammar, counts, memo_depth)
            and _derives_expr(ast.right, target[cut:], grammar, counts, memo_depth)
            for cut in range(1, len(target))
        )
    if isinstance(ast, Both):
        raise GrammarError("the membership oracle only covers linear pipelines")
    return False
