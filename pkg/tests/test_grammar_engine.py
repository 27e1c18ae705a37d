import itertools
from pathlib import Path

import pytest

from lalec.grammar_engine import EmptyAfterPruning, NoTerminatingAlternative, derives, sample, unfold
from lalec.operator_graph import Choice, Individual, Pipeline
from lalec.pipeline_dsl import parse_grammar, pretty_print

FIXTURES = Path(__file__).parent.parent / "fixtures" / "grammars"


@pytest.fixture(scope="module")
def linear_grammar(registry):
    return parse_grammar((FIXTURES / "linear_stages.grammar").read_text(), registry)


@pytest.fixture(scope="module")
def union_grammar(registry):
    return parse_grammar((FIXTURES / "feature_union.grammar").read_text(), registry)


def resolved_chains(op):
    """All linear operator-name chains a planned operator can realize,
    dropping the explicit no-op steps."""
    if isinstance(op, Individual):
        return {() if op.name == "NoOp" else (op.name,)}
    if isinstance(op, Choice):
        out = set()
        for alt in op.alternatives:
            out |= resolved_chains(alt)
        return out
    assert isinstance(op, Pipeline)
    order = sorted(range(len(op.steps)))
    assert set(op.edges) == {(order[i], order[i + 1]) for i in range(len(order) - 1)}
    chains = {()}
    for index in order:
        step_chains = resolved_chains(op.steps[index])
        chains = {prefix + tail for prefix in chains for tail in step_chains}
    return chains


class TestUnfold:
    def test_contains_no_nonterminals_and_builds(self, linear_grammar, registry):
        op = unfold(linear_grammar, 3, registry)
        assert isinstance(op, Pipeline)

    def test_depth3_admits_all_small_topologies(self, linear_grammar, registry):
        chains = resolved_chains(unfold(linear_grammar, 3, registry))
        estimators = ["PrunedTree", "LogRegGD", "KNN"]
        for cleaners, transformers, est in itertools.product(range(3), range(3), estimators):
            target = ("StandardScaler",) * cleaners + ("SelectKVariance",) * transformers + (est,)
            assert target in chains, target

    def test_unfold_monotone_in_depth(self, linear_grammar, registry):
        shallow = resolved_chains(unfold(linear_grammar, 2, registry))
        deep = resolved_chains(unfold(linear_grammar, 3, registry))
        assert shallow <= deep

    def test_non_recursive_grammar(self, registry):
        grammar = parse_grammar("start := NoOp >> KNN;", registry)
        for depth in (1, 2, 5):
            op = unfold(grammar, depth, registry)
            assert [s.name for s in op.steps] == ["NoOp", "KNN"]

    def test_unproductive_rule(self, registry):
        grammar = parse_grammar("start := start;", registry)
        with pytest.raises(EmptyAfterPruning):
            unfold(grammar, 3, registry)

    def test_pruned_choice_collapses_to_single_alternative(self, registry):
        grammar = parse_grammar("start := loop | KNN; loop := NoOp >> loop;", registry)
        op = unfold(grammar, 2, registry)
        assert isinstance(op, Individual)
        assert op.name == "KNN"

    def test_depth_must_be_positive(self, linear_grammar, registry):
        with pytest.raises(ValueError):
            unfold(linear_grammar, 0, registry)


class TestSample:
    def test_deterministic_per_seed(self, union_grammar, registry):
        first = sample(union_grammar, 0, 4, registry)
        second = sample(union_grammar, 0, 4, registry)
        assert first == second

    def test_no_choices_or_nonterminals(self, linear_grammar, registry):
        for seed in range(20):
            op = sample(linear_grammar, seed, 3, registry)
            stack = [op]
            while stack:
                node = stack.pop()
                assert not isinstance(node, Choice)
                if isinstance(node, Pipeline):
                    stack.extend(node.steps)

    def test_choice_free_grammar_ignores_seed(self, registry):
        grammar = parse_grammar("start := NoOp >> KNN;", registry)
        assert sample(grammar, 0, 3, registry) == sample(grammar, 99, 3, registry)

    def test_100_samples_are_derivations(self, linear_grammar, registry):
        for seed in range(100):
            op = sample(linear_grammar, seed, 3, registry)
            assert derives(linear_grammar, op), pretty_print(op)

    def test_samples_lie_in_unfolded_language(self, linear_grammar, registry):
        chains = resolved_chains(unfold(linear_grammar, 4, registry))
        for seed in range(50):
            op = sample(linear_grammar, seed, 3, registry)
            chain = tuple(s.name for s in
                          ([op] if isinstance(op, Individual) else op.steps)
                          if s.name != "NoOp")
            normalized = tuple(n for n in chain)
            assert normalized in chains

    def test_union_grammar_eventually_nonlinear(self, union_grammar, registry):
        shapes = set()
        for seed in range(40):
            op = sample(union_grammar, seed, 4, registry)
            if isinstance(op, Pipeline):
                shapes.add(max((j - i) for i, j in op.edges) if op.edges else 0)
                if any(len(op.predecessors(k)) > 1 for k in range(len(op.steps))):
                    shapes.add("join")
        assert "join" in shapes  # the & branch produced a real union

    def test_forced_recursion_fails(self, registry):
        grammar = parse_grammar("start := NoOp >> start;", registry)
        with pytest.raises(NoTerminatingAlternative):
            sample(grammar, 0, 3, registry)

    def test_derives_rejects_foreign_pipeline(self, linear_grammar, registry):
        from lalec.operator_graph import pipe

        foreign = pipe(registry["KNN"], registry["KNN"])
        assert not derives(linear_grammar, foreign)
