import itertools
import json
import random

import pytest

from lalec import operator_graph as og
from lalec import schema_model as sm
from lalec import space_backends as sb
from lalec.operator_graph import choose, configure, freeze_trainable, pipe
from lalec.pipeline_dsl import parse_expr
from lalec.space_backends import (
    ChoiceIR,
    LeafIR,
    StepMapIR,
    compile_space,
    emit_flat,
    emit_grid,
    emit_hierarchical,
    emit_pcs,
    read_pcs,
    sample_space,
)
from lalec.space_normalizer import Cat

from conftest import probe_lattice


@pytest.fixture(scope="module")
def running_example(registry):
    return compile_space(parse_expr("PCA >> (J48 | LR)", registry))


def running_probe_points(registry):
    """Every categorical combination x continuous lattice for the running
    example, expressed as flat mangled points."""
    n_values = probe_lattice(0.0, 1.0) + ["mle"]
    points = []
    for n in n_values:
        for r in (True, False):
            for c in probe_lattice(0.0, 0.5):
                points.append({"pca__N": n, "step1__D": "J48", "step1__R": r, "step1__C": c})
        for solver in ("linear", "sag", "lbfgs"):
            for penalty in ("l1", "l2"):
                points.append({"pca__N": n, "step1__D": "LR",
                               "step1__solver": solver, "step1__penalty": penalty})
    return points


def point_is_valid(registry, point):
    pca_ok = sm.validate({"N": point["pca__N"]}, registry["PCA"].schema).ok
    if point["step1__D"] == "J48":
        step_ok = sm.validate({"R": point["step1__R"], "C": point["step1__C"]},
                              registry["J48"].schema).ok
    else:
        step_ok = sm.validate({"solver": point["step1__solver"],
                               "penalty": point["step1__penalty"]},
                              registry["LR"].schema).ok
    return pca_ok and step_ok


def flat_member(rows, point):
    for row in rows:
        if set(row) != set(point):
            continue
        if all(_admits(row[k], v) for k, v in point.items()):
            return True
    return False


def _admits(domain, value):
    from lalec.space_normalizer import _domain_admits

    return _domain_admits(domain, value)


def hier_member(doc, point):
    kind = doc["kind"]
    if kind == "steps":
        return all(hier_member(child, point) for child in doc["steps"].values())
    if kind == "choice":
        branch = point.get(doc["discriminant"])
        if branch not in doc["branches"]:
            return False
        return hier_member(doc["branches"][branch], point)
    for disjunct in doc["disjuncts"]:
        if all(_doc_admits(domain, point.get(name)) for name, domain in disjunct.items()):
            return True
    return False


def _doc_admits(domain, value):
    if domain["kind"] == "categorical":
        return any(sm.scalar_eq(value, v) for v in domain["values"])
    if domain["kind"] == "continuous":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return False
        if domain["integer"] and float(value) != int(value):
            return False
        if value < domain["lo"] or (domain["loOpen"] and value == domain["lo"]):
            return False
        if value > domain["hi"] or (domain["hiOpen"] and value == domain["hi"]):
            return False
        return True
    return True


class TestCombine:
    def test_running_example_ir_shape(self, running_example):
        ir = running_example.ir
        assert isinstance(ir, StepMapIR)
        tokens = [t for t, _ in ir.steps]
        assert tokens == ["pca", "step1"]
        pca = dict(ir.steps)["pca"]
        assert isinstance(pca, LeafIR)
        assert len(pca.nf.disjuncts) == 2
        choice = dict(ir.steps)["step1"]
        assert isinstance(choice, ChoiceIR)
        assert choice.discriminant == "step1__D"
        assert [v for v, _ in choice.branches] == ["J48", "LR"]
        assert [len(b.nf.disjuncts) for _, b in choice.branches] == [2, 2]

    def test_single_operator_wraps_into_step_map(self, registry):
        ir = sb.combine(registry["KNN"])
        assert isinstance(ir, StepMapIR)
        assert ir.wrapper
        (token, leaf), = ir.steps
        assert token == "knn"
        assert len(leaf.nf.disjuncts) == 1

    def test_bound_values_removed(self, registry):
        op = configure(registry["KNN"], {"k": 3})
        ir = sb.combine(op)
        (_, leaf), = ir.steps
        assert set(leaf.nf.disjuncts[0]) == {"weighting"}

    def test_bound_value_prunes_disjuncts(self, registry):
        op = configure(registry["J48"], {"R": True})
        ir = sb.combine(op)
        (_, leaf), = ir.steps
        # Only the implication disjunct admits R=true; C stays pinned there.
        assert len(leaf.nf.disjuncts) == 1
        assert leaf.nf.disjuncts[0]["C"].values == (0.25,)

    def test_frozen_contributes_no_dimensions(self, registry):
        frozen = freeze_trainable(configure(registry["KNN"], {}))
        ir = sb.combine(frozen)
        (_, leaf), = ir.steps
        assert leaf.nf.disjuncts == ({},)

    def test_higher_order_slot_recurses(self, registry):
        op = configure(registry["BoostedEnsemble"], {"base": registry["PrunedTree"]})
        ir = sb.combine(op)
        (_, leaf), = ir.steps
        disjunct = leaf.nf.disjuncts[0]
        slot = disjunct["base"]
        assert slot.marker == "boostedensemble__base"
        nested_leaf = slot.nested
        assert isinstance(nested_leaf, LeafIR)
        assert nested_leaf.op.name == "PrunedTree"
        assert "maxDepth" in nested_leaf.nf.disjuncts[0] or \
            "maxDepth" in nested_leaf.nf.disjuncts[1]

    def test_unbound_slot_keeps_null_branch(self, registry):
        ir = sb.combine(registry["BoostedEnsemble"])
        (_, leaf), = ir.steps
        assert len(leaf.nf.disjuncts) == 1
        assert leaf.nf.disjuncts[0]["base"].values == (None,)

    def test_duplicate_step_tokens_suffixed(self, registry):
        p = pipe(registry["NoOp"], pipe(registry["NoOp"], registry["KNN"]))
        ir = sb.combine(p)
        assert [t for t, _ in ir.steps] == ["noop_1", "noop_2", "knn"]

    def test_duplicate_branch_values_suffixed(self, registry):
        c = choose([registry["KNN"], registry["KNN"], registry["LR"]])
        ir = sb.combine(c)
        (_, node), = ir.steps
        assert [v for v, _ in node.branches] == ["KNN", "KNN_2", "LR"]


class TestFlat:
    def test_exactly_eight_disjuncts(self, running_example):
        rows = running_example.flat()
        assert len(rows) == 8

    def test_rows_match_reference_table(self, running_example):
        def canon(row):
            out = {}
            for name, domain in row.items():
                if isinstance(domain, Cat):
                    out[name] = tuple(domain.values)
                else:
                    out[name] = (domain.lo, domain.hi)
            return tuple(sorted(out.items()))

        got = {canon(r) for r in running_example.flat()}
        n_cont, n_mle = (0.0, 1.0), ("mle",)
        expected = set()
        for n in (n_cont, n_mle):
            expected.add(tuple(sorted({
                "pca__N": n, "step1__D": ("J48",),
                "step1__R": (False,), "step1__C": (0.0, 0.5)}.items())))
            expected.add(tuple(sorted({
                "pca__N": n, "step1__D": ("J48",),
                "step1__R": (True, False), "step1__C": (0.25,)}.items())))
            expected.add(tuple(sorted({
                "pca__N": n, "step1__D": ("LR",),
                "step1__solver": ("linear",), "step1__penalty": ("l1", "l2")}.items())))
            expected.add(tuple(sorted({
                "pca__N": n, "step1__D": ("LR",),
                "step1__solver": ("linear", "sag", "lbfgs"),
                "step1__penalty": ("l2",)}.items())))
        assert got == expected

    def test_single_operator_single_disjunct(self, registry):
        rows = emit_flat(sb.combine(registry["KNN"]))
        assert len(rows) == 1

    def test_two_choices_multiply(self, registry):
        op = parse_expr("NoOp >> (Scaler | MinMaxScaler) >> (Concat | NoOp)", registry)
        rows = emit_flat(sb.combine(op))
        assert len(rows) == 4

    def test_count_law_on_random_pipelines(self, registry):
        names = ["NoOp", "Scaler", "KNN", "LR", "J48", "PCA", "MinMaxScaler"]
        rng = random.Random(5)
        for _ in range(25):
            steps = []
            for _ in range(rng.randint(1, 4)):
                if rng.random() < 0.4:
                    alts = rng.sample(names, rng.randint(2, 3))
                    steps.append(choose([registry[a] for a in alts]))
                else:
                    steps.append(registry[rng.choice(names)])
            op = steps[0]
            for step in steps[1:]:
                op = pipe(op, step)
            ir = sb.combine(op)
            rows = emit_flat(ir)
            expected = 1
            for _, node in (ir.steps if isinstance(ir, StepMapIR) else ()):
                if isinstance(node, ChoiceIR):
                    expected *= sum(len(emit_flat(b)) for _, b in node.branches)
                else:
                    expected *= len(node.nf.disjuncts)
            assert len(rows) == expected

    def test_discriminant_only_on_active_path(self, registry):
        op = parse_expr("(KNN | LR) >> NoOp", registry)
        rows = emit_flat(sb.combine(op))
        for row in rows:
            assert sum(1 for k in row if k.endswith("__D")) == 1

    def test_flat_blowup_cap(self, registry):
        op = registry["J48"]
        for _ in range(6):
            op = pipe(op, registry["J48"])  # 2^7 disjuncts
        from lalec.space_normalizer import BlowupExceeded

        with pytest.raises(BlowupExceeded):
            emit_flat(sb.combine(op), limit=100)


class TestHierarchical:
    def test_choice_under_step1(self, running_example):
        doc = running_example.hierarchical()
        assert doc["kind"] == "steps"
        assert list(doc["steps"]) == ["pca", "step1"]
        choice = doc["steps"]["step1"]
        assert choice["kind"] == "choice"
        assert choice["discriminant"] == "step1__D"
        assert list(choice["branches"]) == ["J48", "LR"]

    def test_domains_carry_search_metadata(self, running_example):
        doc = running_example.hierarchical()
        pca = doc["steps"]["pca"]["disjuncts"][0]["pca__N"]
        assert pca == {"kind": "continuous", "lo": 0.0, "hi": 1.0, "loOpen": True,
                       "hiOpen": True, "integer": False, "distribution": "uniform",
                       "default": 0.5}

    def test_frozen_pipeline_document_has_zero_dimensions(self, registry, blobs):
        p = pipe(freeze_trainable(configure(registry["Scaler"], {})),
                 freeze_trainable(configure(registry["KNN"], {})))
        compiled = compile_space(p)
        doc = compiled.hierarchical()
        assert all(step["disjuncts"] == [{}] for step in doc["steps"].values())
        point = sample_space(doc, random.Random(0))
        assert point == {}
        decoded = compiled.decode(point)
        assert og.state_of(decoded) == og.LifecycleState.TRAINABLE

    def test_thousand_samples_decode_and_validate(self, running_example, registry):
        doc = running_example.hierarchical()
        rng = random.Random(123)
        for _ in range(1000):
            point = sample_space(doc, rng)
            decoded = running_example.decode(point)
            for step in decoded.steps:
                report = sm.validate(step.bound, step.schema)
                assert report.ok, (point, report.message())

    def test_slot_domain_carries_marker_and_space(self, registry):
        op = configure(registry["BoostedEnsemble"], {"base": registry["PrunedTree"]})
        doc = emit_hierarchical(sb.combine(op))
        slot = doc["steps"]["boostedensemble"]["disjuncts"][0]["boostedensemble__base"]
        assert slot["kind"] == "operator"
        assert slot["marker"] == "boostedensemble__base"
        assert slot["space"]["kind"] == "disjuncts"

    def test_emission_deterministic(self, running_example):
        first = json.dumps(running_example.hierarchical(), indent=2)
        second = json.dumps(running_example.hierarchical(), indent=2)
        assert first == second


class TestEquivalenceAtProbeResolution:
    def test_soundness_and_completeness(self, running_example, registry):
        rows = running_example.flat()
        doc = running_example.hierarchical()
        points = running_probe_points(registry)
        assert len(points) > 500
        for point in points:
            valid = point_is_valid(registry, point)
            assert flat_member(rows, point) == valid, point
            assert hier_member(doc, point) == valid, point

    def test_flattening_preserves_choice_space(self, registry):
        flat_choice = compile_space(
            choose([registry["KNN"], registry["LR"], registry["J48"]]))
        nested_choice = compile_space(
            og.Choice((registry["KNN"], og.Choice((registry["LR"], registry["J48"])))))

        def domains_without_discriminants(compiled):
            out = []
            for row in compiled.flat():
                out.append(tuple(sorted(
                    (k.split("__")[-1], repr(v)) for k, v in row.items()
                    if not k.endswith("__D"))))
            return sorted(out)

        assert domains_without_discriminants(flat_choice) == \
            domains_without_discriminants(nested_choice)


class TestPcs:
    def test_reparses_and_contains_conditionals(self, running_example):
        text = running_example.pcs()
        assert "step1__C | step1__D == J48" in text
        space = read_pcs(text)
        assert "step1__D" in space.parameters
        assert space.parameters["step1__D"].values == ("J48", "LR")
        assert space.parameters["step1__D"].default == "J48"

    def test_single_categorical_no_conditionals(self, registry):
        text = emit_pcs(sb.combine(registry["StandardScaler"]))
        space = read_pcs(text)
        assert len(space.parameters) == 2
        assert not space.conditions

    def test_spans_exactly_the_flat_disjuncts(self, running_example):
        # Each activity assignment (selectors + discriminant) must activate a
        # parameter set matching exactly one flat row, and cover all eight.
        text = running_example.pcs()
        space = read_pcs(text)
        selectors = [n for n, p in space.parameters.items()
                     if n.endswith("__disjunct") or n.endswith("__D")]
        rows = running_example.flat()
        matched = set()
        combos = itertools.product(*(space.parameters[s].values for s in selectors))
        for combo in combos:
            assignment = dict(zip(selectors, combo))
            active = {}
            for name, param in space.parameters.items():
                conditions = space.conditions.get(name, [])
                relevant = all(
                    assignment.get(parent) == value
                    for parent, value in conditions
                    if parent in assignment
                )
                if relevant and all(parent in assignment for parent, _ in conditions):
                    active[name] = param
                elif not conditions and name not in assignment:
                    active[name] = param
            # skip inconsistent combos (selector for the inactive branch)
            hits = [
                i for i, row in enumerate(rows)
                if _activity_matches_row(active, assignment, row)
            ]
            if hits:
                assert len(hits) == 1
                matched.add(hits[0])
        assert matched == set(range(len(rows)))

    def test_loguniform_flag(self, registry):
        text = emit_pcs(sb.combine(registry["LogRegGD"]))
        assert any(line.endswith("]l") and "learningRate" in line
                   for line in text.splitlines())

    def test_integer_flag(self, registry):
        text = emit_pcs(sb.combine(registry["KNN"]))
        assert any(line.rstrip().endswith("]i") and line.startswith("knn__k")
                   for line in text.splitlines())

    def test_thousand_parsed_samples_decode_and_validate(self, running_example):
        space = read_pcs(running_example.pcs())
        rng = random.Random(99)
        for _ in range(1000):
            point = space.sample(rng)
            decoded = running_example.decode_pcs(point)
            for step in decoded.steps:
                assert sm.validate(step.bound, step.schema).ok, point

    def test_conditional_activation_matches_discriminant(self, running_example):
        space = read_pcs(running_example.pcs())
        rng = random.Random(5)
        for _ in range(300):
            point = space.sample(rng)
            has_j48 = any(k in point for k in ("step1__C", "step1__C__1"))
            assert has_j48 == (point["step1__D"] == "J48")
            has_lr = any(k in point for k in ("step1__solver", "step1__solver__1"))
            assert has_lr == (point["step1__D"] == "LR")

    def test_branch_name_collision_qualified(self, registry):
        c = choose([registry["KNN"], registry["KNN"]])
        text = emit_pcs(sb.combine(c))
        space = read_pcs(text)
        ks = [n for n in space.parameters if n.endswith("__k")]
        assert len(ks) == 2
        assert len(set(ks)) == 2  # unique parameter names per branch

    def test_byte_identical_output(self, running_example):
        assert running_example.pcs() == running_example.pcs()

    def test_nested_slot_round_trip(self, registry):
        op = parse_expr(
            "(MinMaxScaler | StandardScaler) >> BoostedEnsemble(base=PrunedTree)",
            registry)
        compiled = compile_space(op)
        text = compiled.pcs()
        # maxDepth has the same domain in both tree disjuncts: shared line
        assert "boostedensemble__base__maxDepth [1, 8] [3]i" in text
        assert "boostedensemble__base__C__1 | boostedensemble__base__disjunct == 1" in text
        space = read_pcs(text)
        rng = random.Random(55)
        for _ in range(300):
            decoded = compiled.decode_pcs(space.sample(rng))
            nested = decoded.steps[1].bound["base"]
            assert sm.validate(nested.bound, nested.schema).ok


def _activity_matches_row(active, assignment, row):
    expected = {}
    for name, domain in row.items():
        if name.endswith("__D"):
            if assignment.get(name) != domain.values[0]:
                return False
            continue
        expected[name] = domain
    for name, domain in expected.items():
        matches = [p for p in active.values()
                   if p.name == name or p.name.startswith(name + "__")]
        if not any(_param_matches_domain(p, domain) for p in matches):
            return False
    return True


def _param_matches_domain(param, domain):
    if isinstance(domain, Cat):
        if param.kind != "categorical":
            return False
        from lalec.space_backends import _pcs_value

        return param.values == tuple(_pcs_value(v) for v in domain.values)
    if param.kind == "categorical":
        return False
    return abs(param.lo - domain.lo) <= 1e-6 * max(1.0, abs(domain.lo) + 1) and \
        abs(param.hi - domain.hi) <= 1e-6 * max(1.0, abs(domain.hi) + 1)


class TestGrid:
    def test_structure_matches_reference_arity(self, running_example):
        grid = running_example.grid(1, 0)
        assert len(grid["disjuncts"]) == 8
        for disjunct in grid["disjuncts"]:
            for name, values in disjunct["params"].items():
                if name == "pca__N" and not isinstance(values[0], str):
                    assert len(values) == 2 and values[0] == 0.5
                if name == "step1__C" and len(values) > 1:
                    assert values[0] == 0.25

    def test_cell_count_law(self, running_example):
        grid = running_example.grid(1, 0)
        total = 0
        for disjunct in grid["disjuncts"]:
            cells = 1
            for values in disjunct["params"].values():
                cells *= len(values)
            total += cells
        assert grid["cellCount"] == total == 27

    def test_all_categorical_space_unchanged(self, registry):
        grid = emit_grid(sb.combine(registry["LR"]), 3, 42)
        by_solver = {tuple(d["params"]["lr__solver"]): d["params"] for d in grid["disjuncts"]}
        assert by_solver[("linear",)]["lr__penalty"] == ["l1", "l2"]

    def test_deterministic_per_seed(self, running_example):
        a = json.dumps(running_example.grid(2, 7))
        b = json.dumps(running_example.grid(2, 7))
        c = json.dumps(running_example.grid(2, 8))
        assert a == b
        assert a != c

    def test_draws_respect_open_bounds(self, running_example):
        grid = running_example.grid(5, 11)
        for disjunct in grid["disjuncts"]:
            for name, values in disjunct["params"].items():
                if name == "step1__C" and len(values) > 1:
                    assert all(0.0 < v < 0.5 for v in values)

    def test_integer_domain_draws_integers(self, registry):
        grid = emit_grid(sb.combine(registry["KNN"]), 4, 3)
        values = grid["disjuncts"][0]["params"]["knn__k"]
        assert all(isinstance(v, int) for v in values)
        assert values[0] == 5  # declared default first


class TestRandomPipelineSoundness:
    def test_sampled_points_always_validate(self, registry):
        """Seeded fuzz over random pipelines: every point drawn from the
        constrained compile must decode into steps that pass validation."""
        names = ["NoOp", "Scaler", "StandardScaler", "MinMaxScaler", "SelectKVariance",
                 "KNN", "LR", "J48", "LogRegGD", "PrunedTree", "PCA"]
        rng = random.Random(31337)

        def random_operator(depth):
            kind = rng.randrange(4) if depth < 2 else 3
            if kind == 3:
                if rng.random() < 0.15:
                    base = registry[rng.choice(["PrunedTree", "DecisionStump", "KNN"])]
                    return configure(registry["BoostedEnsemble"], {"base": base})
                op = registry[rng.choice(names)]
                defaults = sm.default_config(op.schema)
                if defaults and rng.random() < 0.25:
                    key = rng.choice(sorted(defaults))
                    op = configure(op, {key: defaults[key]})
                return op
            left, right = random_operator(depth + 1), random_operator(depth + 1)
            if kind == 0:
                return pipe(left, right)
            if kind == 1:
                return pipe(og.both(left, right), registry["Concat"])
            return choose([left, right])

        def validate_everywhere(op):
            if isinstance(op, og.Individual):
                assert sm.validate(op.bound, op.schema).ok, op.name
                for value in op.bound.values():
                    if isinstance(value, og.Operator):
                        validate_everywhere(value)
            elif isinstance(op, og.Pipeline):
                for step in op.steps:
                    validate_everywhere(step)

        for _ in range(40):
            op = random_operator(0)
            compiled = compile_space(op)
            doc = compiled.hierarchical()
            for _ in range(15):
                point = sample_space(doc, rng)
                validate_everywhere(compiled.decode(point))


class TestDecode:
    def test_reference_flat_row_point(self, running_example):
        point = {"pca__N": "mle", "step1__D": "LR",
                 "step1__solver": "linear", "step1__penalty": "l1"}
        decoded = running_example.decode(point)
        assert decoded.steps[0].bound == {"N": "mle"}
        assert decoded.steps[1].name == "LR"
        assert decoded.steps[1].bound == {"solver": "linear", "penalty": "l1"}
        assert og.state_of(decoded) == og.LifecycleState.TRAINABLE

    def test_defaults_point(self, running_example):
        point = running_example.default_point()
        decoded = running_example.decode(point)
        assert decoded.steps[0].bound == {"N": 0.5}
        assert decoded.steps[1].name == "J48"
        assert decoded.steps[1].bound == {"R": False, "C": 0.25}

    def test_ensemble_point_rebuilds_nested_operator(self, registry):
        op = parse_expr("(MinMaxScaler | StandardScaler) >> BoostedEnsemble(base=PrunedTree)",
                        registry)
        compiled = compile_space(op)
        rng = random.Random(17)
        point = sample_space(compiled.hierarchical(), rng)
        decoded = compiled.decode(point)
        ensemble = decoded.steps[1]
        nested = ensemble.bound["base"]
        assert nested.name == "PrunedTree"
        assert sm.validate(nested.bound, nested.schema).ok
        assert set(nested.bound) == {"maxDepth", "R", "C"}

    def test_unknown_discriminant_value(self, running_example):
        point = running_example.default_point()
        point["step1__D"] = "SVM"
        with pytest.raises(sb.UnknownMarker):
            running_example.decode(point)

    def test_missing_discriminant(self, running_example):
        with pytest.raises(sb.DecodeError):
            running_example.decode({"pca__N": 0.5})

    def test_pipeline_branch_inside_choice(self, registry, blobs):
        op = parse_expr("Scaler >> (KNN | (SelectKVariance >> LogRegGD))", registry)
        compiled = compile_space(op)
        rows = compiled.flat()
        # 1 scaler x (1 KNN + 1x2 LogRegGD disjuncts through the sub-pipeline)
        assert len(rows) == 3
        keys = {k for row in rows for k in row}
        assert "step1__selectkvariance__k" in keys
        assert "step1__logreggd__learningRate" in keys
        rng = random.Random(4)
        for _ in range(40):
            point = sample_space(compiled.hierarchical(), rng)
            decoded = compiled.decode(point)
            if point["step1__D"] == "Pipeline":
                inner = decoded.steps[1]
                assert isinstance(inner, og.Pipeline)
                assert [s.name for s in inner.steps] == ["SelectKVariance", "LogRegGD"]
            trained = og.fit(decoded, blobs)
            assert og.predict(trained, blobs.X).shape == blobs.y.shape

    def test_pcs_qualifies_colliding_pipeline_branches(self, registry):
        op = parse_expr("(SelectKVariance >> KNN) | (SelectKVariance >> LogRegGD)",
                        registry)
        text = emit_pcs(sb.combine(op))
        space = read_pcs(text)
        k_params = [n for n in space.parameters if n.endswith("selectkvariance__k")]
        assert len(k_params) == 2 and len(set(k_params)) == 2
        compiled = compile_space(op)
        rng = random.Random(12)
        for _ in range(100):
            decoded = compiled.decode_pcs(space.sample(rng))
            assert og.state_of(decoded) == og.LifecycleState.TRAINABLE

    def test_empty_space_emits_one_empty_point_everywhere(self, registry):
        frozen = pipe(freeze_trainable(configure(registry["Scaler"], {})),
                      freeze_trainable(configure(registry["KNN"], {})))
        compiled = compile_space(frozen)
        assert compiled.flat() == [{}]
        grid = compiled.grid(1, 0)
        assert grid["cellCount"] == 1
        assert list(sb.grid_cells(grid)) == [{}]
        space = read_pcs(compiled.pcs())
        assert not space.parameters
        assert space.sample(random.Random(0)) == {}

    def test_unconstrained_decode_accepts_trap_configs(self, registry):
        op = parse_expr("PCA >> (J48 | LR)", registry)
        compiled = compile_space(op, keep_constraints=False)
        point = {"pca__N": 0.5, "step1__D": "J48", "step1__R": True, "step1__C": 0.3}
        decoded = compiled.decode(point)  # dropped schema admits it
        assert decoded.steps[1].bound == {"R": True, "C": 0.3}
        with pytest.raises(og.ValidationFailed):
            compile_space(op).decode(point)  # constrained compile must not
