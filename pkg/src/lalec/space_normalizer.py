"""Rewrite an operator schema into search normal form.

Normal form is a disjunction of flat records, each mapping every
hyperparameter to a categorical or continuous domain. The rewrite is a
bottom-up pass: ``anyOf`` hoists disjunctions to the top, ``allOf``
distributes over them by pairwise intersection, and ``not`` turns into the
relative complement against the declared base domains. Empty intersections
are dropped; overlapping disjuncts are kept as-is.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Mapping

from .schema_model import (
    MISSING,
    AllOfNode,
    AnyNode,
    AnyOfNode,
    EnumNode,
    NotNode,
    ObjectNode,
    OperatorSlotNode,
    Prior,
    RangeNode,
    SchemaNode,
    UnsupportedNegation,
    NoBaseObject,
    is_scalar,
    scalar_eq,
)


class NormalizeError(Exception):
    pass


class BlowupExceeded(NormalizeError):
    def __init__(self, limit):
        super().__init__(f"disjunct count exceeds the cap of {limit}")


class EmptySpace(NormalizeError):
    pass


DEFAULT_BLOWUP_LIMIT = 10_000


@dataclass(frozen=True)
class Domain:
    pass


@dataclass(frozen=True)
class Cat(Domain):
    values: tuple
    default: Any = MISSING


@dataclass(frozen=True)
class Cont(Domain):
    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False
    integer_valued: bool = False
    prior: Prior = Prior()
    default: Any = MISSING


@dataclass(frozen=True)
class OpSlot(Domain):
    """Placeholder for an operator-valued hyperparameter.

    The backend fills in the marker (mangled slot path) and the nested
    search structure once it knows which operator is bound into the slot.
    """

    marker: str | None = None
    nested: Any = None


class _Empty:
    def __repr__(self):
        return "EMPTY"


EMPTY = _Empty()


@dataclass(frozen=True)
class NormalForm:
    disjuncts: tuple[Mapping[str, Domain], ...]

    def names(self) -> tuple[str, ...]:
        return tuple(self.disjuncts[0]) if self.disjuncts else ()


def normalize(schema: SchemaNode, declared: Mapping[str, SchemaNode] | None = None,
              limit: int = DEFAULT_BLOWUP_LIMIT) -> NormalForm:
    """Normalize a full operator schema against its declared base domains."""
    if declared is None:
        from .schema_model import declared_domains
        declared = declared_domains(schema)
    declared_alts = {name: _domain_alternatives(node) for name, node in declared.items()}
    disjuncts = _norm(schema, declared_alts, limit)
    disjuncts = [d for d in disjuncts if all(v is not EMPTY for v in d.values())]
    if not disjuncts:
        raise EmptySpace("no satisfiable disjunct remains")
    defaults = {name: _declared_default(node) for name, node in declared.items()}
    final = []
    for d in disjuncts:
        final.append({name: _attach_default(d[name], defaults.get(name, MISSING)) for name in declared})
    return NormalForm(tuple(final))


def _declared_default(node: SchemaNode):
    if isinstance(node, (RangeNode, EnumNode, AnyOfNode, OperatorSlotNode)):
        if node.default is not MISSING:
            return node.default
        if isinstance(node, AnyOfNode):
            for child in node.children:
                d = _declared_default(child)
                if d is not MISSING:
                    return d
    return MISSING


def _attach_default(domain: Domain, default):
    if default is MISSING:
        return domain
    if isinstance(domain, Cat):
        if any(is_scalar(default) and scalar_eq(default, v) for v in domain.values):
            return Cat(domain.values, default)
        return Cat(domain.values, MISSING)
    if isinstance(domain, Cont):
        if isinstance(default, (int, float)) and not isinstance(default, bool) and \
                _cont_admits(domain, default):
            return Cont(domain.lo, domain.hi, domain.lo_open, domain.hi_open,
                        domain.integer_valued, domain.prior, default)
        return Cont(domain.lo, domain.hi, domain.lo_open, domain.hi_open,
                    domain.integer_valued, domain.prior, MISSING)
    return domain


def _domain_alternatives(node: SchemaNode) -> list[Domain]:
    """A property schema as a list of alternative domains (anyOf hoisted)."""
    if isinstance(node, RangeNode):
        return [Cont(node.lo, node.hi, node.lo_open, node.hi_open,
                     node.integer_valued, node.prior, node.default)]
    if isinstance(node, EnumNode):
        return [Cat(node.values, node.default)]
    if isinstance(node, OperatorSlotNode):
        return [OpSlot()]
    if isinstance(node, AnyOfNode):
        out = []
        for child in node.children:
            out.extend(_domain_alternatives(child))
        return out
    if isinstance(node, AllOfNode):
        alts = [EMPTY]
        first = True
        for child in node.children:
            child_alts = _domain_alternatives(child)
            if first:
                alts, first = child_alts, False
            else:
                alts = [d for a in alts for b in child_alts
                        if (d := intersect_domain(a, b)) is not EMPTY]
        return alts
    if isinstance(node, NotNode):
        raise UnsupportedNegation("negation of a single property domain is not supported")
    raise NormalizeError(f"{type(node).__name__} is not a hyperparameter domain")


def _norm(node: SchemaNode, declared_alts, limit) -> list[dict[str, Domain]]:
    """Bottom-up: return the node's disjuncts over a subset of the names."""
    if isinstance(node, AnyOfNode):
        out = []
        for child in node.children:
            out.extend(_norm(child, declared_alts, limit))
            if len(out) > limit:
                raise BlowupExceeded(limit)
        return out
    if isinstance(node, AllOfNode):
        result: list[dict[str, Domain]] | None = None
        for child in node.children:
            branch = _norm(child, declared_alts, limit)
            if result is None:
                result = branch
                continue
            merged = []
            for left in result:
                for right in branch:
                    combined = _intersect_records(left, right)
                    if combined is not None:
                        merged.append(combined)
                    if len(merged) > limit:
                        raise BlowupExceeded(limit)
            result = merged
        return result if result is not None else []
    if isinstance(node, NotNode):
        return _complement(node.child, declared_alts, limit)
    if isinstance(node, ObjectNode):
        return _norm_object(node, declared_alts, limit)
    if isinstance(node, AnyNode):
        return _fill({}, declared_alts, limit)
    raise NormalizeError(f"cannot normalize {type(node).__name__} as a constraint")


def _norm_object(node: ObjectNode, declared_alts, limit):
    names = [name for name, _ in node.properties]
    per_prop = [_domain_alternatives(sub) for _, sub in node.properties]
    count = 1
    for alts in per_prop:
        count *= max(len(alts), 1)
        if count > limit:
            raise BlowupExceeded(limit)
    records = [dict(zip(names, combo)) for combo in itertools.product(*per_prop)]
    out = []
    for record in records:
        out.extend(_fill(record, declared_alts, limit))
        if len(out) > limit:
            raise BlowupExceeded(limit)
    return out


def _fill(record: dict[str, Domain], declared_alts, limit):
    """Complete a partial record with the declared domains of missing names."""
    missing = [name for name in declared_alts if name not in record]
    if not missing:
        return [dict(record)]
    out = []
    for combo in itertools.product(*(declared_alts[name] for name in missing)):
        filled = dict(record)
        filled.update(zip(missing, combo))
        out.append(filled)
        if len(out) > limit:
            raise BlowupExceeded(limit)
    return out


def _complement(child: ObjectNode, declared_alts, limit):
    """Relative complement of an enum-object: one disjunct per property,
    complementing that property against its declared values."""
    out = []
    for name, sub in child.properties:
        if not isinstance(sub, EnumNode):
            raise UnsupportedNegation(f"cannot complement non-enum property {name!r}")
        alts = declared_alts.get(name)
        if alts is None:
            raise NormalizeError(f"negated property {name!r} has no declared domain")
        if len(alts) != 1 or not isinstance(alts[0], Cat):
            raise UnsupportedNegation(f"declared domain of {name!r} is not a single enum")
        remaining = tuple(v for v in alts[0].values
                          if not any(scalar_eq(v, w) for w in sub.values))
        if not remaining:
            continue
        out.extend(_fill({name: Cat(remaining, alts[0].default)}, declared_alts, limit))
        if len(out) > limit:
            raise BlowupExceeded(limit)
    return out


def _intersect_records(a: dict[str, Domain], b: dict[str, Domain]):
    merged = {}
    for name in a:
        if name not in b:
            merged[name] = a[name]
            continue
        domain = intersect_domain(a[name], b[name])
        if domain is EMPTY:
            return None
        merged[name] = domain
    for name in b:
        if name not in a:
            merged[name] = b[name]
    return merged


def intersect_domain(a: Domain, b: Domain):
    """Intersection of two domains of one hyperparameter, or EMPTY."""
    if a is EMPTY or b is EMPTY:
        return EMPTY
    if isinstance(a, Cat) and isinstance(b, Cat):
        values = tuple(v for v in a.values if any(scalar_eq(v, w) for w in b.values))
        return Cat(values, a.default) if values else EMPTY
    if isinstance(a, Cat) and isinstance(b, Cont):
        values = tuple(v for v in a.values if _cont_admits_scalar(b, v))
        return Cat(values, a.default) if values else EMPTY
    if isinstance(a, Cont) and isinstance(b, Cat):
        values = tuple(v for v in b.values if _cont_admits_scalar(a, v))
        return Cat(values, b.default) if values else EMPTY
    if isinstance(a, Cont) and isinstance(b, Cont):
        if a.lo > b.lo:
            lo, lo_open = a.lo, a.lo_open
        elif b.lo > a.lo:
            lo, lo_open = b.lo, b.lo_open
        else:
            lo, lo_open = a.lo, a.lo_open or b.lo_open
        if a.hi < b.hi:
            hi, hi_open = a.hi, a.hi_open
        elif b.hi < a.hi:
            hi, hi_open = b.hi, b.hi_open
        else:
            hi, hi_open = a.hi, a.hi_open or b.hi_open
        if lo > hi or (lo == hi and (lo_open or hi_open)):
            return EMPTY
        return Cont(lo, hi, lo_open, hi_open,
                    a.integer_valued or b.integer_valued,
                    _merge_priors(a.prior, b.prior), a.default)
    if isinstance(a, OpSlot) and isinstance(b, OpSlot):
        return a
    # Operator slots intersect with nothing else.
    return EMPTY


def _merge_priors(a: Prior, b: Prior) -> Prior:
    # Prefer the non-default choice on both axes; ties favor the left.
    kind = a.kind if a.kind != "uniform" else b.kind
    quant = a.quantization if a.quantization is not None else b.quantization
    return Prior(kind, quant)


def _cont_admits(domain: Cont, value) -> bool:
    if domain.integer_valued and float(value) != int(value):
        return False
    if value < domain.lo or (domain.lo_open and value == domain.lo):
        return False
    if value > domain.hi or (domain.hi_open and value == domain.hi):
        return False
    return True


def _cont_admits_scalar(domain: Cont, value) -> bool:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False
    return _cont_admits(domain, value)


def member(nf: NormalForm, config: Mapping[str, Any]) -> bool:
    """True iff some disjunct admits every value of the config."""
    for disjunct in nf.disjuncts:
        if all(_domain_admits(disjunct[name], value)
               for name, value in config.items() if name in disjunct):
            if all(name in disjunct for name in config):
                return True
    return False


def _domain_admits(domain: Domain, value) -> bool:
    if isinstance(domain, Cat):
        return is_scalar(value) and any(scalar_eq(value, v) for v in domain.values)
    if isinstance(domain, Cont):
        return _cont_admits_scalar(domain, value)
    if isinstance(domain, OpSlot):
        return not is_scalar(value) or isinstance(value, Mapping)
    return False


def drop_constraints(schema: SchemaNode) -> SchemaNode:
    """Keep only the base object of declared domains, discarding every
    constraint conjunct (the unconstrained-ablation compile)."""
    if isinstance(schema, AllOfNode):
        if not schema.children or not isinstance(schema.children[0], ObjectNode):
            raise NoBaseObject("schema has no base object of hyperparameters")
        return schema.children[0]
    return schema


def to_schema(nf: NormalForm) -> SchemaNode:
    """Reconstruct a schema whose meaning is the normal form (test oracle).

    The base object unions each property's domains across disjuncts; the
    disjunction itself rides along as a constraint conjunct, so the result
    has the standard base-plus-constraints layout.
    """
    branches = []
    for disjunct in nf.disjuncts:
        props = []
        for name, domain in disjunct.items():
            props.append((name, _domain_to_node(domain)))
        branches.append(ObjectNode(tuple(props), additional_allowed=False))
    if len(branches) == 1:
        return branches[0]
    union_props = []
    for name in nf.names():
        variants = []
        for disjunct in nf.disjuncts:
            node = _domain_to_node(disjunct[name])
            if node not in variants:
                variants.append(node)
        union_props.append((name, variants[0] if len(variants) == 1 else AnyOfNode(tuple(variants))))
    base = ObjectNode(tuple(union_props), additional_allowed=False)
    return AllOfNode((base, AnyOfNode(tuple(branches))))


def _domain_to_node(domain: Domain) -> SchemaNode:
    if isinstance(domain, Cat):
        return EnumNode(domain.values, domain.default)
    if isinstance(domain, Cont):
        return RangeNode(domain.lo, domain.hi, domain.lo_open, domain.hi_open,
                         domain.integer_valued, domain.prior, domain.default)
    if isinstance(domain, OpSlot):
        return OperatorSlotNode()
    raise NormalizeError(f"cannot express {domain!r} as a schema node")
