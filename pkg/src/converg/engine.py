"""Query evaluation over the condensed store.

Basic graph patterns inside GRAPH are matched once per named graph while
the version dimension stays a bitmap: joining two patterns ANDs their
bitmaps, and a row only expands into per-version solutions when a later
operator needs the versioned-graph binding itself. Counting matches per
version never expands at all; it just sums bit columns.

`eval_oracle` is the deliberately naive reference: it evaluates the same
plan over the flat quad list with nested loops, no dictionary, no indexes,
and no bitmaps. The two evaluators must agree on every supported query,
which is what the differential tests exercise.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from decimal import Decimal

from .errors import EvalError, UnknownVngError
from .model import (
    IS_IN_VERSION,
    XSD,
    Term,
    literal,
    numeric_value,
    term_order_key,
    version_iri,
)
from .nquads import serialize_term
from .sparql import (
    AlgebraPlan,
    Bgp,
    GraphPat,
    Join,
    Minus,
    Query,
    SelectAgg,
    SelectVar,
    SubSelect,
    Var,
    column_names,
    parse_query,
    validate_and_name,
)
from .store import Store, bit_for, bitmap_ordinals

logger = logging.getLogger(__name__)

Solution = dict  # variable name -> Term

_XSD_INTEGER = XSD + "integer"
_XSD_DECIMAL = XSD + "decimal"


# --------------------------------------------------------------- solutions


def compatible(a: Solution, b: Solution) -> bool:
    for name, value in a.items():
        other = b.get(name)
        if other is not None and other != value:
            return False
    return True


def merge(a: Solution, b: Solution) -> Solution:
    out = dict(a)
    out.update(b)
    return out


def eval_join(left: list[Solution], right: list[Solution]) -> list[Solution]:
    """Natural join; multiplicity is the product of multiplicities."""
    if not left or not right:
        return []
    left_vars = set().union(*(row.keys() for row in left))
    right_vars = set().union(*(row.keys() for row in right))
    shared = left_vars & right_vars
    if not shared:
        return [merge(l, r) for l in left for r in right]
    key_vars = tuple(sorted(shared))
    fully_bound = all(all(v in row for v in key_vars) for row in left) and all(
        all(v in row for v in key_vars) for row in right
    )
    if not fully_bound:
        # Rare: a shared variable may be unbound (e.g. MAX over an empty
        # group in a sub-select). Fall back to pairwise compatibility.
        return [merge(l, r) for l in left for r in right if compatible(l, r)]
    index: dict[tuple, list[Solution]] = {}
    for row in right:
        index.setdefault(tuple(row[v] for v in key_vars), []).append(row)
    out = []
    for l in left:
        for r in index.get(tuple(l[v] for v in key_vars), ()):
            out.append(merge(l, r))
    return out


def eval_minus(left: list[Solution], right: list[Solution]) -> list[Solution]:
    """Keep a left row unless some right row is compatible with it and
    shares at least one bound variable."""
    if not left or not right:
        return list(left)
    by_domain: dict[frozenset, object] = {}
    for row in right:
        domain = frozenset(row.keys())
        by_domain.setdefault(domain, []).append(row)
    domain_index = {}
    for domain, rows in by_domain.items():
        key_vars = tuple(sorted(domain))
        domain_index[domain] = (key_vars, {tuple(r[v] for v in key_vars) for r in rows}, rows)
    out = []
    for l in left:
        l_vars = set(l.keys())
        dropped = False
        for domain, (key_vars, keyset, rows) in domain_index.items():
            common = domain & l_vars
            if not common:
                continue
            if common == domain:
                if tuple(l[v] for v in key_vars) in keyset:
                    dropped = True
                    break
            else:
                if any(compatible(l, r) for r in rows):
                    dropped = True
                    break
        if not dropped:
            out.append(l)
    return out


# ------------------------------------------------- condensed BGP matching


def _pattern_ids(store: Store, pattern, binding: Solution):
    """(s, p, o) as TermId or None per position; False if a constant is
    absent from the dictionary (nothing can match)."""
    ids = []
    for atom in (pattern.subject, pattern.predicate, pattern.object):
        if isinstance(atom, Var):
            bound = binding.get(atom.name)
            if bound is None:
                ids.append(None)
                continue
            atom = bound
        tid = store.dictionary.lookup(atom)
        if tid is None:
            return False
        ids.append(tid)
    return ids


def _match_bgp_in_graph(store: Store, patterns, graph_id: int, mask: int):
    """Join the patterns inside one named graph, ANDing version bitmaps.

    Yields (binding, bits) with bits != 0; `mask` restricts to a version
    subset (all-ones for the graph-variable path).
    """
    decode = store.dictionary.decode
    rows = [({}, mask)]
    for pattern in patterns:
        variables = [
            atom.name if isinstance(atom, Var) else None
            for atom in (pattern.subject, pattern.predicate, pattern.object)
        ]
        next_rows = []
        for binding, bits in rows:
            ids = _pattern_ids(store, pattern, binding)
            if ids is False:
                continue
            for entry in store.lookup_pattern(graph_id, ids[0], ids[1], ids[2]):
                joined = bits & entry.bits
                if not joined:
                    continue
                extended = binding
                ok = True
                for name, tid in zip(variables, (entry.subject, entry.predicate, entry.object)):
                    if name is None:
                        continue
                    term = decode(tid)
                    existing = extended.get(name)
                    if existing is None:
                        if extended is binding:
                            extended = dict(binding)
                        extended[name] = term
                    elif existing != term:
                        ok = False
                        break
                if ok:
                    next_rows.append((extended, joined))
        rows = next_rows
        if not rows:
            break
    return rows


def eval_bgp_in_graph_var(store: Store, patterns, graph_var: str):
    """All (solution, graph id, version bitmap) rows for a BGP under a
    graph variable; expanding each row over its set bits must equal
    evaluating the BGP separately inside every versioned graph."""
    if not patterns:
        raise ValueError("basic graph pattern must be non-empty")
    full_mask = (1 << store.version_count) - 1
    out = []
    if not full_mask:
        return out
    for graph_id in store.graphs_in_order():
        for binding, bits in _match_bgp_in_graph(store, patterns, graph_id, full_mask):
            out.append((binding, graph_id, bits))
    return out


def eval_count_by_version_fast(store: Store, patterns, graph_var: str) -> list[int]:
    """Per-version match counts without expanding bitmap rows: each row
    adds one at every set bit position."""
    counts = [0] * store.version_count
    for _binding, _graph_id, bits in eval_bgp_in_graph_var(store, patterns, graph_var):
        for ordinal in bitmap_ordinals(bits):
            counts[ordinal - 1] += 1
    return counts


# ------------------------------------------------------ pattern evaluation


def _extend(binding: Solution, name: str, term: Term):
    existing = binding.get(name)
    if existing is None:
        out = dict(binding)
        out[name] = term
        return out
    return binding if existing == term else None


class _CondensedEvaluator:
    """Evaluates normalized patterns against a store.

    Context is either None (the default graph, i.e. metadata) or a
    (graph id, ordinal) pair naming one versioned graph.
    """

    def __init__(self, store: Store):
        self.store = store

    def eval(self, node, ctx) -> list[Solution]:
        if isinstance(node, Bgp):
            return self.eval_bgp(node, ctx)
        if isinstance(node, Join):
            ordered = [p for p in node.parts if isinstance(p, GraphPat)] + [
                p for p in node.parts if not isinstance(p, GraphPat)
            ]
            rows = self.eval(ordered[0], ctx)
            for part in ordered[1:]:
                if not rows:
                    return []
                rows = eval_join(rows, self.eval(part, ctx))
            return rows
        if isinstance(node, Minus):
            left = self.eval(node.left, ctx)
            if not left:
                return []
            return eval_minus(left, self.eval(node.right, ctx))
        if isinstance(node, GraphPat):
            return self.eval_graph(node, ctx)
        if isinstance(node, SubSelect):
            _, rows = eval_select(self.store, node.query, ctx)
            return rows
        raise TypeError(f"not a pattern node: {node!r}")

    def eval_bgp(self, node: Bgp, ctx) -> list[Solution]:
        if ctx is None:
            return _match_triples(list(self.store.metadata_graph()), node.patterns)
        graph_id, ordinal = ctx
        rows = _match_bgp_in_graph(self.store, node.patterns, graph_id, bit_for(ordinal))
        return [binding for binding, _bits in rows]

    def eval_graph(self, node: GraphPat, ctx) -> list[Solution]:
        store = self.store
        if isinstance(node.target, Var):
            name = node.target.name
            if isinstance(node.inner, Bgp):
                out = []
                for binding, graph_id, bits in eval_bgp_in_graph_var(
                    store, node.inner.patterns, name
                ):
                    for ordinal in bitmap_ordinals(bits):
                        extended = _extend(binding, name, store.vng_iri_for(graph_id, ordinal))
                        if extended is not None:
                            out.append(extended)
                return out
            out = []
            for rec in store.vng_records:
                graph_id = store.dictionary.lookup(rec.graph)
                for binding in self.eval(node.inner, (graph_id, rec.ordinal)):
                    extended = _extend(binding, name, rec.vng_iri)
                    if extended is not None:
                        out.append(extended)
            return out
        try:
            pair = store.resolve_vng(node.target)
        except UnknownVngError:
            logger.warning(
                "GRAPH names %s, which is not a versioned graph; empty match",
                serialize_term(node.target),
            )
            return []
        return self.eval(node.inner, pair)


def _match_triples(triples, patterns) -> list[Solution]:
    """Nested-loop BGP matching over a plain (s, p, o) list."""
    rows: list[Solution] = [{}]
    for pattern in patterns:
        atoms = (pattern.subject, pattern.predicate, pattern.object)
        next_rows = []
        for binding in rows:
            for triple in triples:
                extended = binding
                ok = True
                for atom, term in zip(atoms, triple):
                    if isinstance(atom, Var):
                        existing = extended.get(atom.name)
                        if existing is None:
                            if extended is binding:
                                extended = dict(binding)
                            extended[atom.name] = term
                        elif existing != term:
                            ok = False
                            break
                    elif atom != term:
                        ok = False
                        break
                if ok:
                    next_rows.append(extended)
        rows = next_rows
        if not rows:
            break
    return rows


# ------------------------------------------------------------- aggregation


def _numeric_or_fail(term: Term, group_desc: str) -> Decimal:
    value = numeric_value(term)
    if value is None:
        raise EvalError(
            f"SUM over non-numeric term {serialize_term(term)} in group {group_desc}"
        )
    return value


def _sum_literal(values: list[Term], group_desc: str) -> Term:
    total = Decimal(0)
    integral = True
    for term in values:
        total += _numeric_or_fail(term, group_desc)
        if term.datatype != _XSD_INTEGER and not (
            term.datatype is None and term.lexical.lstrip("+-").isdigit()
        ):
            integral = False
    if integral:
        return literal(str(int(total)), datatype=_XSD_INTEGER)
    return literal(str(total), datatype=_XSD_DECIMAL)


def _apply_aggregate(spec: SelectAgg, values: list[Term], group_desc: str):
    if spec.distinct:
        seen = set()
        deduped = []
        for v in values:
            if v not in seen:
                seen.add(v)
                deduped.append(v)
        values = deduped
    if spec.func == "COUNT":
        return literal(str(len(values)), datatype=_XSD_INTEGER)
    if not values:
        return None  # MAX/MIN/SUM over nothing is unbound
    if spec.func == "MAX":
        return max(values, key=term_order_key)
    if spec.func == "MIN":
        return min(values, key=term_order_key)
    if spec.func == "SUM":
        return _sum_literal(values, group_desc)
    raise EvalError(f"unknown aggregate {spec.func}")


def eval_group_aggregate(rows: list[Solution], group_by, aggregates) -> list[Solution]:
    """Partition by the GROUP BY key tuple (first-occurrence order) and fold
    each aggregate over its bound argument values; with no GROUP BY the whole
    input forms a single group, even when empty."""
    group_vars = [v.name for v in group_by] if group_by else []
    groups: dict[tuple, list[Solution]] = {}
    for row in rows:
        key = tuple(row.get(name) for name in group_vars)
        groups.setdefault(key, []).append(row)
    if not group_vars and not groups:
        groups[()] = []
    out = []
    for key, members in groups.items():
        result: Solution = {
            name: term for name, term in zip(group_vars, key) if term is not None
        }
        desc = (
            "(" + ", ".join(serialize_term(t) if t else "UNBOUND" for t in key) + ")"
            if group_vars
            else "(all rows)"
        )
        for spec, alias in aggregates:
            values = [row[spec.arg.name] for row in members if spec.arg.name in row]
            term = _apply_aggregate(spec, values, desc)
            if term is not None:
                result[alias] = term
        out.append(result)
    return out


# ------------------------------------------------------------ select logic


def _aggregates_with_aliases(query: Query):
    pairs = []
    columns = column_names(query)
    for item, column in zip(query.projection, columns):
        if isinstance(item, SelectAgg):
            pairs.append((item, column))
    return pairs


def eval_select(store: Store, query: Query, ctx=None):
    """Evaluate one (sub-)query body: pattern, grouping, projection.

    Returns (columns, rows); rows only carry the projected names.
    """
    evaluator = _CondensedEvaluator(store)
    rows = evaluator.eval(query.pattern, ctx)
    return _project(query, rows)


def _project(query: Query, rows: list[Solution]):
    columns = column_names(query)
    aggregates = _aggregates_with_aliases(query)
    if aggregates or query.group_by:
        rows = eval_group_aggregate(rows, query.group_by, aggregates)
    projected = []
    for row in rows:
        out = {}
        for name in columns:
            term = row.get(name)
            if term is not None:
                out[name] = term
        projected.append(out)
    return columns, projected


# ------------------------------------------------------- fast-path planner


def _detect_count_by_version(plan: AlgebraPlan):
    """Recognize: COUNT grouped by the version variable of a metadata join
    against a single GRAPH-variable BGP. Returns (patterns, graph var,
    version var, count column) or None."""
    query = plan.query
    if not query.group_by or len(query.group_by) != 1:
        return None
    version_var = query.group_by[0].name
    if len(query.projection) != 2:
        return None
    agg = None
    for item in query.projection:
        if isinstance(item, SelectAgg):
            agg = item
        elif isinstance(item, SelectVar):
            if item.var.name != version_var:
                return None
        else:
            return None
    if agg is None or agg.func != "COUNT" or agg.distinct:
        return None
    if not isinstance(query.pattern, Join) or len(query.pattern.parts) != 2:
        return None
    graph_block = meta_block = None
    for part in query.pattern.parts:
        if isinstance(part, GraphPat):
            graph_block = part
        elif isinstance(part, Bgp):
            meta_block = part
    if graph_block is None or meta_block is None:
        return None
    if not isinstance(graph_block.target, Var) or not isinstance(graph_block.inner, Bgp):
        return None
    graph_var = graph_block.target.name
    if graph_var == version_var:
        return None
    if len(meta_block.patterns) != 1:
        return None
    meta = meta_block.patterns[0]
    if (
        not isinstance(meta.subject, Var)
        or meta.subject.name != graph_var
        or meta.predicate != IS_IN_VERSION
        or not isinstance(meta.object, Var)
        or meta.object.name != version_var
    ):
        return None
    bgp_vars = {
        atom.name
        for pat in graph_block.inner.patterns
        for atom in (pat.subject, pat.predicate, pat.object)
        if isinstance(atom, Var)
    }
    # The counted variable must be bound on every row or the count is off.
    if agg.arg.name not in bgp_vars | {graph_var, version_var}:
        return None
    if version_var in bgp_vars or graph_var in bgp_vars:
        return None
    count_column = next(
        col
        for item, col in zip(query.projection, plan.columns)
        if isinstance(item, SelectAgg)
    )
    return graph_block.inner.patterns, graph_var, version_var, count_column


# ------------------------------------------------------------ result table


@dataclass
class ResultTable:
    columns: tuple
    rows: list  # tuples of Term-or-None, canonically sorted

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        for row in self.rows:
            lines.append("\t".join(serialize_term(t) if t is not None else "" for t in row))
        return "".join(line + "\n" for line in lines)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([serialize_term(t) if t is not None else "" for t in row])
        return buffer.getvalue()


def _table(columns, projected_rows) -> ResultTable:
    tuples = [tuple(row.get(name) for name in columns) for row in projected_rows]
    tuples.sort(key=lambda row: tuple(serialize_term(t) if t is not None else "" for t in row))
    return ResultTable(tuple(columns), tuples)


def execute_plan(store: Store, plan: AlgebraPlan):
    """(columns, projected solution rows), fast paths applied."""
    fast = _detect_count_by_version(plan)
    if fast is not None:
        patterns, graph_var, version_var, count_column = fast
        counts = eval_count_by_version_fast(store, patterns, graph_var)
        rows = [
            {version_var: version_iri(ordinal), count_column: literal(str(c), datatype=_XSD_INTEGER)}
            for ordinal, c in enumerate(counts, start=1)
            if c > 0
        ]
        return plan.columns, rows
    return eval_select(store, plan.query, None)


def execute_query(store: Store, text: str) -> ResultTable:
    """Parse, validate, plan, evaluate, project; rows are sorted by the
    serialized form of their terms so output is deterministic."""
    plan = validate_and_name(parse_query(text))
    columns, rows = execute_plan(store, plan)
    return _table(columns, rows)


# ------------------------------------------------------------------ oracle


class _OracleDataset:
    def __init__(self, quads):
        self.default: list[tuple[Term, Term, Term]] = []
        self.named: dict[Term, list[tuple[Term, Term, Term]]] = {}
        for quad in quads:
            if quad.graph is None:
                self.default.append(quad.triple())
            else:
                self.named.setdefault(quad.graph, []).append(quad.triple())


class _OracleEvaluator:
    """Reference semantics over the flat quad list: nested loops only."""

    def __init__(self, dataset: _OracleDataset):
        self.dataset = dataset

    def eval(self, node, active: list) -> list[Solution]:
        if isinstance(node, Bgp):
            return _match_triples(active, node.patterns)
        if isinstance(node, Join):
            rows = self.eval(node.parts[0], active)
            for part in node.parts[1:]:
                right = self.eval(part, active)
                rows = [merge(l, r) for l in rows for r in right if compatible(l, r)]
            return rows
        if isinstance(node, Minus):
            left = self.eval(node.left, active)
            right = self.eval(node.right, active)
            out = []
            for l in left:
                dropped = False
                for r in right:
                    if set(l) & set(r) and compatible(l, r):
                        dropped = True
                        break
                if not dropped:
                    out.append(l)
            return out
        if isinstance(node, GraphPat):
            if isinstance(node.target, Var):
                name = node.target.name
                out = []
                for graph_name, triples in self.dataset.named.items():
                    for binding in self.eval(node.inner, triples):
                        extended = _extend(binding, name, graph_name)
                        if extended is not None:
                            out.append(extended)
                return out
            triples = self.dataset.named.get(node.target, [])
            return self.eval(node.inner, triples)
        if isinstance(node, SubSelect):
            _, rows = self._select(node.query, active)
            return rows
        raise TypeError(f"not a pattern node: {node!r}")

    def _select(self, query: Query, active: list):
        rows = self.eval(query.pattern, active)
        return self._project(query, rows)

    def _project(self, query: Query, rows: list[Solution]):
        # Independent grouping/projection so the main pipeline's aggregate
        # machinery is exercised against, not reused.
        columns = column_names(query)
        aggregates = _aggregates_with_aliases(query)
        if aggregates or query.group_by:
            group_vars = [v.name for v in query.group_by] if query.group_by else []
            order: list[tuple] = []
            buckets: dict[tuple, list[Solution]] = {}
            for row in rows:
                key = tuple(row.get(name) for name in group_vars)
                if key not in buckets:
                    buckets[key] = []
                    order.append(key)
                buckets[key].append(row)
            if not group_vars and not order:
                order.append(())
                buckets[()] = []
            grouped = []
            for key in order:
                result = {
                    name: term for name, term in zip(group_vars, key) if term is not None
                }
                for spec, alias in aggregates:
                    values = [
                        row[spec.arg.name] for row in buckets[key] if spec.arg.name in row
                    ]
                    if spec.distinct:
                        kept, seen = [], set()
                        for v in values:
                            if v not in seen:
                                seen.add(v)
                                kept.append(v)
                        values = kept
                    if spec.func == "COUNT":
                        result[alias] = literal(str(len(values)), datatype=_XSD_INTEGER)
                        continue
                    if not values:
                        continue
                    if spec.func == "MAX":
                        result[alias] = sorted(values, key=term_order_key)[-1]
                    elif spec.func == "MIN":
                        result[alias] = sorted(values, key=term_order_key)[0]
                    elif spec.func == "SUM":
                        total = Decimal(0)
                        integral = True
                        for term in values:
                            value = numeric_value(term)
                            if value is None:
                                raise EvalError(
                                    f"SUM over non-numeric term {serialize_term(term)}"
                                    f" in group {key!r}"
                                )
                            total += value
                            if term.datatype != _XSD_INTEGER and not (
                                term.datatype is None
                                and term.lexical.lstrip("+-").isdigit()
                            ):
                                integral = False
                        if integral:
                            result[alias] = literal(str(int(total)), datatype=_XSD_INTEGER)
                        else:
                            result[alias] = literal(str(total), datatype=_XSD_DECIMAL)
                grouped.append(result)
            rows = grouped
        projected = []
        for row in rows:
            out = {}
            for name in columns:
                term = row.get(name)
                if term is not None:
                    out[name] = term
            projected.append(out)
        return columns, projected


def eval_oracle(flat_quads, plan: AlgebraPlan):
    """Ground-truth evaluation of `plan` over an exported flat quad list.

    Returns (columns, projected rows), the same shape `execute_plan` yields.
    """
    dataset = _OracleDataset(flat_quads)
    evaluator = _OracleEvaluator(dataset)
    return evaluator._select(plan.query, dataset.default)
