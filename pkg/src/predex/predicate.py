"""Predicates: per-feature clauses, conjunctions, disjunctions, complements.

A predicate is a disjunction of conjunctions of single-feature clauses
(categorical membership or numeric/datetime interval), optionally complemented
at the top level. Text form follows the grammar:

    predicate := "NOT" "(" body ")" | body
    body      := conj { "OR" conj }
    conj      := clause { "&" clause }
    clause    := ["("] atom [")"]
    atom      := name "=" literal | name "in" "[" literal {"," literal} "]"
              | number relop name relop number | name relop number
              | number relop name
    relop     := "<" | "<=" | ">" | ">="

String literals are single-quoted; quoted ISO-8601 datetimes may stand in for
numbers and compare as UTC epoch seconds. Whitespace is insignificant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import dataset as ds_mod
from .dataset import Dataset, format_epoch, parse_datetime
from .errors import AlgebraError, EvaluationError, GrammarError


# -- clause bodies -----------------------------------------------------------


@dataclass(frozen=True)
class MemberOf:
    """Membership in a set of categorical values (stored as strings)."""

    values: frozenset[str]

    def __post_init__(self):
        if not self.values:
            raise AlgebraError("membership clause needs at least one value")


@dataclass(frozen=True)
class Range:
    """Interval with per-bound inclusivity; one-sided ranges use +/-inf.

    ``as_datetime`` is a display hint only (epoch bounds print as ISO-8601);
    it does not participate in equality or hashing.
    """

    lo: float
    hi: float
    lo_incl: bool
    hi_incl: bool
    as_datetime: bool = field(default=False, compare=False)

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise AlgebraError("range bounds must not be NaN")
        if self.lo > self.hi:
            raise AlgebraError(f"range lower bound {self.lo} exceeds upper bound {self.hi}")
        if self.lo == self.hi and not (self.lo_incl and self.hi_incl):
            raise AlgebraError("degenerate range requires both bounds inclusive")


Body = Union[MemberOf, Range]


@dataclass(frozen=True)
class Clause:
    feature: str
    body: Body


class Conjunction:
    """Clauses over distinct features, canonically ordered by feature name."""

    __slots__ = ("clauses",)

    def __init__(self, clauses):
        clauses = tuple(clauses)
        if not clauses:
            raise AlgebraError("conjunction needs at least one clause")
        features = [c.feature for c in clauses]
        if len(set(features)) != len(features):
            raise AlgebraError("conjunction has two clauses on one feature; merge them instead")
        object.__setattr__(self, "clauses", tuple(sorted(clauses, key=lambda c: c.feature)))

    def __setattr__(self, *a):  # immutable
        raise AttributeError("Conjunction is immutable")

    @property
    def features(self) -> frozenset[str]:
        return frozenset(c.feature for c in self.clauses)

    def clause_for(self, feature: str) -> Clause | None:
        for c in self.clauses:
            if c.feature == feature:
                return c
        return None

    def without(self, feature: str) -> "Conjunction | None":
        rest = [c for c in self.clauses if c.feature != feature]
        return Conjunction(rest) if rest else None

    def __eq__(self, other):
        return isinstance(other, Conjunction) and self.clauses == other.clauses

    def __hash__(self):
        return hash(self.clauses)

    def __repr__(self):
        return f"Conjunction({_conj_text(self)!r})"


class Predicate:
    """Disjunction of conjunctions with a top-level complement flag."""

    __slots__ = ("terms", "negated")

    def __init__(self, terms, negated: bool = False):
        terms = list(terms)
        if not terms:
            raise AlgebraError("predicate needs at least one term")
        seen = {}
        for t in terms:
            seen.setdefault(_conj_text(t), t)
        ordered = tuple(seen[k] for k in sorted(seen))
        object.__setattr__(self, "terms", ordered)
        object.__setattr__(self, "negated", bool(negated))

    def __setattr__(self, *a):
        raise AttributeError("Predicate is immutable")

    @classmethod
    def of(cls, *clauses: Clause, negated: bool = False) -> "Predicate":
        return cls([Conjunction(clauses)], negated=negated)

    def __eq__(self, other):
        return (
            isinstance(other, Predicate)
            and self.terms == other.terms
            and self.negated == other.negated
        )

    def __hash__(self):
        return hash((self.terms, self.negated))

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Predicate({to_text(self)!r})"


class Selection:
    """Row set selected by a predicate: frozen boolean mask plus its count."""

    __slots__ = ("mask", "count")

    def __init__(self, mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "count", int(mask.sum()))

    def __setattr__(self, *a):
        raise AttributeError("Selection is immutable")

    def row_ids(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def row_id_set(self) -> frozenset[int]:
        return frozenset(int(i) for i in self.row_ids())

    def __len__(self):
        return self.count

    def __and__(self, other):
        return Selection(self.mask & other.mask)

    def __or__(self, other):
        return Selection(self.mask | other.mask)

    def __invert__(self):
        return Selection(~self.mask)

    def intersects(self, row_ids) -> bool:
        return any(self.mask[i] for i in row_ids)


# -- evaluation ---------------------------------------------------------------


def _clause_mask(clause: Clause, ds: Dataset) -> np.ndarray:
    feat = ds.feature(clause.feature)  # raises EvaluationError path below for unknowns
    col = ds.column(clause.feature)
    body = clause.body
    if isinstance(body, MemberOf):
        if feat.kind == ds_mod.CATEGORICAL:
            return np.isin(col, list(body.values))
        # Numeric/datetime columns accept membership sets whose values all
        # parse under the column's kind (equality on epoch seconds/reals).
        try:
            if feat.kind == ds_mod.DATETIME:
                wanted = [parse_datetime(v) for v in body.values]
            else:
                wanted = [float(v) for v in body.values]
        except ValueError:
            raise EvaluationError(
                f"membership values {sorted(body.values)} do not match "
                f"{feat.kind} feature {clause.feature!r}"
            ) from None
        return np.isin(col, wanted)
    if feat.kind == ds_mod.CATEGORICAL:
        raise EvaluationError(
            f"range clause on categorical feature {clause.feature!r}"
        )
    lower = col >= body.lo if body.lo_incl else col > body.lo
    upper = col <= body.hi if body.hi_incl else col < body.hi
    return lower & upper  # NaN compares false: missing never satisfies


def evaluate(pred: Predicate, ds: Dataset) -> Selection:
    """Rows satisfying at least one term (all its clauses), complemented if negated."""
    for term in pred.terms:
        for clause in term.clauses:
            if not ds.has_feature(clause.feature):
                raise EvaluationError(f"unknown feature {clause.feature!r}")
    mask = np.zeros(ds.n_rows, dtype=bool)
    for term in pred.terms:
        term_mask = np.ones(ds.n_rows, dtype=bool)
        for clause in term.clauses:
            term_mask &= _clause_mask(clause, ds)
        mask |= term_mask
    if pred.negated:
        mask = ~mask
    return Selection(mask)


# -- algebra ------------------------------------------------------------------


def merge(a: Clause, b: Clause) -> Clause:
    """Union of two same-feature clauses: value-set union, or interval hull."""
    if a.feature != b.feature:
        raise AlgebraError(f"cannot merge clauses on {a.feature!r} and {b.feature!r}")
    if isinstance(a.body, MemberOf) and isinstance(b.body, MemberOf):
        return Clause(a.feature, MemberOf(a.body.values | b.body.values))
    if isinstance(a.body, Range) and isinstance(b.body, Range):
        ra, rb = a.body, b.body
        if ra.lo < rb.lo:
            lo, lo_incl = ra.lo, ra.lo_incl
        elif rb.lo < ra.lo:
            lo, lo_incl = rb.lo, rb.lo_incl
        else:
            lo, lo_incl = ra.lo, ra.lo_incl or rb.lo_incl
        if ra.hi > rb.hi:
            hi, hi_incl = ra.hi, ra.hi_incl
        elif rb.hi > ra.hi:
            hi, hi_incl = rb.hi, rb.hi_incl
        else:
            hi, hi_incl = ra.hi, ra.hi_incl or rb.hi_incl
        if lo == hi:
            lo_incl = hi_incl = True
        return Clause(
            a.feature,
            Range(lo, hi, lo_incl, hi_incl, as_datetime=ra.as_datetime or rb.as_datetime),
        )
    raise AlgebraError(f"cannot merge membership and range clauses on {a.feature!r}")


def intersect(a: Conjunction, b: Conjunction) -> Conjunction:
    """Conjunction of two feature-disjoint conjunctions."""
    shared = a.features & b.features
    if shared:
        raise AlgebraError(
            f"conjunctions share feature(s) {sorted(shared)}; merge their clauses instead"
        )
    return Conjunction(a.clauses + b.clauses)


def disjoin(a: Predicate, b: Predicate) -> Predicate:
    """DNF union of two non-negated predicates (duplicate terms removed)."""
    if a.negated or b.negated:
        raise AlgebraError("disjunction of complemented predicates is not supported")
    return Predicate(a.terms + b.terms)


def complement(p: Predicate) -> Predicate:
    return Predicate(p.terms, negated=not p.negated)


def canonical_key(p: Predicate) -> str:
    """Stable text key; equal iff predicates are equal up to clause/term order."""
    return to_text(p)


# -- printing -----------------------------------------------------------------


def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _literal(v: float, as_datetime: bool) -> str:
    if as_datetime:
        return f"'{format_epoch(v)}'"
    return format_number(v)


def _quote(s: str) -> str:
    return "'" + s.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _atom_text(clause: Clause) -> str:
    name, body = clause.feature, clause.body
    if isinstance(body, MemberOf):
        values = sorted(body.values)
        if len(values) == 1:
            return f"{name} = {_quote(values[0])}"
        return f"{name} in [{', '.join(_quote(v) for v in values)}]"
    lo_bounded = not math.isinf(body.lo)
    hi_bounded = not math.isinf(body.hi)
    if lo_bounded and hi_bounded and body.lo == body.hi:
        if body.as_datetime:
            # keep the range form: equality with a quoted literal parses as
            # membership, which would not round-trip this clause
            lit = _literal(body.lo, True)
            return f"{lit} <= {name} <= {lit}"
        return f"{name} = {_literal(body.lo, body.as_datetime)}"
    if lo_bounded and hi_bounded:
        lo_op = "<=" if body.lo_incl else "<"
        hi_op = "<=" if body.hi_incl else "<"
        return (
            f"{_literal(body.lo, body.as_datetime)} {lo_op} {name} "
            f"{hi_op} {_literal(body.hi, body.as_datetime)}"
        )
    if lo_bounded:
        op = ">=" if body.lo_incl else ">"
        return f"{name} {op} {_literal(body.lo, body.as_datetime)}"
    if hi_bounded:
        op = "<=" if body.hi_incl else "<"
        return f"{name} {op} {_literal(body.hi, body.as_datetime)}"
    raise AlgebraError(f"clause on {name!r} has no finite bound")


def _conj_text(conj: Conjunction) -> str:
    if len(conj.clauses) == 1:
        return _atom_text(conj.clauses[0])
    return " & ".join(f"({_atom_text(c)})" for c in conj.clauses)


def to_text(p: Predicate) -> str:
    """Canonical text: sorted clauses/terms, parenthesized multi-clause terms."""
    if len(p.terms) == 1:
        body = _conj_text(p.terms[0])
    else:
        parts = []
        for t in p.terms:
            text = _conj_text(t)
            parts.append(text if len(t.clauses) > 1 else f"({text})")
        body = " OR ".join(parts)
    if p.negated:
        return f"NOT({body})"
    return body


# -- parsing ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>'(?:[^'\\]|\\.)*')
  | (?P<relop><=|>=|<|>)
  | (?P<sym>[()\[\],=&])
  | (?P<name>[A-Za-z_][A-Za-z0-9_.\-]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"not", "or", "in"}


class _Token:
    __slots__ = ("kind", "value", "pos")

    def __init__(self, kind, value, pos):
        self.kind = kind
        self.value = value
        self.pos = pos


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise GrammarError(f"unexpected character {text[pos]!r}", position=pos)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            if kind == "name" and value.lower() in _KEYWORDS:
                kind = value.lower()
            tokens.append(_Token(kind, value, pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


def _unquote(raw: str) -> str:
    return re.sub(r"\\(.)", r"\1", raw[1:-1])


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise GrammarError(
                f"expected {what or kind}, found {tok.value or 'end of input'!r}",
                position=tok.pos,
            )
        return tok

    def parse(self) -> Predicate:
        negated = False
        if self.peek().kind == "not":
            self.next()
            opener = self.expect("sym", "'('")
            if opener.value != "(":
                raise GrammarError("expected '(' after NOT", position=opener.pos)
            negated = True
        terms = [self.conjunction()]
        while self.peek().kind == "or":
            self.next()
            terms.append(self.conjunction())
        if negated:
            tok = self.expect("sym", "')'")
            if tok.value != ")":
                raise GrammarError("expected ')'", position=tok.pos)
        end = self.next()
        if end.kind != "end":
            raise GrammarError(f"unexpected trailing {end.value!r}", position=end.pos)
        return Predicate(terms, negated=negated)

    def conjunction(self) -> Conjunction:
        clauses = [self.clause()]
        while self.peek().kind == "sym" and self.peek().value == "&":
            self.next()
            clauses.append(self.clause())
        merged: dict[str, Clause] = {}
        for c in clauses:
            if c.feature in merged:
                raise GrammarError(
                    f"feature {c.feature!r} appears twice in one conjunction; "
                    "use a single clause (merge ranges or value lists)"
                )
            merged[c.feature] = c
        return Conjunction(clauses)

    def clause(self) -> Clause:
        tok = self.peek()
        if tok.kind == "sym" and tok.value == "(":
            self.next()
            inner = self.atom()
            closing = self.expect("sym", "')'")
            if closing.value != ")":
                raise GrammarError("expected ')'", position=closing.pos)
            return inner
        return self.atom()

    def atom(self) -> Clause:
        tok = self.peek()
        if tok.kind in ("number", "string"):
            return self.bounded_range()
        if tok.kind == "name":
            return self.named_atom()
        raise GrammarError(
            f"expected a clause, found {tok.value or 'end of input'!r}", position=tok.pos
        )

    def numeric_literal(self) -> tuple[float, bool]:
        """Number, or quoted ISO-8601 datetime as epoch seconds."""
        tok = self.next()
        if tok.kind == "number":
            return float(tok.value), False
        if tok.kind == "string":
            raw = _unquote(tok.value)
            try:
                return parse_datetime(raw), True
            except ValueError:
                raise GrammarError(
                    f"string literal {raw!r} is not an ISO-8601 datetime", position=tok.pos
                ) from None
        raise GrammarError(
            f"expected number or datetime, found {tok.value or 'end of input'!r}",
            position=tok.pos,
        )

    def bounded_range(self) -> Clause:
        # number relop name [relop number]
        lo, lo_dt = self.numeric_literal()
        lo_op = self.expect("relop", "comparison operator")
        name = self.expect("name", "feature name")
        if self.peek().kind != "relop":
            # mirrored one-sided form: literal relop name
            if lo_op.value == "<":
                body = Range(lo, math.inf, False, False, as_datetime=lo_dt)
            elif lo_op.value == "<=":
                body = Range(lo, math.inf, True, False, as_datetime=lo_dt)
            elif lo_op.value == ">":
                body = Range(-math.inf, lo, False, False, as_datetime=lo_dt)
            else:
                body = Range(-math.inf, lo, False, True, as_datetime=lo_dt)
            return Clause(name.value, body)
        hi_op = self.expect("relop", "comparison operator")
        hi, hi_dt = self.numeric_literal()
        if lo_op.value in ("<", "<=") and hi_op.value in ("<", "<="):
            return Clause(
                name.value,
                Range(lo, hi, lo_op.value == "<=", hi_op.value == "<=", as_datetime=lo_dt or hi_dt),
            )
        if lo_op.value in (">", ">=") and hi_op.value in (">", ">="):
            return Clause(
                name.value,
                Range(hi, lo, hi_op.value == ">=", lo_op.value == ">=", as_datetime=lo_dt or hi_dt),
            )
        raise GrammarError("mixed comparison directions in range", position=hi_op.pos)

    def named_atom(self) -> Clause:
        name = self.next()
        tok = self.next()
        if tok.kind == "sym" and tok.value == "=":
            lit = self.next()
            if lit.kind == "number":
                v = float(lit.value)
                return Clause(name.value, Range(v, v, True, True))
            if lit.kind == "string":
                return Clause(name.value, MemberOf(frozenset([_unquote(lit.value)])))
            raise GrammarError(
                f"expected literal after '=', found {lit.value!r}", position=lit.pos
            )
        if tok.kind == "in":
            opener = self.expect("sym", "'['")
            if opener.value != "[":
                raise GrammarError("expected '[' after 'in'", position=opener.pos)
            values = [self.member_literal()]
            while self.peek().kind == "sym" and self.peek().value == ",":
                self.next()
                values.append(self.member_literal())
            closer = self.expect("sym", "']'")
            if closer.value != "]":
                raise GrammarError("expected ']'", position=closer.pos)
            return Clause(name.value, MemberOf(frozenset(values)))
        if tok.kind == "relop":
            v, is_dt = self.numeric_literal()
            if tok.value == "<":
                body = Range(-math.inf, v, False, False, as_datetime=is_dt)
            elif tok.value == "<=":
                body = Range(-math.inf, v, False, True, as_datetime=is_dt)
            elif tok.value == ">":
                body = Range(v, math.inf, False, False, as_datetime=is_dt)
            else:
                body = Range(v, math.inf, True, False, as_datetime=is_dt)
            return Clause(name.value, body)
        raise GrammarError(
            f"expected '=', 'in', or comparison after {name.value!r}, found "
            f"{tok.value or 'end of input'!r}",
            position=tok.pos,
        )

    def member_literal(self) -> str:
        tok = self.next()
        if tok.kind == "string":
            return _unquote(tok.value)
        if tok.kind == "number":
            return format_number(float(tok.value))
        raise GrammarError(
            f"expected literal in membership list, found {tok.value or 'end of input'!r}",
            position=tok.pos,
        )


def parse(text: str) -> Predicate:
    """Parse predicate text; raises GrammarError with the failing position."""
    if not text or not text.strip():
        raise GrammarError("empty predicate", position=0)
    return _Parser(text).parse()
