"""Parser for the SPARQL SELECT subset, a canonical printer, and pattern graphs.

The accepted grammar is documented in docs/grammar.md.
"""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Optional, Union

from .rdf import Term, TermKind, float32_text, unescape_literal

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD = "http://www.w3.org/2001/XMLSchema#"
AGGREGATES = ("COUNT", "SUM", "AVG", "MIN", "MAX")
COMPARATORS = ("<", "<=", "=", "!=", ">=", ">")


class SparqlError(Exception):
    pass


class SparqlSyntaxError(SparqlError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})" if line else message)
        self.message = message
        self.line = line
        self.column = column


class InvalidQuery(SparqlSyntaxError):
    """Well-formed text that breaks a variable-scoping rule."""


class UnsupportedConstruct(SparqlError):
    pass


@dataclass(frozen=True, order=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


PatternTerm = Union[Variable, Term]


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    @property
    def variables(self) -> tuple[Variable, ...]:
        out: list[Variable] = []
        for t in self:
            if isinstance(t, Variable) and t not in out:
                out.append(t)
        return tuple(out)


@dataclass(frozen=True)
class AggregateExpr:
    func: str
    arg: Optional[Variable] = None  # None means '*'

    def __str__(self) -> str:
        return f"{self.func}({'*' if self.arg is None else self.arg})"


Operand = Union[Variable, Term, AggregateExpr]


@dataclass(frozen=True)
class Comparison:
    lhs: Operand
    op: str
    rhs: Operand

    @property
    def variables(self) -> tuple[Variable, ...]:
        out = []
        for x in (self.lhs, self.rhs):
            if isinstance(x, Variable):
                out.append(x)
            elif isinstance(x, AggregateExpr) and x.arg is not None:
                out.append(x.arg)
        return tuple(out)


@dataclass(frozen=True)
class SelectItem:
    var: Variable
    aggregate: Optional[AggregateExpr] = None


@dataclass(frozen=True)
class OrderKey:
    var: Variable
    descending: bool = False


@dataclass(frozen=True)
class ParsedQuery:
    prefixes: tuple[tuple[str, str], ...] = ()
    select: tuple[SelectItem, ...] = ()
    select_all: bool = False
    distinct: bool = False
    from_iri: Optional[str] = None
    patterns: tuple[TriplePattern, ...] = ()
    filters: tuple[Comparison, ...] = ()
    group_by: tuple[Variable, ...] = ()
    having: tuple[Comparison, ...] = ()
    order_by: tuple[OrderKey, ...] = ()
    limit: Optional[int] = None
    offset: Optional[int] = None

    @property
    def pattern_variables(self) -> tuple[Variable, ...]:
        out: list[Variable] = []
        for p in self.patterns:
            for v in p.variables:
                if v not in out:
                    out.append(v)
        return tuple(out)

    @property
    def projection(self) -> tuple[Variable, ...]:
        if self.select_all:
            return self.pattern_variables
        return tuple(item.var for item in self.select)

    @property
    def aggregates(self) -> tuple[SelectItem, ...]:
        return tuple(item for item in self.select if item.aggregate is not None)

    @property
    def is_aggregate(self) -> bool:
        return bool(self.aggregates) or bool(self.group_by)


# -- tokenizer ---------------------------------------------------------------------------

_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"#[^\n]*"),
    ("IRI", r"<[^<>\"{}|^`\\\s]*>"),
    ("VAR", r"[?$][A-Za-z_][A-Za-z0-9_]*"),
    ("STRING", r'"(?:[^"\\\n]|\\.)*"|\'(?:[^\'\\\n]|\\.)*\''),
    ("NUMBER", r"[+-]?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)"),
    ("DTYPE", r"\^\^"),
    ("LANG", r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*"),
    ("OP", r"<=|>=|!=|&&|\|\||=|<|>|!"),
    ("PNAME", r"[A-Za-z][\w\-.]*?:[\w\-.]*[\w\-]|[A-Za-z][\w\-.]*?:|:[\w\-.]*[\w\-]|:"),
    ("BNODE", r"_:[\w\-.]+|\[\s*\]"),
    ("NAME", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("PUNCT", r"[{}().,;*/|^+\-\[\]]"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pat})" for name, pat in _TOKEN_SPEC))


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SparqlSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok_text = m.group()
        if kind not in ("WS", "COMMENT"):
            tokens.append(Token(kind, tok_text, line, pos - line_start + 1))
        nl = tok_text.count("\n")
        if nl:
            line += nl
            line_start = pos + tok_text.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


_UNSUPPORTED_KEYWORDS = {
    "OPTIONAL", "UNION", "MINUS", "GRAPH", "SERVICE", "BIND", "VALUES", "CONSTRUCT", "ASK",
    "DESCRIBE", "REDUCED", "NAMED", "INSERT", "DELETE", "LOAD", "CLEAR", "EXISTS", "NOT",
    "REGEX", "BOUND", "STR", "LANG", "DATATYPE", "IF", "COALESCE", "GROUP_CONCAT", "SAMPLE",
}


class _Parser:
    def __init__(self, text: str, prefixes: Optional[Mapping[str, str]] = None):
        self.tokens = tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = dict(prefixes or {})  # predeclared ones are not echoed by to_text
        self.prefix_order: list[tuple[str, str]] = []
        self.base: Optional[str] = None

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Optional[Token] = None) -> SparqlSyntaxError:
        tok = tok or self.tok
        return SparqlSyntaxError(message, tok.line, tok.col)

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def is_kw(self, *words: str) -> bool:
        return self.tok.kind == "NAME" and self.tok.text.upper() in words

    def accept_kw(self, word: str) -> bool:
        if self.is_kw(word):
            self.i += 1
            return True
        return False

    def expect_kw(self, word: str) -> None:
        if not self.accept_kw(word):
            self.unsupported_check()
            raise self.error(f"expected {word}, found {self.tok.text or 'end of query'!r}")

    def is_punct(self, ch: str) -> bool:
        return self.tok.kind == "PUNCT" and self.tok.text == ch

    def accept_punct(self, ch: str) -> bool:
        if self.is_punct(ch):
            self.i += 1
            return True
        return False

    def expect_punct(self, ch: str) -> None:
        if not self.accept_punct(ch):
            self.unsupported_check()
            raise self.error(f"expected {ch!r}, found {self.tok.text or 'end of query'!r}")

    def unsupported_check(self) -> None:
        tok = self.tok
        if tok.kind == "NAME" and tok.text.upper() in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstruct(f"{tok.text.upper()} is outside the supported subset (line {tok.line})")
        if tok.kind == "BNODE":
            raise UnsupportedConstruct(f"blank nodes are outside the supported subset (line {tok.line})")
        if tok.kind == "LANG":
            raise UnsupportedConstruct(f"language tags are outside the supported subset (line {tok.line})")
        if tok.kind == "OP" and tok.text in ("||", "!"):
            raise UnsupportedConstruct(f"operator {tok.text} is outside the supported subset (line {tok.line})")
        if tok.kind == "PUNCT" and tok.text in "/|^+[]":
            raise UnsupportedConstruct(f"property paths are outside the supported subset (line {tok.line})")

    # grammar
    def parse(self) -> ParsedQuery:
        self.prologue()
        self.unsupported_check()
        self.expect_kw("SELECT")
        distinct = self.accept_kw("DISTINCT")
        self.unsupported_check()
        select_all, select = self.select_clause()
        from_iri = None
        if self.accept_kw("FROM"):
            self.unsupported_check()
            from_iri = self.iri_value()
        self.accept_kw("WHERE")
        patterns, filters = self.group_graph_pattern()
        group_by: list[Variable] = []
        having: list[Comparison] = []
        order_by: list[OrderKey] = []
        limit = offset = None
        if self.accept_kw("GROUP"):
            self.expect_kw("BY")
            if self.tok.kind != "VAR":
                raise self.error("GROUP BY needs at least one variable")
            while self.tok.kind == "VAR":
                group_by.append(self.variable())
        if self.accept_kw("HAVING"):
            if not self.is_punct("("):
                raise self.error("HAVING needs a parenthesised condition")
            while self.is_punct("("):
                having.extend(self.bracketed_condition(allow_aggregates=True))
        if self.accept_kw("ORDER"):
            self.expect_kw("BY")
            while True:
                if self.tok.kind == "VAR":
                    order_by.append(OrderKey(self.variable()))
                elif self.is_kw("ASC", "DESC"):
                    desc = self.advance().text.upper() == "DESC"
                    self.expect_punct("(")
                    if self.tok.kind != "VAR":
                        self.unsupported_check()
                        raise UnsupportedConstruct("ORDER BY supports variables only")
                    order_by.append(OrderKey(self.variable(), desc))
                    self.expect_punct(")")
                else:
                    break
            if not order_by:
                raise self.error("ORDER BY needs at least one key")
        for _ in range(2):
            if self.is_kw("LIMIT") and limit is None:
                self.advance()
                limit = self.non_negative_int()
            elif self.is_kw("OFFSET") and offset is None:
                self.advance()
                offset = self.non_negative_int()
        if self.tok.kind != "EOF":
            self.unsupported_check()
            raise self.error(f"unexpected {self.tok.text!r}")
        return ParsedQuery(
            prefixes=tuple(self.prefix_order),
            select=tuple(select),
            select_all=select_all,
            distinct=distinct,
            from_iri=from_iri,
            patterns=tuple(patterns),
            filters=tuple(filters),
            group_by=tuple(group_by),
            having=tuple(having),
            order_by=tuple(order_by),
            limit=limit,
            offset=offset,
        )

    def prologue(self) -> None:
        while True:
            if self.accept_kw("PREFIX"):
                tok = self.advance()
                if tok.kind != "PNAME" or not tok.text.endswith(":"):
                    raise self.error("PREFIX needs a name ending in ':'", tok)
                iri_tok = self.advance()
                if iri_tok.kind != "IRI":
                    raise self.error("PREFIX needs an IRI", iri_tok)
                name = tok.text[:-1]
                iri = self.resolve(iri_tok.text[1:-1])
                self.prefixes[name] = iri
                self.prefix_order = [(n, v) for n, v in self.prefix_order if n != name] + [(name, iri)]
            elif self.accept_kw("BASE"):
                iri_tok = self.advance()
                if iri_tok.kind != "IRI":
                    raise self.error("BASE needs an IRI", iri_tok)
                self.base = iri_tok.text[1:-1]
            else:
                return

    def resolve(self, iri: str) -> str:
        if self.base and not re.match(r"[A-Za-z][A-Za-z0-9+.\-]*:", iri):
            return self.base + iri
        return iri

    def non_negative_int(self) -> int:
        tok = self.advance()
        if tok.kind != "NUMBER" or not tok.text.isdigit():
            raise self.error("expected a non-negative integer", tok)
        return int(tok.text)

    def select_clause(self) -> tuple[bool, list[SelectItem]]:
        if self.accept_punct("*"):
            return True, []
        items: list[SelectItem] = []
        while True:
            if self.tok.kind == "VAR":
                items.append(SelectItem(self.variable()))
            elif self.is_punct("("):
                self.advance()
                agg = self.aggregate()
                self.expect_kw("AS")
                items.append(SelectItem(self.variable(), agg))
                self.expect_punct(")")
            elif self.is_kw(*AGGREGATES):
                agg = self.aggregate()
                self.expect_kw("AS")
                items.append(SelectItem(self.variable(), agg))
            else:
                break
        if not items:
            self.unsupported_check()
            raise self.error("SELECT needs '*' or at least one variable")
        return False, items

    def aggregate(self) -> AggregateExpr:
        if not self.is_kw(*AGGREGATES):
            self.unsupported_check()
            raise self.error("expected an aggregate function")
        func = self.advance().text.upper()
        self.expect_punct("(")
        if self.is_kw("DISTINCT"):
            raise UnsupportedConstruct(f"{func}(DISTINCT ...) is outside the supported subset")
        if self.accept_punct("*"):
            if func != "COUNT":
                raise self.error(f"{func}(*) is not allowed")
            arg = None
        elif self.tok.kind == "VAR":
            arg = self.variable()
        else:
            self.unsupported_check()
            raise UnsupportedConstruct("aggregate arguments must be variables")
        self.expect_punct(")")
        return AggregateExpr(func, arg)

    def variable(self) -> Variable:
        tok = self.advance()
        if tok.kind != "VAR":
            self.i -= 1
            self.unsupported_check()
            raise self.error(f"expected a variable, found {tok.text!r}", tok)
        return Variable(tok.text[1:])

    def iri_value(self) -> str:
        tok = self.advance()
        if tok.kind == "IRI":
            iri = self.resolve(tok.text[1:-1])
            if not iri:
                raise self.error("empty IRI", tok)
            return iri
        if tok.kind == "PNAME":
            prefix, _, local = tok.text.partition(":")
            if prefix not in self.prefixes:
                raise self.error(f"undeclared prefix {prefix!r}", tok)
            return self.prefixes[prefix] + local
        self.i -= 1
        self.unsupported_check()
        raise self.error(f"expected an IRI, found {tok.text!r}", tok)

    def group_graph_pattern(self) -> tuple[list[TriplePattern], list[Comparison]]:
        self.expect_punct("{")
        patterns: list[TriplePattern] = []
        filters: list[Comparison] = []
        while not self.is_punct("}"):
            if self.tok.kind == "EOF":
                raise self.error("unterminated group pattern")
            if self.is_punct("{"):
                raise UnsupportedConstruct(f"nested group patterns are outside the supported subset (line {self.tok.line})")
            if self.accept_kw("FILTER"):
                if not self.is_punct("("):
                    self.unsupported_check()
                    raise UnsupportedConstruct(f"FILTER functions are outside the supported subset (line {self.tok.line})")
                filters.extend(self.bracketed_condition(allow_aggregates=False))
                self.accept_punct(".")
                continue
            self.unsupported_check()
            patterns.extend(self.triples_same_subject())
            if not self.accept_punct("."):
                if not self.is_punct("}") and not self.is_kw("FILTER"):
                    self.unsupported_check()
                    raise self.error(f"expected '.' or '}}', found {self.tok.text!r}")
        self.advance()
        return patterns, filters

    def triples_same_subject(self) -> list[TriplePattern]:
        subject = self.pattern_term(position="subject")
        out = []
        while True:
            if self.is_kw("a") and self.tok.text == "a":
                self.advance()
                predicate: PatternTerm = Term.iri(RDF_TYPE)
            else:
                predicate = self.pattern_term(position="predicate")
            while True:
                out.append(TriplePattern(subject, predicate, self.pattern_term(position="object")))
                if not self.accept_punct(","):
                    break
            if not self.accept_punct(";"):
                break
            if self.is_punct(".") or self.is_punct("}"):
                break
        return out

    def pattern_term(self, position: str) -> PatternTerm:
        tok = self.tok
        if tok.kind == "VAR":
            return self.variable()
        if tok.kind in ("IRI", "PNAME"):
            return Term.iri(self.iri_value())
        if position != "object":
            self.unsupported_check()
            raise self.error(f"{position} must be a variable or IRI, found {tok.text!r}")
        return self.literal()

    def literal(self) -> Term:
        tok = self.advance()
        if tok.kind == "NUMBER":
            if re.fullmatch(r"[+-]?\d+", tok.text):
                try:
                    return Term.integer(int(tok.text))
                except ValueError:
                    raise self.error(f"integer {tok.text} outside the 32-bit range", tok) from None
            return Term.float(float(tok.text))
        if tok.kind == "STRING":
            text = unescape_literal(tok.text[1:-1])
            if self.tok.kind == "LANG":
                self.unsupported_check()
            if self.tok.kind == "DTYPE":
                self.advance()
                dtype = self.iri_value()
                return self.typed_literal(text, dtype, tok)
            return Term.string(text)
        if tok.kind == "NAME" and tok.text in ("true", "false"):
            raise UnsupportedConstruct("boolean literals are outside the supported subset")
        self.i -= 1
        self.unsupported_check()
        raise self.error(f"expected a term, found {tok.text or 'end of query'!r}", tok)

    def typed_literal(self, text: str, dtype: str, tok: Token) -> Term:
        if not dtype.startswith(XSD):
            raise UnsupportedConstruct(f"datatype <{dtype}> is outside the supported subset")
        local = dtype[len(XSD):]
        try:
            if local in ("integer", "int", "long", "short", "byte"):
                return Term.integer(int(text))
            if local in ("float", "double", "decimal"):
                return Term.float(float(text.replace("INF", "inf")))
        except ValueError:
            raise self.error(f"bad {local} literal {text!r}", tok) from None
        if local == "string":
            return Term.string(text)
        raise UnsupportedConstruct(f"datatype xsd:{local} is outside the supported subset")

    def bracketed_condition(self, allow_aggregates: bool) -> list[Comparison]:
        self.expect_punct("(")
        out = self.condition(allow_aggregates)
        self.expect_punct(")")
        return out

    def condition(self, allow_aggregates: bool) -> list[Comparison]:
        out = self.conjunct(allow_aggregates)
        while self.tok.kind == "OP" and self.tok.text == "&&":
            self.advance()
            out.extend(self.conjunct(allow_aggregates))
        if self.tok.kind == "OP" and self.tok.text == "||":
            self.unsupported_check()
        return out

    def conjunct(self, allow_aggregates: bool) -> list[Comparison]:
        if self.is_punct("("):
            save = self.i
            self.advance()
            try:
                inner = self.condition(allow_aggregates)
                self.expect_punct(")")
                return inner
            except SparqlSyntaxError:
                self.i = save
        lhs = self.operand(allow_aggregates)
        tok = self.tok
        if tok.kind != "OP" or tok.text not in COMPARATORS:
            self.unsupported_check()
            if tok.kind == "PUNCT" and tok.text in "+-*/":
                raise UnsupportedConstruct("arithmetic in FILTER is outside the supported subset")
            raise self.error(f"expected a comparison operator, found {tok.text!r}")
        self.advance()
        rhs = self.operand(allow_aggregates)
        return [Comparison(lhs, tok.text, rhs)]

    def operand(self, allow_aggregates: bool) -> Operand:
        tok = self.tok
        if tok.kind == "VAR":
            return self.variable()
        if tok.kind in ("IRI", "PNAME"):
            return Term.iri(self.iri_value())
        if allow_aggregates and self.is_kw(*AGGREGATES):
            return self.aggregate()
        if tok.kind == "NAME" and tok.text.upper() in AGGREGATES:
            raise self.error("aggregates are only allowed in SELECT and HAVING")
        if tok.kind == "NAME" and tok.text.upper() not in ("TRUE", "FALSE"):
            if self.tokens[self.i + 1].kind == "PUNCT" and self.tokens[self.i + 1].text == "(":
                raise UnsupportedConstruct(f"function {tok.text}() is outside the supported subset")
        return self.literal()


def _validate(pq: ParsedQuery) -> ParsedQuery:
    if not pq.patterns:
        raise InvalidQuery("the WHERE clause needs at least one triple pattern")
    bound = set(pq.pattern_variables)
    aliases = set()
    for item in pq.select:
        if item.aggregate is None:
            if item.var not in bound:
                raise InvalidQuery(f"selected variable {item.var} does not occur in the WHERE clause")
        else:
            if item.var in bound or item.var in aliases:
                raise InvalidQuery(f"alias {item.var} is already in use")
            if item.aggregate.arg is not None and item.aggregate.arg not in bound:
                raise InvalidQuery(f"aggregated variable {item.aggregate.arg} does not occur in the WHERE clause")
            aliases.add(item.var)
    plain = [item.var for item in pq.select if item.aggregate is None]
    if len(set(plain)) != len(plain):
        raise InvalidQuery("a variable is selected twice")
    for c in pq.filters:
        for v in c.variables:
            if v not in bound:
                raise InvalidQuery(f"filtered variable {v} does not occur in the WHERE clause")
    for v in pq.group_by:
        if v not in bound:
            raise InvalidQuery(f"grouping variable {v} does not occur in the WHERE clause")
    if pq.select_all and pq.is_aggregate:
        raise InvalidQuery("SELECT * cannot be combined with GROUP BY or aggregates")
    if pq.group_by:
        for v in plain:
            if v not in pq.group_by:
                raise InvalidQuery(f"{v} is selected but neither grouped nor aggregated")
    elif pq.aggregates and plain:
        raise InvalidQuery("without GROUP BY, aggregates must be the only selected items")
    if pq.having and not pq.is_aggregate:
        raise InvalidQuery("HAVING requires GROUP BY or aggregates")
    for c in pq.having:
        for x in (c.lhs, c.rhs):
            if isinstance(x, Variable) and x not in pq.group_by and x not in aliases:
                raise InvalidQuery(f"HAVING refers to {x}, which is neither grouped nor an alias")
            if isinstance(x, AggregateExpr) and x.arg is not None and x.arg not in bound:
                raise InvalidQuery(f"HAVING aggregates unknown variable {x.arg}")
    for key in pq.order_by:
        if pq.is_aggregate:
            if key.var not in pq.group_by and key.var not in aliases:
                raise InvalidQuery(f"ORDER BY {key.var} must be grouped or an alias")
        elif key.var not in bound:
            raise InvalidQuery(f"ORDER BY variable {key.var} does not occur in the WHERE clause")
    return pq


def parse(text: str, prefixes: Optional[Mapping[str, str]] = None) -> ParsedQuery:
    """Parse and validate one query of the supported subset.

    ``prefixes`` predeclares namespaces, for queries written against an
    implicit default prefix such as ``:observed``.
    """
    return _validate(_Parser(text, prefixes).parse())


# -- canonical printer ----------------------------------------------------------------------


def term_text(t: PatternTerm) -> str:
    if isinstance(t, Variable):
        return str(t)
    if t.kind is TermKind.FLOAT_LITERAL:
        text = float32_text(t.value)
        if text in ("NaN", "INF", "-INF"):
            return f'"{text}"^^<{XSD}float>'
        return text
    return t.token()


def _operand_text(x: Operand) -> str:
    return str(x) if isinstance(x, AggregateExpr) else term_text(x)


def comparison_text(c: Comparison) -> str:
    return f"{_operand_text(c.lhs)} {c.op} {_operand_text(c.rhs)}"


def to_text(pq: ParsedQuery) -> str:
    lines = [f"PREFIX {name}: <{iri}>" for name, iri in pq.prefixes]
    head = "SELECT DISTINCT" if pq.distinct else "SELECT"
    if pq.select_all:
        items = ["*"]
    else:
        items = [str(s.var) if s.aggregate is None else f"({s.aggregate} AS {s.var})" for s in pq.select]
    lines.append(f"{head} {' '.join(items)}")
    if pq.from_iri is not None:
        lines.append(f"FROM <{pq.from_iri}>")
    lines.append("WHERE {")
    for p in pq.patterns:
        lines.append(f"  {term_text(p.subject)} {term_text(p.predicate)} {term_text(p.object)} .")
    for c in pq.filters:
        lines.append(f"  FILTER ({comparison_text(c)})")
    lines.append("}")
    if pq.group_by:
        lines.append("GROUP BY " + " ".join(str(v) for v in pq.group_by))
    if pq.having:
        lines.append("HAVING (" + " && ".join(comparison_text(c) for c in pq.having) + ")")
    if pq.order_by:
        keys = [f"DESC({k.var})" if k.descending else str(k.var) for k in pq.order_by]
        lines.append("ORDER BY " + " ".join(keys))
    if pq.limit is not None:
        lines.append(f"LIMIT {pq.limit}")
    if pq.offset is not None:
        lines.append(f"OFFSET {pq.offset}")
    return "\n".join(lines) + "\n"


# -- pattern graph ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatternEdge:
    source: int
    label: PatternTerm
    target: int
    pattern_index: int


@dataclass(frozen=True)
class PatternGraph:
    """Nodes are the distinct subject/object terms; one labelled edge per pattern."""

    nodes: tuple[PatternTerm, ...]
    edges: tuple[PatternEdge, ...]

    def out_edges(self, node: int) -> list[PatternEdge]:
        return [e for e in self.edges if e.source == node]

    def node_index(self, t: PatternTerm) -> int:
        return self.nodes.index(t)


def to_pattern_graph(pq: Union[ParsedQuery, tuple[TriplePattern, ...], list[TriplePattern]]) -> PatternGraph:
    patterns = pq.patterns if isinstance(pq, ParsedQuery) else tuple(pq)
    nodes: list[PatternTerm] = []
    index: dict[PatternTerm, int] = {}

    def node(t: PatternTerm) -> int:
        if t not in index:
            index[t] = len(nodes)
            nodes.append(t)
        return index[t]

    edges = [PatternEdge(node(p.subject), p.predicate, node(p.object), i) for i, p in enumerate(patterns)]
    return PatternGraph(tuple(nodes), tuple(edges))
