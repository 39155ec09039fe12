"""RDF terms, triples, the per-device dictionary and the device tuple store."""

from __future__ import annotations

import enum
import re
import struct
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1
MAX_DICT_ENTRIES = 65_535


class CapacityExceeded(Exception):
    pass


class TermKind(enum.IntEnum):
    IRI = 0
    STRING_LITERAL = 1
    INTEGER_LITERAL = 2
    FLOAT_LITERAL = 3


def to_float32(x: float) -> float:
    """Round a Python float to the nearest 32-bit IEEE value."""
    return float(np.float32(x))


def float32_bits(x: float) -> int:
    return struct.unpack(">I", struct.pack(">f", x))[0]


def float32_from_bits(bits: int) -> float:
    return struct.unpack(">f", struct.pack(">I", bits & 0xFFFFFFFF))[0]


def float32_text(x: float) -> str:
    """Shortest decimal text that reads back as the same float32."""
    if x != x:
        return "NaN"
    if x in (float("inf"), float("-inf")):
        return "INF" if x > 0 else "-INF"
    text = str(np.float32(x))
    if not any(ch in text for ch in ".eEN"):
        text += ".0"
    return text


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "'": "'", "n": "\n", "r": "\r", "t": "\t"}


def escape_literal(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def unescape_literal(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text) and text[i + 1] in _UNESCAPES:
            out.append(_UNESCAPES[text[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class Term:
    """An RDF term: IRI, plain string literal, 32-bit integer or 32-bit float.

    Equality is RDF term identity, so ``Term.float(0.0) != Term.float(-0.0)``
    while two NaN floats with the same bit pattern are equal.
    """

    __slots__ = ("kind", "value", "_key")

    def __init__(self, kind: TermKind, value: Union[str, int, float]):
        if kind is TermKind.IRI:
            if not isinstance(value, str) or not value:
                raise ValueError("IRI lexical form must be a non-empty string")
            key = value
        elif kind is TermKind.STRING_LITERAL:
            if not isinstance(value, str):
                raise ValueError("string literal needs str value")
            key = value
        elif kind is TermKind.INTEGER_LITERAL:
            value = int(value)
            if not INT32_MIN <= value <= INT32_MAX:
                raise ValueError(f"integer {value} outside 32-bit range")
            key = value
        elif kind is TermKind.FLOAT_LITERAL:
            value = to_float32(float(value))
            key = float32_bits(value)
        else:  # pragma: no cover
            raise ValueError(kind)
        self.kind = kind
        self.value = value
        self._key = (kind, key)

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls(TermKind.IRI, value)

    @classmethod
    def string(cls, value: str) -> "Term":
        return cls(TermKind.STRING_LITERAL, value)

    @classmethod
    def integer(cls, value: int) -> "Term":
        return cls(TermKind.INTEGER_LITERAL, value)

    @classmethod
    def float(cls, value: float) -> "Term":
        return cls(TermKind.FLOAT_LITERAL, value)

    @property
    def is_numeric(self) -> bool:
        return self.kind in (TermKind.INTEGER_LITERAL, TermKind.FLOAT_LITERAL)

    @property
    def lexical(self) -> str:
        if self.kind is TermKind.INTEGER_LITERAL:
            return str(self.value)
        if self.kind is TermKind.FLOAT_LITERAL:
            return float32_text(self.value)
        return self.value

    def token(self) -> str:
        """N-Triples style token; this is the string kept in device dictionaries."""
        if self.kind is TermKind.IRI:
            return f"<{self.value}>"
        if self.kind is TermKind.STRING_LITERAL:
            return f'"{escape_literal(self.value)}"'
        return self.lexical

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Term) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"Term({self.token()})"


_INT_RE = re.compile(r"[+-]?\d+\Z")
_FLOAT_RE = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+(\.\d*)?[eE][+-]?\d+)\Z|[+-]?INF\Z|NaN\Z")


def parse_token(token: str) -> Term:
    """Inverse of :meth:`Term.token`."""
    if token.startswith("<") and token.endswith(">") and len(token) > 2:
        return Term.iri(token[1:-1])
    if len(token) >= 2 and token[0] == '"' and token[-1] == '"':
        return Term.string(unescape_literal(token[1:-1]))
    if _INT_RE.match(token):
        return Term.integer(int(token))
    if _FLOAT_RE.match(token):
        return Term.float(float(token.replace("INF", "inf")))
    raise ValueError(f"not a term token: {token!r}")


def numeric_from_text(text: str) -> Optional[Term]:
    """Coerce literal text such as ``'20'`` to a numeric term, if it is one."""
    text = text.strip()
    if _INT_RE.match(text):
        try:
            return Term.integer(int(text))
        except ValueError:
            return None
    if _FLOAT_RE.match(text):
        return Term.float(float(text.replace("INF", "inf")))
    return None


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self) -> None:
        if self.subject.kind is not TermKind.IRI or self.predicate.kind is not TermKind.IRI:
            raise ValueError("subject and predicate must be IRIs")

    def __iter__(self) -> Iterator[Term]:
        return iter((self.subject, self.predicate, self.object))


class Dictionary:
    """Bijection between strings and 16-bit device-local keys."""

    def __init__(self, capacity: int = MAX_DICT_ENTRIES):
        self.capacity = capacity
        self._by_string: dict[str, int] = {}
        self._by_key: list[str] = []
        self.iterations = 0  # full scans, observed by the hash-resolution tests

    def insert(self, s: str) -> int:
        if not s:
            raise ValueError("dictionary entries must be non-empty")
        key = self._by_string.get(s)
        if key is not None:
            return key
        if len(self._by_key) >= self.capacity:
            raise CapacityExceeded(f"dictionary holds {self.capacity} entries")
        key = len(self._by_key)
        self._by_key.append(s)
        self._by_string[s] = key
        return key

    def lookup(self, key: int) -> str:
        return self._by_key[key]

    def find(self, s: str) -> Optional[int]:
        return self._by_string.get(s)

    def items(self) -> Iterator[tuple[int, str]]:
        self.iterations += 1
        return iter(enumerate(self._by_key))

    def __len__(self) -> int:
        return len(self._by_key)

    def __contains__(self, s: str) -> bool:
        return s in self._by_string


KeyTriple = tuple[int, int, int]
ScanMask = tuple[Optional[int], Optional[int], Optional[int]]


class TupleStore:
    """Set of triples held as dictionary-key triplets plus one kind tag per slot."""

    def __init__(self, dictionary: Optional[Dictionary] = None):
        self.dictionary = dictionary if dictionary is not None else Dictionary()
        self._tuples: dict[KeyTriple, tuple[TermKind, TermKind, TermKind]] = {}
        self._terms: dict[int, Term] = {}

    def insert(self, t: Triple) -> bool:
        keys = tuple(self.dictionary.insert(term.token()) for term in t)
        if keys in self._tuples:
            return False
        for key, term in zip(keys, t):
            self._terms.setdefault(key, term)
        self._tuples[keys] = (t.subject.kind, t.predicate.kind, t.object.kind)
        return True

    def extend(self, triples: Iterable[Triple]) -> int:
        return sum(self.insert(t) for t in triples)

    def key_of(self, term: Term) -> Optional[int]:
        return self.dictionary.find(term.token())

    def term(self, key: int) -> Term:
        term = self._terms.get(key)
        if term is None:
            term = self._terms[key] = parse_token(self.dictionary.lookup(key))
        return term

    def scan(self, mask: ScanMask = (None, None, None)) -> Iterator[KeyTriple]:
        """Key triples matching every constrained slot, in insertion order."""
        s, p, o = mask
        for keys in self._tuples:
            if s is not None and keys[0] != s:
                continue
            if p is not None and keys[1] != p:
                continue
            if o is not None and keys[2] != o:
                continue
            yield keys

    def kinds(self, keys: KeyTriple) -> tuple[TermKind, TermKind, TermKind]:
        return self._tuples[keys]

    def iter_keys(self) -> Iterator[KeyTriple]:
        return iter(self._tuples)

    def iter_strings(self) -> Iterator[tuple[str, str, str]]:
        lookup = self.dictionary.lookup
        for s, p, o in self._tuples:
            yield lookup(s), lookup(p), lookup(o)

    def triples(self) -> Iterator[Triple]:
        for s, p, o in self._tuples:
            yield Triple(self.term(s), self.term(p), self.term(o))

    def __len__(self) -> int:
        return len(self._tuples)

    def __contains__(self, t: Triple) -> bool:
        keys = []
        for term in t:
            key = self.key_of(term)
            if key is None:
                return False
            keys.append(key)
        return tuple(keys) in self._tuples


# -- line format ---------------------------------------------------------------

_TOKEN_RE = re.compile(r'\s*(<[^>]*>|"(?:[^"\\]|\\.)*"(?:\^\^<[^>]*>|@[A-Za-z0-9-]+)?|[^\s]+)')
_XSD = "http://www.w3.org/2001/XMLSchema#"
_INT_DATATYPES = {_XSD + x for x in ("integer", "int", "long", "short", "byte", "nonNegativeInteger")}
_FLOAT_DATATYPES = {_XSD + x for x in ("float", "double", "decimal")}


def _n_triples_term(token: str) -> Term:
    """Like :func:`parse_token`, also accepting ``"v"^^<datatype>`` and ``"v"@lang``."""
    if token.startswith('"') and not token.endswith('"'):
        if "^^<" in token:
            lexical, dtype = token.rsplit("^^<", 1)
            dtype = dtype[:-1]
            text = unescape_literal(lexical[1:-1])
            if dtype in _INT_DATATYPES or dtype in _FLOAT_DATATYPES:
                num = numeric_from_text(text)
                if num is None:
                    raise ValueError(f"bad {dtype} literal {text!r}")
                if dtype in _FLOAT_DATATYPES:
                    return Term.float(float(num.value))
                if num.kind is not TermKind.INTEGER_LITERAL:
                    raise ValueError(f"bad {dtype} literal {text!r}")
                return num
            return Term.string(text)
        lexical = token.rsplit("@", 1)[0]
        return Term.string(unescape_literal(lexical[1:-1]))
    return parse_token(token)


class NTriplesError(ValueError):
    pass


def parse_line(line: str, lineno: int = 0) -> Optional[Triple]:
    """Parse one ``<s> <p> object .`` line; blank lines and ``#`` comments give None."""
    text = line.strip()
    if not text or text.startswith("#"):
        return None
    if not text.endswith("."):
        raise NTriplesError(f"line {lineno}: missing terminating ' .'")
    text = text[:-1].rstrip()
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            break
        tokens.append(m.group(1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    if len(tokens) != 3:
        raise NTriplesError(f"line {lineno}: expected 3 terms, got {len(tokens)}")
    try:
        terms = [_n_triples_term(tok) for tok in tokens]
        return Triple(*terms)
    except ValueError as exc:
        raise NTriplesError(f"line {lineno}: {exc}") from None


def read_triples(path: Union[str, Path]) -> list[Triple]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            t = parse_line(line, lineno)
            if t is not None:
                out.append(t)
    return out


def format_triple(t: Triple) -> str:
    return f"{t.subject.token()} {t.predicate.token()} {t.object.token()} ."


def write_triples(path: Union[str, Path], triples: Iterable[Triple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(format_triple(t) + "\n")
