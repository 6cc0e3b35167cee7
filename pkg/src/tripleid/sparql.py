"""Parser for the SPARQL subset the engine evaluates.

Grammar (keywords case-insensitive):

    query   := prefix* SELECT DISTINCT? ('*' | ?var (','? ?var)*)
               WHERE '{' body '}'
    prefix  := PREFIX name: <iri>
    body    := group (UNION group)*          -- braced groups
             | (triple | filter)*            -- brace-less single group
    group   := '{' (triple | filter)* '}'
    triple  := term term term '.'
    filter  := FILTER '(' regex '(' str '(' ?var ')' ',' "pattern" ')' ')' '.'?
    term    := ?var | <iri> | name:local | "literal"

Anything else SPARQL-shaped (OPTIONAL, ORDER BY, ...) fails with
UnsupportedConstruct rather than silently.  Prefixed names are expanded
at parse time; literal tokens are carried verbatim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .dictionary import Dictionary
from .kernel import PatternKey


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, position: int = 0):
        super().__init__(f"at offset {position}: {message}")
        self.position = position


class UnknownPrefix(QuerySyntaxError):
    pass


class UnboundFilterVariable(QuerySyntaxError):
    pass


class UnsupportedConstruct(QuerySyntaxError):
    def __init__(self, construct: str, position: int = 0):
        super().__init__(f"unsupported construct: {construct}", position)
        self.construct = construct


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Term:
    lexical: str


Slot = Var | Term
SLOT_LETTERS = ("S", "P", "O")


@dataclass(frozen=True)
class TriplePattern:
    s: Slot
    p: Slot
    o: Slot

    @property
    def slots(self) -> tuple[Slot, Slot, Slot]:
        return (self.s, self.p, self.o)

    @property
    def pattern_class(self) -> str:
        """E.g. '?P?' for a bound predicate between two variables."""
        return "".join(
            letter if isinstance(slot, Term) else "?"
            for letter, slot in zip(SLOT_LETTERS, self.slots)
        )

    def variables(self) -> list[str]:
        """Variable names in slot order, without repeats."""
        seen: list[str] = []
        for slot in self.slots:
            if isinstance(slot, Var) and slot.name not in seen:
                seen.append(slot.name)
        return seen

    def var_slots(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for i, slot in enumerate(self.slots):
            if isinstance(slot, Var):
                out.setdefault(slot.name, []).append(i)
        return out


@dataclass(frozen=True)
class Filter:
    variable: str
    regex: str


@dataclass
class Group:
    patterns: list[TriplePattern]
    filters: list[Filter]

    def variables(self) -> list[str]:
        seen: list[str] = []
        for pat in self.patterns:
            for name in pat.variables():
                if name not in seen:
                    seen.append(name)
        return seen


@dataclass
class QueryAst:
    prefixes: dict[str, str]
    distinct: bool
    projection: list[str] | None  # None = SELECT *
    groups: list[Group]

    def variables(self) -> list[str]:
        seen: list[str] = []
        for group in self.groups:
            for name in group.variables():
                if name not in seen:
                    seen.append(name)
        return seen

    def output_columns(self) -> list[str]:
        return self.projection if self.projection is not None else self.variables()


_KEYWORDS = {"PREFIX", "SELECT", "DISTINCT", "WHERE", "UNION", "FILTER", "REGEX", "STR"}
_UNSUPPORTED = {
    "OPTIONAL", "ORDER", "LIMIT", "OFFSET", "GRAPH", "MINUS", "SERVICE",
    "BIND", "VALUES", "GROUP", "HAVING", "ASK", "CONSTRUCT", "DESCRIBE",
    "INSERT", "DELETE", "EXISTS",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<COMMENT>\#[^\n]*)
  | (?P<IRIREF><[^<>]*>)
  | (?P<VAR>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<STRING>"(?:[^"\\]|\\.)*"(?:\^\^<[^<>]*>|@[A-Za-z0-9-]+)?)
  | (?P<PNAME>[A-Za-z][A-Za-z0-9_-]*:(?:[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<PUNCT>[{}().,*])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    type: str
    value: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[i]!r}", i)
        kind = m.lastgroup
        assert kind is not None
        if kind not in ("WS", "COMMENT"):
            value = m.group()
            if kind == "PUNCT":
                kind = value
            tokens.append(_Token(kind, value, i))
        i = m.end()
    tokens.append(_Token("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.type == "IDENT" and tok.value.upper() == word

    def expect_keyword(self, word: str) -> _Token:
        tok = self.next()
        if tok.type != "IDENT" or tok.value.upper() != word:
            raise QuerySyntaxError(f"expected {word}, found {tok.value!r}", tok.pos)
        return tok

    def expect(self, type_: str) -> _Token:
        tok = self.next()
        if tok.type != type_:
            raise QuerySyntaxError(f"expected {type_}, found {tok.value!r}", tok.pos)
        return tok

    def _check_unsupported(self, tok: _Token) -> None:
        if tok.type == "IDENT" and tok.value.upper() in _UNSUPPORTED:
            raise UnsupportedConstruct(tok.value.upper(), tok.pos)

    # --- grammar ----------------------------------------------------

    def parse(self) -> QueryAst:
        prefixes = dict(self._prefixes())
        distinct, projection = self._select()
        self.expect_keyword("WHERE")
        groups = self._body(prefixes)
        tok = self.next()
        if tok.type != "EOF":
            self._check_unsupported(tok)
            raise QuerySyntaxError(f"unexpected trailing {tok.value!r}", tok.pos)
        ast = QueryAst(prefixes, distinct, projection, groups)
        self._validate(ast)
        return ast

    def _prefixes(self):
        while self.at_keyword("PREFIX"):
            self.next()
            name = self.expect("PNAME")
            if not name.value.endswith(":"):
                raise QuerySyntaxError("prefix declaration needs a bare 'name:'", name.pos)
            iri = self.expect("IRIREF")
            yield name.value[:-1], iri.value[1:-1]

    def _select(self) -> tuple[bool, list[str] | None]:
        self.expect_keyword("SELECT")
        distinct = False
        if self.at_keyword("DISTINCT"):
            self.next()
            distinct = True
        if self.peek().type == "*":
            self.next()
            return distinct, None
        names: list[str] = []
        while self.peek().type == "VAR":
            names.append(self.next().value[1:])
            if self.peek().type == ",":
                self.next()
        if not names:
            tok = self.peek()
            self._check_unsupported(tok)
            raise QuerySyntaxError("SELECT needs '*' or variables", tok.pos)
        return distinct, names

    def _body(self, prefixes: dict[str, str]) -> list[Group]:
        self.expect("{")
        if self.peek().type == "{":
            groups = [self._braced_group(prefixes)]
            while self.at_keyword("UNION"):
                self.next()
                groups.append(self._braced_group(prefixes))
            self.expect("}")
            return groups
        group = self._group_body(prefixes)
        self.expect("}")
        return [group]

    def _braced_group(self, prefixes: dict[str, str]) -> Group:
        self.expect("{")
        group = self._group_body(prefixes)
        self.expect("}")
        return group

    def _group_body(self, prefixes: dict[str, str]) -> Group:
        patterns: list[TriplePattern] = []
        filters: list[Filter] = []
        while True:
            tok = self.peek()
            if tok.type in ("}", "EOF"):
                break
            if self.at_keyword("FILTER"):
                filters.append(self._filter())
                continue
            if self.at_keyword("UNION"):
                break
            patterns.append(self._triple(prefixes))
        if not patterns:
            raise QuerySyntaxError("empty group", self.peek().pos)
        for flt in filters:
            if not any(flt.variable in pat.variables() for pat in patterns):
                raise UnboundFilterVariable(
                    f"filter variable ?{flt.variable} not bound in its group",
                    self.peek().pos,
                )
        return Group(patterns, filters)

    def _triple(self, prefixes: dict[str, str]) -> TriplePattern:
        start = self.peek().pos
        s = self._term(prefixes)
        p = self._term(prefixes)
        o = self._term(prefixes)
        self.expect(".")
        pat = TriplePattern(s, p, o)
        if not pat.variables():
            raise UnsupportedConstruct("variable-free triple pattern", start)
        return pat

    def _term(self, prefixes: dict[str, str]) -> Slot:
        tok = self.next()
        if tok.type == "VAR":
            return Var(tok.value[1:])
        if tok.type == "IRIREF":
            return Term(tok.value)
        if tok.type == "STRING":
            return Term(tok.value)
        if tok.type == "PNAME":
            return Term(f"<{_expand(tok.value, prefixes, tok.pos)}>")
        self._check_unsupported(tok)
        raise QuerySyntaxError(f"expected a term, found {tok.value!r}", tok.pos)

    def _filter(self) -> Filter:
        self.expect_keyword("FILTER")
        self.expect("(")
        self.expect_keyword("REGEX")
        self.expect("(")
        self.expect_keyword("STR")
        self.expect("(")
        var = self.expect("VAR")
        self.expect(")")
        self.expect(",")
        pattern = self.expect("STRING")
        self.expect(")")
        self.expect(")")
        if self.peek().type == ".":
            self.next()
        return Filter(var.value[1:], _string_value(pattern.value))

    def _validate(self, ast: QueryAst) -> None:
        if ast.projection is not None:
            bound = set(ast.variables())
            for name in ast.projection:
                if name not in bound:
                    raise QuerySyntaxError(
                        f"projected variable ?{name} not bound in the body"
                    )


def _expand(pname: str, prefixes: dict[str, str], pos: int) -> str:
    prefix, _, local = pname.partition(":")
    if prefix not in prefixes:
        raise UnknownPrefix(f"undeclared prefix {prefix!r}", pos)
    return prefixes[prefix] + local


def _string_value(token: str) -> str:
    """Unescape the content of a quoted string token."""
    end = token.rfind('"')
    body = token[1:end]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def parse_query(text: str) -> QueryAst:
    return _Parser(text).parse()


@dataclass
class CompiledGroup:
    """One group lowered to search keys over a dictionary.

    ``satisfiable`` is False when a bound term is absent from the
    dictionary: the group can match nothing and search is skipped.
    """

    patterns: list[TriplePattern]
    filters: list[Filter]
    keys: list[PatternKey]
    var_slots: list[dict[str, list[int]]]
    satisfiable: bool
    variables: list[str] = field(default_factory=list)


@dataclass
class CompiledQuery:
    groups: list[CompiledGroup]
    distinct: bool
    projection: list[str] | None
    output_columns: list[str]


def compile_group(group: Group, dictionary: Dictionary) -> CompiledGroup:
    """Lower one group's patterns to PatternKeys: terms to IDs, variables to 0."""
    keys = []
    satisfiable = True
    for pat in group.patterns:
        ids = []
        for slot in pat.slots:
            if isinstance(slot, Var):
                ids.append(0)
            else:
                ident = dictionary.lookup(slot.lexical)
                if ident is None:
                    satisfiable = False
                    ident = 0
                ids.append(ident)
        keys.append(PatternKey(*ids))
    return CompiledGroup(
        patterns=group.patterns,
        filters=group.filters,
        keys=keys,
        var_slots=[pat.var_slots() for pat in group.patterns],
        satisfiable=satisfiable,
        variables=group.variables(),
    )


def compile_keys(ast: QueryAst, dictionary: Dictionary) -> CompiledQuery:
    """Lower every group of the query against a loaded dictionary."""
    groups = [compile_group(group, dictionary) for group in ast.groups]
    return CompiledQuery(groups, ast.distinct, ast.projection, ast.output_columns())
