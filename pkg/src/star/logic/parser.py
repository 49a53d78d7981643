"""Parser for the logic language.

Grammar summary: clauses end with ``.``; ``:-`` separates head and body;
``not `` prefixes negated literals; constraints use the infix relations
``#=``, ``#<``, ``#>``, ``#=<``, ``#>=``, ``#\\=`` over ``+``/``-`` integer
expressions; lists are written ``[a,b,c]``; ``%`` starts a line comment;
identifiers beginning with an uppercase letter or underscore are variables.
A bare ``_`` is anonymous: each occurrence is a fresh variable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError
from .program import FALSE, BodyItem, Constraint, Literal, Program, Rule
from .terms import Compound, Constant, Integer, ListTerm, Term, Variable

_PUNCT = {"(": "lparen", ")": "rparen", "[": "lbracket", "]": "rbracket", ",": "comma", ".": "dot"}
_RELATIONS = ("#=<", "#>=", "#\\=", "#=", "#<", "#>")


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    value: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
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
        if c == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == ":" and text[i : i + 2] == ":-":
            tokens.append(Token("neck", ":-", line, col))
            i += 2
            col += 2
            continue
        if c == "#":
            for rel in _RELATIONS:
                if text[i : i + len(rel)] == rel:
                    tokens.append(Token("rel", rel, line, col))
                    i += len(rel)
                    col += len(rel)
                    break
            else:
                raise ParseError(f"unknown operator starting {text[i:i+3]!r}", line, col)
            continue
        if c in "+-":
            tokens.append(Token("op", c, line, col))
            i += 1
            col += 1
            continue
        if c in _PUNCT:
            tokens.append(Token(_PUNCT[c], c, line, col))
            i += 1
            col += 1
            continue
        if c.isdigit():
            start = i
            while i < n and text[i].isdigit():
                i += 1
            tokens.append(Token("int", text[start:i], line, col))
            col += i - start
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            if word == "not":
                tokens.append(Token("not", word, line, col))
            elif word[0].isupper() or word[0] == "_":
                tokens.append(Token("var", word, line, col))
            else:
                tokens.append(Token("ident", word, line, col))
            col += i - start
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = tokenize(text)
        self.pos = 0
        self.anon_counter = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind}, found {tok.value or tok.kind!r}", tok.line, tok.column)
        return self.advance()

    def fail(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.column)

    # --- terms ------------------------------------------------------------

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == "var":
            self.advance()
            if tok.value == "_":
                self.anon_counter += 1
                return Variable(f"_A{self.anon_counter}")
            return Variable(tok.value)
        if tok.kind == "int":
            self.advance()
            return Integer(int(tok.value))
        if tok.kind == "op" and tok.value == "-":
            self.advance()
            num = self.expect("int")
            return Integer(-int(num.value))
        if tok.kind == "lbracket":
            self.advance()
            elements: list[Term] = []
            if self.peek().kind != "rbracket":
                elements.append(self.parse_term())
                while self.peek().kind == "comma":
                    self.advance()
                    elements.append(self.parse_term())
            self.expect("rbracket")
            return ListTerm(tuple(elements))
        if tok.kind == "ident":
            self.advance()
            if self.peek().kind == "lparen":
                self.advance()
                args = [self.parse_term()]
                while self.peek().kind == "comma":
                    self.advance()
                    args.append(self.parse_term())
                self.expect("rparen")
                return Compound(tok.value, tuple(args))
            return Constant(tok.value)
        raise self.fail(f"expected a term, found {tok.value or tok.kind!r}")

    def parse_arith(self) -> Term:
        left = self.parse_arith_primary()
        while self.peek().kind == "op":
            op = self.advance().value
            right = self.parse_arith_primary()
            left = Compound(op, (left, right))
        return left

    def parse_arith_primary(self) -> Term:
        tok = self.peek()
        if tok.kind == "lparen":
            self.advance()
            inner = self.parse_arith()
            self.expect("rparen")
            return inner
        return self.parse_term()

    # --- clauses ----------------------------------------------------------

    def parse_body_item(self) -> BodyItem:
        if self.peek().kind == "not":
            self.advance()
            inner = self.parse_body_item_positive()
            if isinstance(inner, Constraint):
                return inner.inverted()
            return Literal(inner.atom, negated=True)
        return self.parse_body_item_positive()

    def parse_body_item_positive(self) -> BodyItem:
        tok = self.peek()
        expr = self.parse_arith()
        if self.peek().kind == "rel":
            rel = self.advance().value
            rhs = self.parse_arith()
            return Constraint(expr, rel, rhs)
        if isinstance(expr, (Compound, Constant)):
            if isinstance(expr, Compound) and expr.functor in ("+", "-"):
                raise ParseError("arithmetic expression outside a constraint", tok.line, tok.column)
            return Literal(expr)
        raise ParseError("expected an atom or constraint", tok.line, tok.column)

    def parse_clause(self) -> Rule:
        tok = self.peek()
        head_term = self.parse_term()
        if not isinstance(head_term, (Compound, Constant)):
            raise ParseError("clause head must be an atom", tok.line, tok.column)
        head: Term | None = head_term
        if head == FALSE:
            head = None
        body: list[BodyItem] = []
        if self.peek().kind == "neck":
            self.advance()
            body.append(self.parse_body_item())
            while self.peek().kind == "comma":
                self.advance()
                body.append(self.parse_body_item())
        self.expect("dot")
        return Rule(head, tuple(body))

    def parse_program_rules(self) -> list[Rule]:
        rules: list[Rule] = []
        while self.peek().kind != "eof":
            rules.append(self.parse_clause())
        return rules

    def parse_goals(self) -> tuple[BodyItem, ...]:
        goals = [self.parse_body_item()]
        while self.peek().kind == "comma":
            self.advance()
            goals.append(self.parse_body_item())
        if self.peek().kind == "dot":
            self.advance()
        self.expect("eof")
        return tuple(goals)


def parse_program(text: str, validate: bool = True) -> Program:
    """Parse program source; rules keep source order.

    Validation (range restriction, stratification) is on by default; callers
    that post-process clauses into their own structures may turn it off.
    """
    rules = _Parser(text).parse_program_rules()
    return Program.create(rules, validate=validate)


def parse_query(text: str) -> tuple[BodyItem, ...]:
    """Parse a goal conjunction such as ``p(X), not q(X)``."""
    return _Parser(text).parse_goals()


def parse_ground_atom(text: str) -> Term:
    """Parse a single atom (used for facts arriving as text)."""
    parser = _Parser(text)
    term = parser.parse_term()
    if parser.peek().kind == "dot":
        parser.advance()
    parser.expect("eof")
    if not isinstance(term, (Compound, Constant)):
        raise ParseError("expected an atom", 1, 1)
    return term
