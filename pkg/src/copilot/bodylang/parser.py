"""Lexer and recursive-descent parser for interface bodies.

Grammar (full EBNF in docs/body-lang.md):

    program := stmt (";" stmt)* [";"]
    stmt    := NAME ":=" expr | "return" NAME
    expr    := or ; or := and ("or" and)* ; and := not ("and" not)*
    not     := "not" not | cmp
    cmp     := add [RELOP add]
    add     := mul (("+"|"-") mul)*
    mul     := unary (("*"|"/") unary)*
    unary   := "-" unary | primary
    primary := NUMBER | STRING | "true" | "false" | "null"
             | NAME "(" args ")" | NAME | "[" items "]" | "(" expr ")"
    args    := (arg ("," arg)*)? ; arg := NAME ":=" expr | expr

Statements are single assignments; the program ends with `return name`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagnostics import Diagnostics, Loc, excerpt_line

KEYWORDS = ("return", "and", "or", "not", "true", "false", "null")

_PUNCT = {
    ":=": "ASSIGN", "==": "OP", "!=": "OP", "<=": "OP", ">=": "OP",
    "<": "OP", ">": "OP", "+": "OP", "-": "OP", "*": "OP", "/": "OP",
    "(": "LPAREN", ")": "RPAREN", "[": "LBRACK", "]": "RBRACK",
    ",": "COMMA", ";": "SEMI",
}


@dataclass(frozen=True)
class Token:
    kind: str  # NAME NUMBER STRING OP ASSIGN LPAREN ... EOF
    text: str
    loc: Loc


class _LexError(Exception):
    def __init__(self, message: str, loc: Loc):
        super().__init__(message)
        self.message = message
        self.loc = loc


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start = Loc(line, col)
        if ch == '"':
            j = i + 1
            buf = []
            while j < n and source[j] != '"':
                if source[j] == "\\" and j + 1 < n:
                    buf.append(source[j + 1])
                    j += 2
                elif source[j] == "\n":
                    raise _LexError("unterminated string", start)
                else:
                    buf.append(source[j])
                    j += 1
            if j >= n:
                raise _LexError("unterminated string", start)
            tokens.append(Token("STRING", "".join(buf), start))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] in ".eE" or
                             (source[j] in "+-" and j > i and source[j - 1] in "eE")):
                j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise _LexError(f"bad number literal {text!r}", start) from None
            tokens.append(Token("NUMBER", text, start))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = "KW" if text in KEYWORDS else "NAME"
            tokens.append(Token(kind, text, start))
            col += j - i
            i = j
            continue
        two = source[i:i + 2]
        if two in _PUNCT:
            tokens.append(Token(_PUNCT[two], two, start))
            i += 2
            col += 2
            continue
        if ch in _PUNCT:
            tokens.append(Token(_PUNCT[ch], ch, start))
            i += 1
            col += 1
            continue
        raise _LexError(f"unexpected character {ch!r}", start)
    tokens.append(Token("EOF", "", Loc(line, col)))
    return tokens


# -- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    loc: Loc


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Str(Expr):
    value: str


@dataclass(frozen=True)
class Bool(Expr):
    value: bool


@dataclass(frozen=True)
class Null(Expr):
    pass


@dataclass(frozen=True)
class Name(Expr):
    ident: str


@dataclass(frozen=True)
class ListLit(Expr):
    items: tuple


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple
    named: tuple  # of (name, Expr)


@dataclass(frozen=True)
class Stmt:
    target: str
    expr: Expr
    loc: Loc


@dataclass
class BodyProgram:
    statements: list[Stmt]
    return_name: str
    return_loc: Loc
    source: str
    free_names: list[str] = field(default_factory=list)  # filled by the checker


class _ParseError(Exception):
    def __init__(self, message: str, loc: Loc):
        super().__init__(message)
        self.message = message
        self.loc = loc


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.text or "end of input"
            raise _ParseError(f"expected {what}, found {shown!r}", tok.loc)
        return self.next()

    def parse_program(self, source: str) -> BodyProgram:
        statements: list[Stmt] = []
        return_name = None
        return_loc = None
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                break
            if tok.kind == "SEMI":
                self.next()
                continue
            if tok.kind == "KW" and tok.text == "return":
                self.next()
                name = self.expect("NAME", "a name after return")
                return_name = name.text
                return_loc = tok.loc
                while self.peek().kind == "SEMI":
                    self.next()
                trailing = self.peek()
                if trailing.kind != "EOF":
                    raise _ParseError("code after return", trailing.loc)
                break
            if return_name is not None:
                raise _ParseError("code after return", tok.loc)
            target = self.expect("NAME", "a statement name")
            self.expect("ASSIGN", "':='")
            expr = self.parse_expr()
            statements.append(Stmt(target=target.text, expr=expr, loc=target.loc))
            tok = self.peek()
            if tok.kind == "SEMI":
                self.next()
            elif tok.kind != "EOF" and not (tok.kind == "KW" and tok.text == "return"):
                raise _ParseError(f"expected ';' between statements, found {tok.text!r}", tok.loc)
        if return_name is None:
            last = self.tokens[-1]
            raise _ParseError("program must end with 'return <name>'", last.loc)
        return BodyProgram(statements=statements, return_name=return_name,
                           return_loc=return_loc, source=source)

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.peek().kind == "KW" and self.peek().text == "or":
            loc = self.next().loc
            left = BinOp(loc=loc, op="or", left=left, right=self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_not()
        while self.peek().kind == "KW" and self.peek().text == "and":
            loc = self.next().loc
            left = BinOp(loc=loc, op="and", left=left, right=self.parse_not())
        return left

    def parse_not(self) -> Expr:
        tok = self.peek()
        if tok.kind == "KW" and tok.text == "not":
            self.next()
            return Unary(loc=tok.loc, op="not", operand=self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        left = self.parse_add()
        tok = self.peek()
        if tok.kind == "OP" and tok.text in ("==", "!=", "<", "<=", ">", ">="):
            self.next()
            return BinOp(loc=tok.loc, op=tok.text, left=left, right=self.parse_add())
        return left

    def parse_add(self) -> Expr:
        left = self.parse_mul()
        while self.peek().kind == "OP" and self.peek().text in ("+", "-"):
            tok = self.next()
            left = BinOp(loc=tok.loc, op=tok.text, left=left, right=self.parse_mul())
        return left

    def parse_mul(self) -> Expr:
        left = self.parse_unary()
        while self.peek().kind == "OP" and self.peek().text in ("*", "/"):
            tok = self.next()
            left = BinOp(loc=tok.loc, op=tok.text, left=left, right=self.parse_unary())
        return left

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "-":
            self.next()
            return Unary(loc=tok.loc, op="-", operand=self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.next()
            return Num(loc=tok.loc, value=float(tok.text))
        if tok.kind == "STRING":
            self.next()
            return Str(loc=tok.loc, value=tok.text)
        if tok.kind == "KW" and tok.text in ("true", "false"):
            self.next()
            return Bool(loc=tok.loc, value=tok.text == "true")
        if tok.kind == "KW" and tok.text == "null":
            self.next()
            return Null(loc=tok.loc)
        if tok.kind == "NAME":
            self.next()
            if self.peek().kind == "LPAREN":
                return self.parse_call(tok)
            return Name(loc=tok.loc, ident=tok.text)
        if tok.kind == "LBRACK":
            self.next()
            items = []
            if self.peek().kind != "RBRACK":
                items.append(self.parse_expr())
                while self.peek().kind == "COMMA":
                    self.next()
                    items.append(self.parse_expr())
            self.expect("RBRACK", "']'")
            return ListLit(loc=tok.loc, items=tuple(items))
        if tok.kind == "LPAREN":
            self.next()
            inner = self.parse_expr()
            self.expect("RPAREN", "')'")
            return inner
        shown = tok.text or "end of input"
        raise _ParseError(f"expected an expression, found {shown!r}", tok.loc)

    def parse_call(self, name_tok: Token) -> Call:
        self.expect("LPAREN", "'('")
        args: list[Expr] = []
        named: list[tuple[str, Expr]] = []
        if self.peek().kind != "RPAREN":
            self.parse_arg(args, named)
            while self.peek().kind == "COMMA":
                self.next()
                self.parse_arg(args, named)
        self.expect("RPAREN", "')'")
        return Call(loc=name_tok.loc, func=name_tok.text, args=tuple(args), named=tuple(named))

    def parse_arg(self, args: list, named: list) -> None:
        tok = self.peek()
        if tok.kind == "NAME" and self.tokens[self.pos + 1].kind == "ASSIGN":
            self.next()
            self.next()
            named.append((tok.text, self.parse_expr()))
            return
        if named:
            raise _ParseError("positional argument after named argument", tok.loc)
        args.append(self.parse_expr())


def parse(source: str) -> BodyProgram | Diagnostics:
    try:
        tokens = tokenize(source)
        return _Parser(tokens).parse_program(source)
    except (_LexError, _ParseError) as exc:
        return Diagnostics(
            phase="parse",
            message=exc.message,
            location=exc.loc,
            excerpt=excerpt_line(source, exc.loc.line),
        )
