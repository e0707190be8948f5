"""Lexer and recursive-descent parser for ``.ppl`` sources.

Grammar (informal)::

    program    := (param_decl | stmt)*
    param_decl := "param" IDENT ("=" NUMBER)? ";"
    stmt       := "skip" ";" | IDENT ":=" expr ";" | IDENT "~" dist ";"
                | "observe" "(" pred ")" ";"
                | "if" "(" pred ")" block ("else" (block | if_stmt))?
                | "for" IDENT "in" "1" ".." INT block
    dist       := "bernoulli" "(" expr ")"
                | "categorical" "(" NUMBER ":" expr ("," NUMBER ":" expr)* ")"
                | "gauss" "(" expr "," expr ")"
                | "gm" "(" expr ":" expr "," expr ("," expr ":" expr "," expr)* ")"
    pred       := expr CMP expr | "!" pred | pred ("&&" | "||") pred | IDENT
                | "true" | "false" | "(" pred ")"

Line comments start with ``//``; ``//@ secret x, y`` and ``//@ output z``
annotate variable roles.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    FUNCTIONS, Assign, Bernoulli, BinOp, Call, Categorical, Compare, For,
    GMLit, Gauss, If, Loc, Neg, Not, Num, Observe, PAnd, Param, ParamDecl,
    PConst, PNot, POr, Program, Sample, Seq, Skip, Var, seq,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"{line}:{col}: {message}" if line else message)


KEYWORDS = {"param", "skip", "observe", "if", "else", "for", "in", "true", "false"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<annot>//@[^\n]*)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<=|>=|&&|\|\||\.\.|[<>!+\-*/(){},;:~=])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # num | ident | op | eof
    text: str
    line: int
    col: int


def tokenize(source: str):
    """Return ``(tokens, annotations)``; annotations are ``(role, name)``."""
    tokens, annotations = [], []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "annot":
            words = text[3:].replace(",", " ").split()
            if not words or words[0] not in ("secret", "output"):
                raise ParseError("annotation must be '//@ secret ...' or '//@ output ...'", line, col)
            annotations.extend((words[0], w) for w in words[1:])
        elif kind in ("num", "ident", "op"):
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens, annotations


_CMP_OPS = ("==", "!=", "<", ">", "<=", ">=")


class Parser:
    def __init__(self, source: str):
        self.tokens, self.annotations = tokenize(source)
        self.pos = 0

    # ------------------------------------------------------------ helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def loc(self) -> Loc:
        return Loc(self.tok.line, self.tok.col)

    def error(self, message: str) -> ParseError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(f"{message}, found {found}", t.line, t.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        t = self.tok
        self.pos += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error("expected identifier")
        self.pos += 1
        return t.text

    def number(self) -> float:
        neg = self.accept("-")
        t = self.tok
        if t.kind != "num":
            raise self.error("expected number")
        self.pos += 1
        return -float(t.text) if neg else float(t.text)

    # ------------------------------------------------------------ program
    def program(self) -> Program:
        params, stmts, seen = [], [], set()
        while self.tok.kind != "eof":
            if self.at("param"):
                loc = self.loc()
                self.pos += 1
                name = self.ident()
                if name in seen:
                    raise ParseError(f"duplicate parameter declaration {name!r}", loc.line, loc.col)
                seen.add(name)
                default = self.number() if self.accept("=") else None
                self.expect(";")
                params.append(ParamDecl(name, default, loc))
            else:
                stmts.append(self.stmt())
        secrets = tuple(n for r, n in self.annotations if r == "secret")
        outputs = tuple(n for r, n in self.annotations if r == "output")
        body = _resolve_params(seq(*stmts), seen)
        return Program(tuple(params), body, secrets, outputs)

    def block(self):
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("expected '}'")
            stmts.append(self.stmt())
        self.expect("}")
        return seq(*stmts)

    def stmt(self):
        loc = self.loc()
        if self.accept("skip"):
            self.expect(";")
            return Skip(loc)
        if self.accept("observe"):
            self.expect("(")
            p = self.pred()
            self.expect(")")
            self.expect(";")
            return Observe(p, loc)
        if self.at("if"):
            return self.if_stmt()
        if self.accept("for"):
            counter = self.ident()
            self.expect("in")
            t = self.tok
            if t.kind != "num" or t.text != "1":
                raise self.error("for-loops must start at 1")
            self.pos += 1
            self.expect("..")
            t = self.tok
            if t.kind != "num" or not t.text.isdigit() or int(t.text) < 1:
                raise self.error("expected positive integer loop bound")
            self.pos += 1
            return For(counter, int(t.text), self.block(), loc)
        if self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
            name = self.ident()
            if self.accept(":="):
                e = self.expr()
                self.expect(";")
                return Assign(name, e, loc)
            if self.accept("~"):
                d = self.dist()
                self.expect(";")
                return Sample(name, d, loc)
            raise self.error("expected ':=' or '~'")
        raise self.error("expected statement")

    def if_stmt(self):
        loc = self.loc()
        self.expect("if")
        self.expect("(")
        p = self.pred()
        self.expect(")")
        then = self.block()
        orelse = Skip()
        if self.accept("else"):
            orelse = self.if_stmt() if self.at("if") else self.block()
        return If(p, then, orelse, loc)

    # ------------------------------------------------------- distributions
    def dist(self):
        loc = self.loc()
        name = self.tok.text if self.tok.kind == "ident" else ""
        if name == "bernoulli":
            self.pos += 1
            self.expect("(")
            p = self.expr()
            self.expect(")")
            return Bernoulli(p, loc)
        if name == "gauss":
            self.pos += 1
            self.expect("(")
            m = self.expr()
            self.expect(",")
            v = self.expr()
            self.expect(")")
            return Gauss(m, v, loc)
        if name == "categorical":
            self.pos += 1
            self.expect("(")
            items = []
            while True:
                value = self.number()
                self.expect(":")
                items.append((value, self.expr()))
                if not self.accept(","):
                    break
            self.expect(")")
            return Categorical(tuple(items), loc)
        if name == "gm":
            self.pos += 1
            self.expect("(")
            items = []
            while True:
                w = self.expr()
                self.expect(":")
                m = self.expr()
                self.expect(",")
                v = self.expr()
                items.append((w, m, v))
                if not self.accept(","):
                    break
            self.expect(")")
            return GMLit(tuple(items), loc)
        raise self.error("expected distribution (bernoulli, categorical, gauss, gm)")

    # --------------------------------------------------------- expressions
    def expr(self):
        left = self.term()
        while self.at("+") or self.at("-"):
            loc = self.loc()
            op = self.tok.text
            self.pos += 1
            left = BinOp(op, left, self.term(), loc)
        return left

    def term(self):
        left = self.unary()
        while self.at("*") or self.at("/"):
            loc = self.loc()
            op = self.tok.text
            self.pos += 1
            left = BinOp(op, left, self.unary(), loc)
        return left

    def unary(self):
        loc = self.loc()
        if self.accept("-"):
            return Neg(self.unary(), loc)
        if self.accept("!"):
            return Not(self.unary(), loc)
        return self.primary()

    def primary(self):
        loc = self.loc()
        t = self.tok
        if t.kind == "num":
            self.pos += 1
            return Num(float(t.text), loc)
        if self.accept("true"):
            return Num(1.0, loc)
        if self.accept("false"):
            return Num(0.0, loc)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.pos += 1
            if t.text in FUNCTIONS and self.accept("("):
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                return Call(t.text, tuple(args), loc)
            return Var(t.text, loc)
        raise self.error("expected expression")

    # ---------------------------------------------------------- predicates
    def pred(self):
        left = self.and_pred()
        while self.at("||"):
            loc = self.loc()
            self.pos += 1
            left = POr(left, self.and_pred(), loc)
        return left

    def and_pred(self):
        left = self.not_pred()
        while self.at("&&"):
            loc = self.loc()
            self.pos += 1
            left = PAnd(left, self.not_pred(), loc)
        return left

    def not_pred(self):
        loc = self.loc()
        if self.accept("!"):
            return PNot(self.not_pred(), loc)
        return self.atom_pred()

    def atom_pred(self):
        loc = self.loc()
        start = self.pos
        try:
            left = self.expr()
        except ParseError:
            left = None
        if left is not None:
            if self.tok.kind == "op" and self.tok.text in _CMP_OPS:
                op = self.tok.text
                self.pos += 1
                return Compare(op, left, self.expr(), loc)
            if self.at(")") or self.at("&&") or self.at("||"):
                # a bare operand: truthy when nonzero
                single = self.pos == start + 1
                if single and self.tokens[start].text == "true":
                    return PConst(True, loc)
                if single and self.tokens[start].text == "false":
                    return PConst(False, loc)
                if single and isinstance(left, Var):
                    return Compare("!=", left, Num(0.0), loc)
        self.pos = start
        if self.accept("("):
            p = self.pred()
            self.expect(")")
            return p
        raise self.error("expected predicate")


def _resolve_params(stmt, names: set):
    """Turn variable references that name declared parameters into ``Param``."""
    if not names:
        return stmt
    from .exprs import subst_expr, subst_pred

    mapping = {n: Param(n) for n in names}

    def dist(d):
        if isinstance(d, Bernoulli):
            return Bernoulli(subst_expr(d.p, mapping), d.loc)
        if isinstance(d, Gauss):
            return Gauss(subst_expr(d.mean, mapping), subst_expr(d.var, mapping), d.loc)
        if isinstance(d, Categorical):
            return Categorical(tuple((v, subst_expr(p, mapping)) for v, p in d.items), d.loc)
        return GMLit(tuple(tuple(subst_expr(x, mapping) for x in it) for it in d.items), d.loc)

    def go(s):
        if isinstance(s, Seq):
            return Seq(go(s.first), go(s.second), s.loc)
        if isinstance(s, (Assign, Sample)) and s.var in names:
            raise ParseError(f"cannot assign to parameter {s.var!r}",
                             s.loc.line if s.loc else 0, s.loc.col if s.loc else 0)
        if isinstance(s, Assign):
            return Assign(s.var, subst_expr(s.expr, mapping), s.loc)
        if isinstance(s, Sample):
            return Sample(s.var, dist(s.dist), s.loc)
        if isinstance(s, Observe):
            return Observe(subst_pred(s.pred, mapping), s.loc)
        if isinstance(s, If):
            return If(subst_pred(s.pred, mapping), go(s.then), go(s.orelse), s.loc)
        if isinstance(s, For):
            return For(s.counter, s.bound, go(s.body), s.loc)
        return s

    return go(stmt)


def parse(source: str, check: bool = True) -> Program:
    """Parse ``source`` into a :class:`Program`.

    With ``check`` (the default) the unrolled program is also checked for
    reads of variables that are not yet defined.
    """
    program = Parser(source).program()
    if check:
        from .static import check_defined

        check_defined(program)
    return program


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
