"""Pretty-printer producing parseable ``.ppl`` source."""
from __future__ import annotations

from .ast import (
    Assign, Bernoulli, BinOp, Call, Categorical, Compare, For, GMLit, Gauss,
    If, Neg, Not, Num, Observe, PAnd, Param, PConst, PNot, POr, Program,
    Sample, Seq, Skip, Var, flatten,
)

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def fmt_num(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def pretty_expr(e, prec: int = 0) -> str:
    if isinstance(e, Num):
        s = fmt_num(e.value)
        return f"({s})" if e.value < 0 else s
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        # right operand of - and / needs parentheses at equal precedence
        s = f"{pretty_expr(e.left, p)} {e.op} {pretty_expr(e.right, p + 1)}"
        return f"({s})" if p < prec else s
    if isinstance(e, Neg):
        return f"-{pretty_expr(e.operand, 3)}"
    if isinstance(e, Not):
        return f"!{pretty_expr(e.operand, 3)}"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(pretty_expr(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


def pretty_pred(p, prec: int = 0) -> str:
    if isinstance(p, Compare):
        return f"{pretty_expr(p.left)} {p.op} {pretty_expr(p.right)}"
    if isinstance(p, PConst):
        return "true" if p.value else "false"
    if isinstance(p, PNot):
        return f"!({pretty_pred(p.operand)})"
    if isinstance(p, POr):
        s = f"{pretty_pred(p.left, 1)} || {pretty_pred(p.right, 2)}"
        return f"({s})" if prec > 1 else s
    if isinstance(p, PAnd):
        s = f"{pretty_pred(p.left, 2)} && {pretty_pred(p.right, 3)}"
        return f"({s})" if prec > 2 else s
    raise TypeError(f"not a predicate: {p!r}")


def pretty_dist(d) -> str:
    if isinstance(d, Bernoulli):
        return f"bernoulli({pretty_expr(d.p)})"
    if isinstance(d, Gauss):
        return f"gauss({pretty_expr(d.mean)}, {pretty_expr(d.var)})"
    if isinstance(d, Categorical):
        return "categorical(" + ", ".join(f"{fmt_num(v)}: {pretty_expr(p)}" for v, p in d.items) + ")"
    if isinstance(d, GMLit):
        return "gm(" + ", ".join(
            f"{pretty_expr(w)}: {pretty_expr(m)}, {pretty_expr(v)}" for w, m, v in d.items) + ")"
    raise TypeError(f"not a distribution: {d!r}")


def pretty_stmt(s, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    for st in flatten(s):
        if isinstance(st, Skip):
            lines.append(f"{pad}skip;")
        elif isinstance(st, Assign):
            lines.append(f"{pad}{st.var} := {pretty_expr(st.expr)};")
        elif isinstance(st, Sample):
            lines.append(f"{pad}{st.var} ~ {pretty_dist(st.dist)};")
        elif isinstance(st, Observe):
            lines.append(f"{pad}observe({pretty_pred(st.pred)});")
        elif isinstance(st, If):
            lines.append(f"{pad}if ({pretty_pred(st.pred)}) {{")
            lines.append(pretty_stmt(st.then, indent + 1))
            lines.append(f"{pad}}} else {{")
            lines.append(pretty_stmt(st.orelse, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(st, For):
            lines.append(f"{pad}for {st.counter} in 1..{st.bound} {{")
            lines.append(pretty_stmt(st.body, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(st, Seq):  # pragma: no cover - flatten removes these
            lines.append(pretty_stmt(st, indent))
    return "\n".join(lines)


def pretty(p: Program) -> str:
    lines = []
    if p.secrets:
        lines.append("//@ secret " + ", ".join(p.secrets))
    if p.outputs:
        lines.append("//@ output " + ", ".join(p.outputs))
    for d in p.params:
        lines.append(f"param {d.name};" if d.default is None else f"param {d.name} = {fmt_num(d.default)};")
    lines.append(pretty_stmt(p.body))
    return "\n".join(lines) + "\n"
