"""Operations on expressions and predicates: free variables, substitution,
constant folding, numeric evaluation and linearity analysis."""
from __future__ import annotations

import math
from typing import Mapping, Optional

from .ast import (
    BinOp, Call, Compare, Expr, Neg, Not, Num, PAnd, Param, PConst, PNot,
    POr, Pred, Var,
)

EQ_TOL = 1e-12


class UnboundParameterError(Exception):
    pass


def values_equal(a: float, b: float) -> bool:
    return abs(a - b) <= EQ_TOL * max(1.0, abs(a), abs(b))


def compare(op: str, a: float, b: float) -> bool:
    if op == "==":
        return values_equal(a, b)
    if op == "!=":
        return not values_equal(a, b)
    if op == "<":
        return a < b and not values_equal(a, b)
    if op == ">":
        return a > b and not values_equal(a, b)
    if op == "<=":
        return a <= b or values_equal(a, b)
    if op == ">=":
        return a >= b or values_equal(a, b)
    raise ValueError(f"unknown comparison {op!r}")


NEGATED_OP = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}


def apply_fn(fn: str, args) -> float:
    if fn == "exp":
        return math.exp(args[0])
    if fn == "log":
        return math.log(args[0])
    if fn == "sqrt":
        return math.sqrt(args[0])
    raise ValueError(f"unknown function {fn!r}")


def apply_binop(op: str, a: float, b: float) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    raise ValueError(f"unknown operator {op!r}")


# --------------------------------------------------------------- variables

def expr_vars(e: Expr, acc: Optional[set] = None) -> set:
    acc = set() if acc is None else acc
    if isinstance(e, Var):
        acc.add(e.name)
    elif isinstance(e, BinOp):
        expr_vars(e.left, acc)
        expr_vars(e.right, acc)
    elif isinstance(e, (Neg, Not)):
        expr_vars(e.operand, acc)
    elif isinstance(e, Call):
        for a in e.args:
            expr_vars(a, acc)
    return acc


def pred_vars(p: Pred, acc: Optional[set] = None) -> set:
    acc = set() if acc is None else acc
    if isinstance(p, Compare):
        expr_vars(p.left, acc)
        expr_vars(p.right, acc)
    elif isinstance(p, PNot):
        pred_vars(p.operand, acc)
    elif isinstance(p, (PAnd, POr)):
        pred_vars(p.left, acc)
        pred_vars(p.right, acc)
    return acc


def expr_params(e: Expr, acc: Optional[set] = None) -> set:
    acc = set() if acc is None else acc
    if isinstance(e, Param):
        acc.add(e.name)
    elif isinstance(e, BinOp):
        expr_params(e.left, acc)
        expr_params(e.right, acc)
    elif isinstance(e, (Neg, Not)):
        expr_params(e.operand, acc)
    elif isinstance(e, Call):
        for a in e.args:
            expr_params(a, acc)
    return acc


# ------------------------------------------------------------ substitution

def subst_expr(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneously replace variables by expressions (params untouched)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, BinOp):
        left = subst_expr(e.left, mapping)
        right = subst_expr(e.right, mapping)
        if left is e.left and right is e.right:
            return e
        return BinOp(e.op, left, right, e.loc)
    if isinstance(e, Neg):
        inner = subst_expr(e.operand, mapping)
        return e if inner is e.operand else Neg(inner, e.loc)
    if isinstance(e, Not):
        inner = subst_expr(e.operand, mapping)
        return e if inner is e.operand else Not(inner, e.loc)
    if isinstance(e, Call):
        args = tuple(subst_expr(a, mapping) for a in e.args)
        return Call(e.fn, args, e.loc)
    return e


def subst_pred(p: Pred, mapping: Mapping[str, Expr]) -> Pred:
    if isinstance(p, Compare):
        return Compare(p.op, subst_expr(p.left, mapping), subst_expr(p.right, mapping), p.loc)
    if isinstance(p, PNot):
        return PNot(subst_pred(p.operand, mapping), p.loc)
    if isinstance(p, PAnd):
        return PAnd(subst_pred(p.left, mapping), subst_pred(p.right, mapping), p.loc)
    if isinstance(p, POr):
        return POr(subst_pred(p.left, mapping), subst_pred(p.right, mapping), p.loc)
    return p


def bind_expr(e: Expr, params: Mapping[str, float]) -> Expr:
    """Replace parameters by their numeric values and fold constants."""
    if isinstance(e, Param):
        if e.name not in params:
            raise UnboundParameterError(f"parameter {e.name!r} has no value")
        return Num(float(params[e.name]), e.loc)
    if isinstance(e, BinOp):
        return fold_expr(BinOp(e.op, bind_expr(e.left, params), bind_expr(e.right, params), e.loc))
    if isinstance(e, Neg):
        return fold_expr(Neg(bind_expr(e.operand, params), e.loc))
    if isinstance(e, Not):
        return fold_expr(Not(bind_expr(e.operand, params), e.loc))
    if isinstance(e, Call):
        return fold_expr(Call(e.fn, tuple(bind_expr(a, params) for a in e.args), e.loc))
    return e


def bind_pred(p: Pred, params: Mapping[str, float]) -> Pred:
    if isinstance(p, Compare):
        return Compare(p.op, bind_expr(p.left, params), bind_expr(p.right, params), p.loc)
    if isinstance(p, PNot):
        return PNot(bind_pred(p.operand, params), p.loc)
    if isinstance(p, PAnd):
        return PAnd(bind_pred(p.left, params), bind_pred(p.right, params), p.loc)
    if isinstance(p, POr):
        return POr(bind_pred(p.left, params), bind_pred(p.right, params), p.loc)
    return p


# ----------------------------------------------------------------- folding

def fold_expr(e: Expr) -> Expr:
    """Fold ground subexpressions to ``Num``; leaves symbolic parts alone."""
    if isinstance(e, BinOp):
        left, right = fold_expr(e.left), fold_expr(e.right)
        if isinstance(left, Num) and isinstance(right, Num):
            if e.op == "/" and right.value == 0:
                return BinOp(e.op, left, right, e.loc)
            return Num(apply_binop(e.op, left.value, right.value), e.loc)
        # neutral elements keep substituted expectations small
        if e.op == "+" and isinstance(left, Num) and left.value == 0:
            return right
        if e.op in "+-" and isinstance(right, Num) and right.value == 0:
            return left
        if e.op == "*" and isinstance(left, Num) and left.value == 1:
            return right
        if e.op in "*/" and isinstance(right, Num) and right.value == 1:
            return left
        if left is e.left and right is e.right:
            return e
        return BinOp(e.op, left, right, e.loc)
    if isinstance(e, Neg):
        inner = fold_expr(e.operand)
        if isinstance(inner, Num):
            return Num(-inner.value, e.loc)
        return Neg(inner, e.loc)
    if isinstance(e, Not):
        inner = fold_expr(e.operand)
        if isinstance(inner, Num):
            return Num(1.0 - inner.value, e.loc)
        return Not(inner, e.loc)
    if isinstance(e, Call):
        args = tuple(fold_expr(a) for a in e.args)
        if all(isinstance(a, Num) for a in args):
            try:
                return Num(apply_fn(e.fn, [a.value for a in args]), e.loc)
            except (ValueError, OverflowError):
                pass
        return Call(e.fn, args, e.loc)
    return e


def fold_pred(p: Pred) -> Pred:
    """Fold predicates; ground predicates collapse to ``PConst``."""
    if isinstance(p, Compare):
        left, right = fold_expr(p.left), fold_expr(p.right)
        if isinstance(left, Num) and isinstance(right, Num):
            return PConst(compare(p.op, left.value, right.value))
        if left == right:  # reflexive comparison of identical terms
            return PConst(p.op in ("==", "<=", ">="))
        return Compare(p.op, left, right, p.loc)
    if isinstance(p, PNot):
        inner = fold_pred(p.operand)
        if isinstance(inner, PConst):
            return PConst(not inner.value)
        return PNot(inner, p.loc)
    if isinstance(p, PAnd):
        left, right = fold_pred(p.left), fold_pred(p.right)
        for a, b in ((left, right), (right, left)):
            if isinstance(a, PConst):
                return b if a.value else PConst(False)
        return PAnd(left, right, p.loc)
    if isinstance(p, POr):
        left, right = fold_pred(p.left), fold_pred(p.right)
        for a, b in ((left, right), (right, left)):
            if isinstance(a, PConst):
                return PConst(True) if a.value else b
        return POr(left, right, p.loc)
    return p


# -------------------------------------------------------------- evaluation

def eval_expr(e: Expr, env: Mapping[str, float], params: Mapping[str, float] = {}) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Param):
        if e.name not in params:
            raise UnboundParameterError(f"parameter {e.name!r} has no value")
        return float(params[e.name])
    if isinstance(e, BinOp):
        return apply_binop(e.op, eval_expr(e.left, env, params), eval_expr(e.right, env, params))
    if isinstance(e, Neg):
        return -eval_expr(e.operand, env, params)
    if isinstance(e, Not):
        return 1.0 - eval_expr(e.operand, env, params)
    if isinstance(e, Call):
        return apply_fn(e.fn, [eval_expr(a, env, params) for a in e.args])
    raise TypeError(f"not an expression: {e!r}")


def eval_pred(p: Pred, env: Mapping[str, float], params: Mapping[str, float] = {}) -> bool:
    if isinstance(p, Compare):
        return compare(p.op, eval_expr(p.left, env, params), eval_expr(p.right, env, params))
    if isinstance(p, PConst):
        return p.value
    if isinstance(p, PNot):
        return not eval_pred(p.operand, env, params)
    if isinstance(p, PAnd):
        return eval_pred(p.left, env, params) and eval_pred(p.right, env, params)
    if isinstance(p, POr):
        return eval_pred(p.left, env, params) or eval_pred(p.right, env, params)
    raise TypeError(f"not a predicate: {p!r}")


# --------------------------------------------------------------- linearity

def affine_form(e: Expr) -> Optional[tuple]:
    """Return ``(const, {var: coeff})`` if ``e`` is affine in the variables.

    Parameters must already be bound; ``None`` signals a nonlinear term.
    """
    if isinstance(e, Num):
        return e.value, {}
    if isinstance(e, Var):
        return 0.0, {e.name: 1.0}
    if isinstance(e, Neg):
        inner = affine_form(e.operand)
        if inner is None:
            return None
        return -inner[0], {k: -v for k, v in inner[1].items()}
    if isinstance(e, Not):
        inner = affine_form(e.operand)
        if inner is None:
            return None
        return 1.0 - inner[0], {k: -v for k, v in inner[1].items()}
    if isinstance(e, Call):
        folded = fold_expr(e)
        return (folded.value, {}) if isinstance(folded, Num) else None
    if isinstance(e, BinOp):
        left, right = affine_form(e.left), affine_form(e.right)
        if left is None or right is None:
            return None
        if e.op in "+-":
            sign = 1.0 if e.op == "+" else -1.0
            coeffs = dict(left[1])
            for k, v in right[1].items():
                coeffs[k] = coeffs.get(k, 0.0) + sign * v
            return left[0] + sign * right[0], coeffs
        if e.op == "*":
            if not left[1]:
                c = left[0]
                return c * right[0], {k: c * v for k, v in right[1].items()}
            if not right[1]:
                c = right[0]
                return c * left[0], {k: c * v for k, v in left[1].items()}
            return None
        if e.op == "/":
            if right[1] or right[0] == 0:
                return None
            c = 1.0 / right[0]
            return c * left[0], {k: c * v for k, v in left[1].items()}
    return None


def product_form(e: Expr) -> Optional[tuple]:
    """Return ``(x_j, x_k)`` when ``e`` is a product of two variables."""
    if isinstance(e, BinOp) and e.op == "*" and isinstance(e.left, Var) and isinstance(e.right, Var):
        return e.left.name, e.right.name
    return None
