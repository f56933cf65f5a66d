import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmpkit import catalog
from pmpkit.errors import DomainError, ExprSyntaxError, UnknownSymbol
from pmpkit.expr import Binary, Const, Sym, Unary, control_degree, parse, unparse


def test_parse_counts_nodes():
    assert parse("x1^2 + u1", 1, 1).size == 5


def test_empty_input_offset_zero():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("", 1, 1)
    assert exc.value.offset == 0
    assert isinstance(exc.value, SyntaxError)


@pytest.mark.parametrize("src, offset", [("x1 +", 4), ("(x1", 3), ("x1 $ 2", 3), ("sin x1", 4), ("2 3", 2)])
def test_syntax_error_offsets(src, offset):
    with pytest.raises(ExprSyntaxError) as exc:
        parse(src, 1, 0)
    assert exc.value.offset == offset


def test_offset_counts_bytes():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("x1 + é", 1, 0)
    assert exc.value.offset == 5


def test_unknown_symbol():
    with pytest.raises(UnknownSymbol) as exc:
        parse("x2*u1", 1, 1)
    assert exc.value.symbol == "x2"
    with pytest.raises(UnknownSymbol):
        parse("u2", 2, 1)
    with pytest.raises(UnknownSymbol):
        parse("t", 1, 1)


def test_precedence():
    assert parse("-x1^2", 1, 0).tree == Unary("neg", Binary("^", Sym("x", 1), Const(2.0)))
    assert parse("2^3^2", 0, 0).eval([], []) == 512.0
    assert parse("1 - 2 - 3", 0, 0).eval([], []) == -4.0
    assert parse("8/4/2", 0, 0).eval([], []) == 1.0
    assert parse("(1 + 2)*3", 0, 0).eval([], []) == 9.0
    assert parse("2^-1", 0, 0).eval([], []) == 0.5


def test_eval_examples():
    assert parse("x1^2 + u1", 1, 1).eval([3], [1]) == 10.0
    assert parse("sin(x1)", 1, 0).eval([0], []) == 0.0
    assert parse("1e-3*x1", 1, 0).eval([2], []) == 2e-3


@pytest.mark.parametrize("src, x", [("1/x1", 0.0), ("log(x1)", -1.0), ("log(x1)", 0.0),
                                    ("sqrt(x1)", -1.0), ("x1^0.5", -2.0), ("x1^-1", 0.0)])
def test_domain_errors(src, x):
    with pytest.raises(DomainError):
        parse(src, 1, 0).eval([x], [])


def test_grad_examples():
    assert parse("x1^2", 1, 0).grad_x([3], []).value.tolist() == [6.0]
    assert parse("u1", 1, 1).grad_x([5], [2]).value.tolist() == [0.0]
    assert parse("x1*x2", 2, 0).grad_x([2, 7], []).value.tolist() == [7.0, 2.0]
    assert parse("x1*u1^3", 1, 1).grad_u([2], [1]).value.tolist() == [6.0]


def test_abs_kink_flag():
    g = parse("abs(x1)", 1, 0).grad_x([0.0], [])
    assert g.value.tolist() == [0.0] and g.nonsmooth
    g = parse("abs(x1)", 1, 0).grad_x([-2.0], [])
    assert g.value.tolist() == [-1.0] and not g.nonsmooth


def test_sqrt_zero_value_ok_derivative_fails():
    e = parse("sqrt(x1)", 1, 0)
    assert e.eval([0.0], []) == 0.0
    with pytest.raises(DomainError):
        e.grad_x([0.0], [])


def test_vector_length_checked():
    with pytest.raises(ValueError):
        parse("x1", 1, 0).eval([1.0, 2.0], [])


def test_control_degree():
    assert control_degree(parse("x1*u1 + sin(x1)", 1, 1).tree) == 1
    assert control_degree(parse("x1", 1, 1).tree) == 0
    assert control_degree(parse("u1^2", 1, 1).tree) is None
    assert control_degree(parse("u1*u1", 1, 1).tree) is None
    assert control_degree(parse("u1/2 - 3*u1", 1, 1).tree) == 1


def test_unparse_minimal_parentheses():
    assert unparse(parse("(x1 + u1) * (x1 - u1)", 1, 1).tree) == "(x1 + u1) * (x1 - u1)"
    assert unparse(parse("x1 - (u1 - x1)", 1, 1).tree) == "x1 - (u1 - x1)"
    assert unparse(parse("(x1^2)^3", 1, 0).tree) == "(x1^2)^3"
    assert unparse(parse("-(x1)", 1, 0).tree) == "-x1"


def test_unparse_rejects_nonfinite():
    with pytest.raises(ValueError):
        unparse(Const(math.inf))


# round trip -----------------------------------------------------------------

_leaf = st.one_of(
    st.builds(Const, st.floats(-1e6, 1e6, allow_nan=False).map(lambda v: float(round(v, 6)))),
    st.builds(Sym, st.sampled_from("xu"), st.integers(1, 2)),
)
_tree = st.recursive(
    _leaf,
    lambda kids: st.one_of(
        st.builds(Unary, st.sampled_from(["neg", "sin", "cos", "exp", "log", "sqrt", "abs"]), kids),
        st.builds(Binary, st.sampled_from(list("+-*/^")), kids, kids),
    ),
    max_leaves=12,
)


@settings(max_examples=300, deadline=None)
@given(_tree)
def test_parse_unparse_fixed_point(tree):
    once = parse(unparse(tree), 2, 2)
    twice = parse(once.unparse(), 2, 2)
    assert once.tree == twice.tree
    assert once.unparse() == twice.unparse()


@settings(max_examples=300, deadline=None)
@given(_tree)
def test_unparse_preserves_tree(tree):
    assert parse(unparse(tree), 2, 2).tree == _canonical(tree)


def _canonical(node):
    # the printer writes negative constants as (-c), which parses as neg(c)
    if isinstance(node, Const):
        return Unary("neg", Const(-node.value)) if node.value < 0 else node
    if isinstance(node, Unary):
        return Unary(node.op, _canonical(node.arg))
    if isinstance(node, Binary):
        return Binary(node.op, _canonical(node.left), _canonical(node.right))
    return node


# AD against finite differences ---------------------------------------------


def _catalog_exprs():
    for name in catalog.names():
        p = catalog.get(name).problem
        for e in (p.L, *p.phi):
            yield name, e


EXTRA = ["sin(x1)*exp(x2) + log(1 + x1^2)", "sqrt(1 + x1^2*x2^2)/(2 + cos(x2))", "x1^3 - x2*u1 + u1^2"]


@pytest.mark.parametrize("source", EXTRA)
def test_grad_matches_fd_extra(source, rng):
    e = parse(source, 2, 1)
    for _ in range(100):
        x, u = rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 1)
        _assert_fd(e, x, u)


def test_grad_matches_fd_catalog(rng):
    for _, e in _catalog_exprs():
        for _ in range(100):
            _assert_fd(e, rng.uniform(-3, 3, e.n), rng.uniform(-3, 3, e.r))


def _assert_fd(e, x, u):
    g = e.grad_x(x, u).value
    for i in range(e.n):
        h = np.cbrt(np.finfo(float).eps) * (1 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (e.eval(xp, u) - e.eval(xm, u)) / (2 * h)
        assert abs(g[i] - fd) <= 1e-6 * max(1.0, abs(fd)), (e, x, i, g[i], fd)


def test_evaluation_is_deterministic(rng):
    e = parse("sin(x1)*x2 - exp(u1)", 2, 1)
    x, u = rng.normal(size=2), rng.normal(size=1)
    assert e.eval(x, u) == e.eval(x, u)
    assert np.array_equal(e.grad_x(x, u).value, e.grad_x(x, u).value)
