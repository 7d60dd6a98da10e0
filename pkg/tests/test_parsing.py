import pytest

from chancesos import ParseError, Polynomial, parse_polynomial
from chancesos.parsing import format_polynomial


def test_ellipse_constraint_exact_coefficients():
    p = parse_polynomial("1 - x1^2/0.81 - w1^2/1.44", ["x1", "w1"])
    assert p.coefficient((0, 0)) == 1.0
    assert p.coefficient((2, 0)) == pytest.approx(-1 / 0.81, rel=1e-15)
    assert p.coefficient((0, 2)) == pytest.approx(-1 / 1.44, rel=1e-15)
    assert len(p.terms) == 3


def test_product_expansion():
    p = parse_polynomial("(1-x1)*(1+x1)", ["x1"])
    assert p.terms == {(0,): 1.0, (2,): -1.0}


def test_second_example_constraint():
    p = parse_polynomial("x1^2/2 + w1^2 - 1/4", ["x1", "w1"])
    assert p.terms == {(2, 0): 0.5, (0, 2): 1.0, (0, 0): -0.25}


def test_decimal_is_exact_before_float_conversion():
    # 0.1 + 0.2 as decimals must collapse to exactly 0.3's float, not 0.30000000000000004
    p = parse_polynomial("0.1 + 0.2", ["x1"])
    assert p.coefficient((0,)) == 0.3


def test_unary_minus_and_parens():
    p = parse_polynomial("-(1 - x1^2)", ["x1"])
    assert p.terms == {(0,): -1.0, (2,): 1.0}
    assert parse_polynomial("--x1", ["x1"]).terms == {(1,): 1.0}


def test_power_binds_tighter_than_division():
    p = parse_polynomial("x1^2/2", ["x1"])
    assert p.terms == {(2,): 0.5}


def test_literal_power_divisor():
    p = parse_polynomial("x1/2^2", ["x1"])
    assert p.terms == {(1,): 0.25}


def test_zero_result_is_canonical():
    assert parse_polynomial("x1 - x1", ["x1"]).is_zero()


def test_unknown_variable_reports_position():
    with pytest.raises(ParseError) as ei:
        parse_polynomial("1 + y2", ["x1"])
    assert "y2" in str(ei.value)
    assert ei.value.col == 5


def test_syntax_error_has_line_and_col():
    with pytest.raises(ParseError) as ei:
        parse_polynomial("1 +\n* x1", ["x1"])
    assert ei.value.line == 2
    assert ei.value.col == 1


def test_non_integer_exponent_rejected():
    with pytest.raises(ParseError, match="exponent"):
        parse_polynomial("x1^2.5", ["x1"])


def test_negative_exponent_rejected():
    with pytest.raises(ParseError):
        parse_polynomial("x1^-2", ["x1"])


def test_division_by_variable_rejected():
    with pytest.raises(ParseError, match="literal"):
        parse_polynomial("1/x1", ["x1"])


def test_division_by_zero_rejected():
    with pytest.raises(ParseError, match="zero"):
        parse_polynomial("x1/0", ["x1"])


def test_trailing_garbage_rejected():
    with pytest.raises(ParseError):
        parse_polynomial("x1 )", ["x1"])


def test_empty_input_rejected():
    with pytest.raises(ParseError):
        parse_polynomial("", ["x1"])


@pytest.mark.parametrize("src", [
    "1 - x1^2/0.81 - w1^2/1.44",
    "x1^2/2 + w1^2 - 1/4",
    "3*x1*w1 - 0.5*w1^3 + 2",
])
def test_parse_print_parse_roundtrip(src):
    names = ["x1", "w1"]
    p = parse_polynomial(src, names)
    printed = format_polynomial(p, names)
    q = parse_polynomial(printed, names)
    assert p == q


def test_whitespace_and_newlines_ignored():
    p = parse_polynomial(" 1\n  - x1 ^ 2 ", ["x1"])
    assert p.terms == {(0,): 1.0, (2,): -1.0}
