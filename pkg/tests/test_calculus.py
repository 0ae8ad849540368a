import random
from fractions import Fraction

import pytest

from crbforge.calculus import (
    MAX_POWER,
    SplitProduct,
    differentiate,
    differentiate_poly,
    faulhaber,
    mul_poly,
    sum_index,
)
from crbforge.errors import DegreeOverflow, ExponentOutOfTable, IndexDifferentiation, MissingIndex
from crbforge.expr import (
    IndexPoly,
    RuleSet,
    SymbolTable,
    const_value,
    constant_poly,
    eval_numeric,
    parse,
    use_rules,
)

from exprgen import random_expr, random_point

SYMS = SymbolTable.of(theta="parameter", R="parameter", c="structural", c1="structural", c2="structural",
                      lam="structural", d="structural", M="structural", N="structural", m="index", n="index")


def p(text):
    return parse(text, SYMS)


def central_difference(e, wrt, point, h=1e-6):
    up, down = dict(point), dict(point)
    up[wrt] += h
    down[wrt] -= h
    return (eval_numeric(e, up) - eval_numeric(e, down)) / (2 * h)


def derivative_cases(n=200, seed=2024):
    rng = random.Random(seed)
    return [(random_expr(rng, depth=4), rng.choice("xyz"), random_point(rng)) for _ in range(n)]


class TestFaulhaber:
    @pytest.mark.parametrize("k", range(MAX_POWER + 1))
    def test_exact_against_brute_force(self, k):
        for M in range(1, 51):
            assert const_value(faulhaber(k, M)) == sum(Fraction(m) ** k for m in range(M))

    def test_symbolic_length(self):
        assert faulhaber(0, p("M")) == p("M")
        assert faulhaber(1, p("M")) == p("M*(M-1)/2")

    def test_out_of_table(self):
        with pytest.raises(ExponentOutOfTable):
            faulhaber(MAX_POWER + 1, p("M"))


class TestDifferentiate:
    def test_sin(self):
        assert differentiate(p("sin(theta)"), "theta") == p("cos(theta)")

    def test_power_rule(self):
        assert differentiate(p("c/R"), "R") == p("-c/R^2")

    def test_s01_coefficient(self):
        e = p("-2*pi/lam*d^2*cos(theta)^2/(2*R)")
        assert differentiate(e, "theta") == p("2*pi/lam*d^2*sin(theta)*cos(theta)/R")
        rng = random.Random(5)
        de = differentiate(e, "theta")
        for _ in range(20):
            pt = {"lam": rng.uniform(0.8, 1.2), "d": rng.uniform(0.4, 0.6), "theta": rng.uniform(-1.3, 1.3),
                  "R": rng.uniform(5, 100)}
            assert eval_numeric(de, pt) == pytest.approx(central_difference(e, "theta", pt), rel=1e-7, abs=1e-12)

    def test_randomized_against_finite_difference(self):
        for e, wrt, pt in derivative_cases():
            exact = eval_numeric(differentiate(e, wrt), pt)
            approx = central_difference(e, wrt, pt)
            assert abs(exact - approx) <= 1e-6 * max(1.0, abs(approx)), (e, wrt, pt)

    def test_linearity(self):
        rng = random.Random(11)
        for _ in range(25):
            a, b = random_expr(rng), random_expr(rng)
            assert differentiate(2 * a + b, "x") == 2 * differentiate(a, "x") + differentiate(b, "x")

    def test_index_symbol_rejected(self):
        with pytest.raises(IndexDifferentiation):
            differentiate(p("theta"), "m", SYMS)


class TestDifferentiatePoly:
    phi = "2*pi/lam*(m*d*sin(theta) - m^2*d^2*cos(theta)^2/(2*R))"

    def test_s01_theta(self):
        dp = differentiate_poly(p(self.phi), "theta")
        assert dp.coeff(1) == p("2*pi/lam*d*cos(theta)")
        assert dp.coeff(2) == p("2*pi/lam*d^2*sin(theta)*cos(theta)/R")

    def test_s01_range(self):
        dp = differentiate_poly(p(self.phi), "R")
        assert dp.coeff(2) == p("2*pi/lam*d^2*cos(theta)^2/(2*R^2)")
        assert dp.coeff(1) == p("0")

    def test_constant_phase(self):
        assert differentiate_poly(constant_poly(("m",), p("c")), "theta").is_zero

    def test_index_rejected(self):
        with pytest.raises(IndexDifferentiation):
            differentiate_poly(p(self.phi), "m")


class TestMulPoly:
    def test_monomials(self):
        assert mul_poly(p("m*c1"), p("m*c2")) == p("m^2*c1*c2")

    def test_zero(self):
        assert mul_poly(p("m*c1 + m^2"), IndexPoly(("m",))).is_zero

    def test_s01_square_matches_sampling(self):
        dp = differentiate_poly(p(TestDifferentiatePoly.phi), "theta")
        sq = mul_poly(dp, dp)
        assert sorted(d for d, _ in sq.items()) == [(2,), (3,), (4,)]
        rng = random.Random(3)
        for _ in range(10):
            pt = {"lam": rng.uniform(0.8, 1.2), "d": rng.uniform(0.4, 0.6), "theta": rng.uniform(-1.3, 1.3),
                  "R": rng.uniform(5, 100)}
            m = rng.randint(0, 20)
            assert sq.evaluate(pt, {"m": m}) == pytest.approx(dp.evaluate(pt, {"m": m}) ** 2, rel=1e-12)

    def test_degree_cap(self):
        with use_rules(RuleSet(max_degree=3)):
            with pytest.raises(DegreeOverflow):
                mul_poly(p("m^2*c1"), p("m^2*c2"))

    def test_mismatched_indices(self):
        with pytest.raises(MissingIndex):
            mul_poly(p("m*c1"), p("n*c1"))


class TestSumIndex:
    def test_ones(self):
        assert sum_index(constant_poly(("m",), 1), "m", p("M")) == p("M")

    def test_arithmetic_series(self):
        assert sum_index(p("m*c"), "m", p("M")) == p("M*(M-1)/2*c")

    def test_fourth_power_brute_force(self):
        closed = sum_index(p("m^4"), "m", p("M"))
        for M in range(1, 51):
            assert const_value(sum_index(p("m^4"), "m", M)) == sum(m**4 for m in range(M))
            assert eval_numeric(closed, {"M": M}) == pytest.approx(sum(m**4 for m in range(M)), rel=1e-12)

    @pytest.mark.parametrize("M", [1, 2, 8, 33])
    def test_agrees_with_brute_force_numerically(self, M):
        poly = p("c1*m + c2*m^3 + c*m^2*n + n^2")
        pt = {"c": 0.7, "c1": -1.3, "c2": 0.25, "N": 5}
        inner = sum_index(poly, "m", p("M"))
        assert isinstance(inner, IndexPoly) and inner.indices == ("n",)
        total = sum_index(inner, "n", p("N"))
        brute = sum(poly.evaluate(pt, {"m": i, "n": j}) for i in range(M) for j in range(5))
        assert eval_numeric(total, {**pt, "M": M}) == pytest.approx(brute, rel=1e-12)

    def test_split_product_matches_expanded(self):
        a, b = p("c1*m^3 + m"), p("c2*m^2 + c*m^3")
        assert sum_index(SplitProduct(a, b), "m", p("M")) == sum_index(mul_poly(a, b), "m", p("M"))

    def test_split_product_bypasses_degree_cap(self):
        a, b = p("c1*m^3"), p("c2*m^3")
        with use_rules(RuleSet(max_degree=4)):
            with pytest.raises(DegreeOverflow):
                mul_poly(a, b)
            total = sum_index(SplitProduct(a, b), "m", p("M"))
        assert total == p("c1*c2") * faulhaber(6, p("M"))

    def test_missing_index(self):
        with pytest.raises(MissingIndex):
            sum_index(p("m*c"), "n", p("N"))

    def test_exponent_out_of_table(self):
        with pytest.raises(ExponentOutOfTable):
            sum_index(SplitProduct(p("m^5"), p("m^4")), "m", p("M"))
