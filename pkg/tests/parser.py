import math

import numpy as np
import pytest
from _util import support_file
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest_relaxed import raises

from lightcone.exceptions import ParseError, SpecError
from lightcone.models import MODELS
from lightcone.parser import (
    coordinate_names,
    parse_document,
    parse_expression,
    render_document,
)
from lightcone.spacetime import builtin, parse_metric_spec, probe_points

NAMES = coordinate_names(4)


def _value_of(text, **env):
    return parse_expression(text, NAMES).evaluate(env)


class expressions:
    def numbers_and_operators(self):
        assert _value_of("1 + 2 * 3") == 7
        assert _value_of("(1 + 2) * 3") == 9
        assert _value_of("8 / 4 / 2") == 1

    def power_is_right_associative(self):
        assert _value_of("2^3^2") == 2**9

    def power_binds_tighter_than_unary_minus(self):
        assert _value_of("-x1^2", x1=3.0) == -9.0

    def functions_and_constants(self):
        assert _value_of("exp(2*t)", t=0.5) == pytest.approx(math.e)
        assert _value_of("cos(pi)") == pytest.approx(-1.0)
        assert _value_of("sqrt(x2) * e", x2=4.0) == pytest.approx(2 * math.e)

    def evaluates_over_arrays(self):
        t = np.linspace(0.0, 1.0, 5)
        np.testing.assert_allclose(_value_of("1 + t^2", t=t), 1 + t**2)

    def user_constants(self):
        expr = parse_expression("M / x1", NAMES, {"M": 2.0})
        assert expr.evaluate({"x1": 4.0}) == 0.5
        assert not expr.is_constant()
        assert parse_expression("2 * M", (), {"M": 1.0}).is_constant()

    def render_reparses_to_the_same_value(self):
        for text in ("-x1^2", "(1 - t) * (2 + x3)", "2^3^2", "1/(1+x1^2)"):
            expr = parse_expression(text, NAMES)
            again = parse_expression(expr.render(), NAMES)
            env = {"t": 0.3, "x1": -1.2, "x3": 2.5}
            assert again.evaluate(env) == pytest.approx(expr.evaluate(env))

    class errors:
        def unknown_variable_is_located(self):
            with pytest.raises(ParseError) as info:
                parse_expression("1 + y", NAMES, line=3, column=10)
            err = info.value
            assert err.line == 3
            assert err.column == 14
            assert err.token == "y"

        @raises(ParseError)
        def dangling_operator(self):
            parse_expression("1 +", NAMES)

        @raises(ParseError)
        def unbalanced_parenthesis(self):
            parse_expression("(1 + t", NAMES)

        @raises(ParseError)
        def empty(self):
            parse_expression("  ", NAMES)

        def message_names_line_and_column(self):
            with pytest.raises(ParseError) as info:
                parse_expression("exp(", NAMES, line=2, column=5)
            assert str(info.value).startswith("line 2, column ")


class documents:
    def sections_and_values(self):
        doc = parse_document(support_file("desitter.metric"))
        assert doc.get("model", "dim").raw == 4.0
        assert doc.get("lapse", "lapse").raw == "1"
        assert doc.get("spatial", "g22").raw == "exp(2*t)"
        assert doc.get("domain", "t").raw == (-2.0, 2.0)

    def assignments_before_a_header_belong_to_model(self):
        doc = parse_document(support_file("schwarzschild.metric"))
        assert doc.get("model", "model").raw == "schwarzschild"
        assert doc.get("model", "M").raw == 1.0

    def hash_inside_quotes_is_not_a_comment(self):
        doc = parse_document('[lapse]\nlapse = "1" # real comment\n')
        assert doc.get("lapse", "lapse").raw == "1"

    def render_round_trips(self):
        sections = {
            "model": {"dim": 4},
            "lapse": {"lapse": "1"},
            "spatial": {"g11": "exp(t)", "g22": 2.0},
            "domain": {"t": (-1.0, 1.0)},
        }
        doc = parse_document(render_document(sections))
        assert doc.get("spatial", "g11").raw == "exp(t)"
        assert doc.get("spatial", "g22").raw == 2.0
        assert doc.get("domain", "t").raw == (-1.0, 1.0)

    class errors:
        def unknown_section(self):
            with pytest.raises(ParseError) as info:
                parse_document(support_file("broken/section.metric"))
            assert (info.value.line, info.value.column) == (1, 2)
            assert info.value.token == "bogus"

        def duplicate_key(self):
            with pytest.raises(ParseError) as info:
                parse_document("[spatial]\ng11 = 1\ng11 = 2\n")
            assert info.value.line == 3

        def bad_expression_inside_a_document(self):
            with pytest.raises(ParseError) as info:
                parse_metric_spec(support_file("broken/operator.metric"))
            assert info.value.line == 4

        @raises(SpecError)
        def negative_lapse(self):
            parse_metric_spec(support_file("broken/lapse.metric"))

        @raises(SpecError)
        def unknown_model(self):
            parse_metric_spec(support_file("broken/model.metric"))

        def malformed_documents_all_report_a_location(self):
            broken = [
                "[model\n",
                "= 3\n",
                "[lapse]\nlapse = \n",
                "[lapse]\nlapse = (1\n",
                '[lapse]\nlapse = "1 +"\n',
                '[lapse]\nlapse = "exp()"\n',
                '[lapse]\nlapse = "1"\n[spatial]\ng11 = "z"\n',
                "[domain]\nt = [1, \n",
                "[spatial]\ng11 = 1; g11 = 2\n",
                "[nope]\n",
                'lapse = "1"\n[spatial]\ng11 = "1 1"\n',
                '[lapse]\nlapse = "sin(t"\n',
                '[lapse]\nlapse = "1"\n[spatial]\ng11 = "2^"\n',
                "[constants]\nM = \"x1\"\n",
                '[lapse]\nlapse = "1"\n[spatial]\nq11 = 1\n',
                '[lapse]\nlapse = "1"\n[spatial]\ng11 = 1\n'
                "[domain]\nwhat = 3\n",
                '[lapse]\nlapse = "**"\n',
                '[lapse]\nn = "1"; n = "2"\n',
                "[model]\nscale = \"two\"\n",
                '[lapse]\nlapse = "1"\n[spatial]\ng11 = "1/"\n',
            ]
            for text in broken:
                with pytest.raises(ParseError) as info:
                    parse_metric_spec(text)
                assert info.value.line >= 1
                assert info.value.column >= 1


class builtin_round_trips:
    def every_builtin_as_an_expression_document(self):
        for name in MODELS.keys():
            spec = builtin(name)
            again = parse_metric_spec(spec.to_document(expressions=True))
            points = probe_points(spec, 8, seed=3)
            np.testing.assert_allclose(
                again.metric(points), spec.metric(points), rtol=1e-12
            )

    def every_builtin_in_short_form(self):
        for name in MODELS.keys():
            spec = builtin(name)
            again = parse_metric_spec(spec.to_document())
            assert again.model.name == spec.model.name


TOKENS = st.sampled_from(
    [
        "[",
        "]",
        "=",
        ";",
        "#",
        '"',
        "'",
        "\n",
        " ",
        "(",
        ")",
        "+",
        "-",
        "*",
        "/",
        "^",
        "lapse",
        "g11",
        "model",
        "spatial",
        "domain",
        "t",
        "x1",
        "exp",
        "1",
        "2.5",
        "1e3",
        "[lapse]",
        "[spatial]",
    ]
)


class fuzz:
    @settings(max_examples=500, deadline=None)
    @given(st.lists(TOKENS, max_size=40).map("".join))
    def token_streams_only_raise_parse_or_spec_errors(self, text):
        try:
            parse_metric_spec(text)
        except (ParseError, SpecError):
            pass

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=60))
    def arbitrary_text_never_crashes_the_expression_parser(self, text):
        try:
            parse_expression(text, NAMES)
        except ParseError:
            pass
