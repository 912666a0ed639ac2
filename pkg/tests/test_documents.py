import json

import numpy as np
import pytest

from market import FractionalAllocation, Market, PriceVector
from algorithms_folder import Outcome, round_to_pure, solve_equilibrium
from harness_folder import (ParseError, parse, parse_market, parse_outcome, parse_rounding,
                            read_document, serialize, serialize_market, write_document)


def market_text(**overrides):
    document = {"kind": "market", "n": 2, "m": 2, "valuations": [[2, 1], [1, 2]], "budgets": [1, 1]}
    document.update(overrides)
    return json.dumps(document)


def test_market_round_trip():
    market = Market([[0.1, 2.0 ** 512], [3.0, 1e-300]], [0.7, 1.3])
    assert parse_market(serialize_market(market)) == market


def test_outcome_round_trip(footnote_market):
    outcome = solve_equilibrium(footnote_market)
    parsed = parse_outcome(serialize(outcome))
    assert parsed.alloc == outcome.alloc
    assert parsed.prices == outcome.prices
    assert parsed.residual == outcome.residual
    assert parsed.iterations_used == outcome.iterations_used


def test_rounding_round_trip(footnote_market):
    result = round_to_pure(footnote_market, FractionalAllocation([[0.5], [0.5]]), PriceVector([2]))
    parsed = parse_rounding(serialize(result))
    assert parsed.alloc == result.alloc
    assert parsed.budgets_new.tolist() == result.budgets_new.tolist()
    assert parsed.perturbation_inf == result.perturbation_inf


def test_parse_dispatches_on_kind(footnote_market):
    assert isinstance(parse(serialize(footnote_market)), Market)
    outcome = Outcome(FractionalAllocation([[0.5], [0.5]]), PriceVector([2]), 0.0, 3)
    assert isinstance(parse(serialize(outcome)), Outcome)


def test_optional_outcome_fields_default():
    text = json.dumps({"kind": "outcome", "n": 1, "m": 1, "shares": [[1]], "prices": [1]})
    outcome = parse_outcome(text)
    assert outcome.residual == 0.0
    assert outcome.iterations_used == 0


def test_syntax_error_carries_position():
    with pytest.raises(ParseError) as caught:
        parse_market('{"kind": "market",\n  "n": }')
    assert caught.value.line == 2
    assert caught.value.column is not None


@pytest.mark.parametrize("overrides, field", [
    ({"kind": "outcome"}, "kind"),
    ({"n": -1}, "n"),
    ({"n": True}, "n"),
    ({"valuations": [[2, 1]]}, "valuations"),
    ({"valuations": [[2, 1], [1]]}, "valuations[1]"),
    ({"valuations": [[2, -1], [1, 2]]}, "valuations[0][1]"),
    ({"valuations": [[2, "x"], [1, 2]]}, "valuations[0][1]"),
    ({"budgets": [1, 0]}, "budgets[1]"),
    ({"budgets": [1]}, "budgets"),
])
def test_field_errors(overrides, field):
    with pytest.raises(ParseError) as caught:
        parse_market(market_text(**overrides))
    assert caught.value.field == field


def test_missing_field():
    document = json.loads(market_text())
    del document["budgets"]
    with pytest.raises(ParseError) as caught:
        parse_market(json.dumps(document))
    assert caught.value.field == "budgets"


def test_market_rules_surface_as_parse_errors():
    with pytest.raises(ParseError, match="values every good at zero"):
        parse_market(market_text(valuations=[[2, 1], [0, 0]]))


def test_owner_out_of_range():
    text = json.dumps({"kind": "rounding", "n": 2, "m": 1, "owner": [2],
                       "budgets_new": [1, 1], "prices": [1]})
    with pytest.raises(ParseError) as caught:
        parse_rounding(text)
    assert caught.value.field == "owner[0]"


@pytest.mark.parametrize("text", ["[1, 2]", '{"kind": "grid"}', "{}"])
def test_unknown_documents(text):
    with pytest.raises(ParseError):
        parse(text)


def test_serialize_rejects_other_objects():
    with pytest.raises(TypeError):
        serialize(np.zeros(2))


def test_files(tmp_path, symmetric_market):
    path = tmp_path / "market.json"
    write_document(path, symmetric_market)
    assert json.loads(path.read_text())["kind"] == "market"
    assert read_document(path) == symmetric_market
