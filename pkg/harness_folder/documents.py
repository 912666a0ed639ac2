import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from market import (FractionalAllocation, IntegralAllocation, Market, MarketError, PriceVector,
                    UNASSIGNED)
from algorithms_folder import Outcome, RoundingResult

logger = logging.getLogger(__name__)

Document = Union[Market, Outcome, RoundingResult]


class ParseError(MarketError):
    """Malformed document; carries the JSON position or the offending field."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 field: Optional[str] = None):
        self.line = line
        self.column = column
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)


def _dump(payload: Dict[str, Any]) -> str:
    # json writes floats with repr, so values round-trip bit for bit
    return json.dumps(payload, indent=2) + "\n"


def _load(text: str, kind: str) -> Dict[str, Any]:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, line=err.lineno, column=err.colno) from err
    if not isinstance(document, dict):
        raise ParseError("Document must be a JSON object")
    found = document.get("kind")
    if found != kind:
        raise ParseError(f"Expected a '{kind}' document, got {found!r}", field="kind")
    return document


def _require(document: Dict[str, Any], name: str) -> Any:
    if name not in document:
        raise ParseError("Missing field", field=name)
    return document[name]


def _number(value: Any, field: str, minimum: Optional[float] = None, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"Expected a number, got {value!r}", field=field)
    value = float(value)
    if not math.isfinite(value):
        raise ParseError("Number must be finite", field=field)
    if minimum is not None and (value < minimum or (strict and value == minimum)):
        bound = ">" if strict else ">="
        raise ParseError(f"Expected a number {bound} {minimum}, got {value}", field=field)
    return value


def _count(value: Any, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ParseError(f"Expected a non-negative integer, got {value!r}", field=field)
    return value


def _vector(value: Any, field: str, length: int, minimum: Optional[float] = None,
            strict: bool = False) -> List[float]:
    if not isinstance(value, list):
        raise ParseError("Expected a list", field=field)
    if len(value) != length:
        raise ParseError(f"Expected {length} entries, got {len(value)}", field=field)
    return [_number(item, f"{field}[{index}]", minimum, strict) for index, item in enumerate(value)]


def _matrix(value: Any, field: str, rows: int, columns: int,
            minimum: Optional[float] = None) -> List[List[float]]:
    if not isinstance(value, list):
        raise ParseError("Expected a list of rows", field=field)
    if len(value) != rows:
        raise ParseError(f"Expected {rows} rows, got {len(value)}", field=field)
    return [_vector(row, f"{field}[{index}]", columns, minimum) for index, row in enumerate(value)]


def _build(factory, *args):
    # Cross-field validation failures surface as parse errors
    try:
        return factory(*args)
    except ParseError:
        raise
    except MarketError as err:
        raise ParseError(str(err)) from err


def serialize_market(market: Market) -> str:
    return _dump({
        "kind": "market",
        "n": market.n_agents,
        "m": market.n_goods,
        "valuations": market.valuations.tolist(),
        "budgets": market.budgets.tolist(),
    })


def parse_market(text: str) -> Market:
    document = _load(text, "market")
    n = _count(_require(document, "n"), "n")
    m = _count(_require(document, "m"), "m")
    valuations = _matrix(_require(document, "valuations"), "valuations", n, m, minimum=0.0)
    budgets = _vector(_require(document, "budgets"), "budgets", n, minimum=0.0, strict=True)
    return _build(Market, valuations, budgets)


def serialize_outcome(outcome: Outcome) -> str:
    return _dump({
        "kind": "outcome",
        "n": outcome.alloc.n_agents,
        "m": outcome.alloc.n_goods,
        "shares": outcome.alloc.shares.tolist(),
        "prices": outcome.prices.prices.tolist(),
        "residual": outcome.residual,
        "iterations_used": outcome.iterations_used,
    })


def parse_outcome(text: str) -> Outcome:
    document = _load(text, "outcome")
    n = _count(_require(document, "n"), "n")
    m = _count(_require(document, "m"), "m")
    shares = _matrix(_require(document, "shares"), "shares", n, m, minimum=0.0)
    prices = _vector(_require(document, "prices"), "prices", m, minimum=0.0)
    residual = _number(document.get("residual", 0.0), "residual", minimum=0.0)
    iterations = _count(document.get("iterations_used", 0), "iterations_used")
    return Outcome(alloc=_build(FractionalAllocation, shares), prices=_build(PriceVector, prices),
                   residual=residual, iterations_used=iterations)


def serialize_rounding(result: RoundingResult) -> str:
    return _dump({
        "kind": "rounding",
        "n": result.alloc.n_agents,
        "m": result.alloc.n_goods,
        "owner": result.alloc.owner.tolist(),
        "budgets_new": np.asarray(result.budgets_new).tolist(),
        "prices": result.prices.prices.tolist(),
        "perturbation_inf": result.perturbation_inf,
        "price_inf": result.price_inf,
        "budget_sum_delta": result.budget_sum_delta,
    })


def parse_rounding(text: str) -> RoundingResult:
    document = _load(text, "rounding")
    n = _count(_require(document, "n"), "n")
    m = _count(_require(document, "m"), "m")
    owner = _require(document, "owner")
    if not isinstance(owner, list) or len(owner) != m:
        raise ParseError(f"Expected {m} owners", field="owner")
    for good, agent in enumerate(owner):
        if isinstance(agent, bool) or not isinstance(agent, int) or not UNASSIGNED <= agent < n:
            raise ParseError(f"Owner must be an agent index or {UNASSIGNED}, got {agent!r}",
                             field=f"owner[{good}]")
    budgets_new = _vector(_require(document, "budgets_new"), "budgets_new", n, minimum=0.0)
    prices = _build(PriceVector, _vector(_require(document, "prices"), "prices", m, minimum=0.0))
    return RoundingResult(
        alloc=_build(IntegralAllocation, owner, n),
        budgets_new=np.array(budgets_new),
        prices=prices,
        perturbation_inf=_number(document.get("perturbation_inf", 0.0), "perturbation_inf", minimum=0.0),
        price_inf=_number(document.get("price_inf", prices.norm_inf), "price_inf", minimum=0.0),
        budget_sum_delta=_number(document.get("budget_sum_delta", 0.0), "budget_sum_delta", minimum=0.0),
    )


SERIALIZERS = {Market: serialize_market, Outcome: serialize_outcome, RoundingResult: serialize_rounding}
PARSERS = {"market": parse_market, "outcome": parse_outcome, "rounding": parse_rounding}


def serialize(document: Document) -> str:
    serializer = SERIALIZERS.get(type(document))
    if serializer is None:
        raise TypeError(f"Cannot serialize {type(document).__name__}")
    return serializer(document)


def parse(text: str) -> Document:
    """Parse any document, dispatching on its 'kind' field."""
    try:
        kind = json.loads(text).get("kind")
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, line=err.lineno, column=err.colno) from err
    except AttributeError:
        raise ParseError("Document must be a JSON object")
    if kind not in PARSERS:
        raise ParseError(f"Unknown document kind {kind!r}", field="kind")
    return PARSERS[kind](text)


def read_document(path: Union[str, Path]) -> Document:
    document = parse(Path(path).read_text(encoding="utf-8"))
    logger.debug("Read %s document from %s", type(document).__name__, path)
    return document


def write_document(path: Union[str, Path], document: Document) -> None:
    Path(path).write_text(serialize(document), encoding="utf-8")
    logger.debug("Wrote %s document to %s", type(document).__name__, path)
