"""Forecast-stream ingestion and evaluation.

A stream is a CSV file with header ``obs,forecast1,forecast2`` where each row
pairs one realized observation with two density forecasts written in the
density grammar.  Evaluation scores both forecasts row by row and summarizes
the score-difference series (forecast1 minus forecast2, so positive values
favor forecast2) with Diebold-Mariano t-statistics in a rule-by-weight grid.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .densities import parse_density
from .errors import ConfigError, GrammarError
from .rules import (
    CRPS,
    CensoredLikelihood,
    ConditionalLikelihood,
    HyvarinenScore,
    LogScore,
    PenalizedWeightedLikelihood,
    TwCRPS,
    WeightedHyvarinen,
)
from .testing import dm_test
from .weights import parse_weight

__all__ = [
    "ForecastStream",
    "StreamCell",
    "EvaluationTable",
    "parse_stream",
    "evaluate_stream",
    "emit_table",
]

_HEADER = ("obs", "forecast1", "forecast2")


@dataclass
class ForecastStream:
    observations: np.ndarray
    forecasts1: list
    forecasts2: list
    specs1: list
    specs2: list
    name1: str = "forecast1"
    name2: str = "forecast2"

    def __len__(self):
        return self.observations.size

    def swapped(self):
        """Same stream with the two forecast columns exchanged."""
        return ForecastStream(
            self.observations, self.forecasts2, self.forecasts1,
            self.specs2, self.specs1, self.name2, self.name1,
        )


def parse_stream(path, name1="forecast1", name2="forecast2"):
    """Read and validate a forecast-stream CSV; errors carry row numbers."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty stream file") from None
        if tuple(h.strip() for h in header) != _HEADER:
            raise ConfigError(
                f"{path}: expected header {','.join(_HEADER)!r}, got {header!r}"
            )
        obs, d1, d2, s1, s2 = [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise ConfigError(f"{path} row {lineno}: expected 3 columns, got {len(row)}")
            try:
                obs.append(float(row[0]))
            except ValueError:
                raise ConfigError(
                    f"{path} row {lineno}: non-numeric observation {row[0]!r}"
                ) from None
            for spec, dens, specs in ((row[1], d1, s1), (row[2], d2, s2)):
                try:
                    dens.append(parse_density(spec))
                except GrammarError as exc:
                    raise GrammarError(f"{path} row {lineno}: {exc}") from None
                specs.append(spec.strip())
    if len(obs) < 2:
        raise ConfigError(f"{path}: need at least 2 data rows, got {len(obs)}")
    return ForecastStream(np.asarray(obs), d1, d2, s1, s2, name1, name2)


#: weighted rule constructors by template name; None marks unweighted rules
_RULE_FACTORIES = {
    "logs": None,
    "crps": None,
    "hy": None,
    "twcrps": TwCRPS,
    "csl": CensoredLikelihood,
    "cl": ConditionalLikelihood,
    "pwl": PenalizedWeightedLikelihood,
    "wh": WeightedHyvarinen,
}

_UNWEIGHTED = {"logs": LogScore, "crps": CRPS, "hy": HyvarinenScore}


def _make_rule(template, weight):
    if template not in _RULE_FACTORIES:
        raise ConfigError(f"unknown rule template {template!r}")
    factory = _RULE_FACTORIES[template]
    if factory is None:
        return _UNWEIGHTED[template]()
    return factory(weight)


@dataclass
class StreamCell:
    rule: str
    weight: str
    statistic: float  # DM t-statistic; NaN when skipped
    p_value: float
    n: int
    mean_diff: float
    note: str = ""


@dataclass
class EvaluationTable:
    rules: list
    weights: list
    cells: dict = field(default_factory=dict)  # (rule, weight) -> StreamCell
    proportions: dict = field(default_factory=dict)  # weight -> mean weight value
    name1: str = "forecast1"
    name2: str = "forecast2"


def evaluate_stream(stream, rules, weights, alpha=0.05):
    """Score the stream under every rule-by-weight combination.

    Positive t-statistics favor the second forecast column.  Rows producing
    non-finite score differences are reported in the cell note and the DM
    statistic is skipped for that cell.
    """
    weight_objs = [(w, parse_weight(w)) if isinstance(w, str) else (repr(w), w) for w in weights]
    table = EvaluationTable(
        rules=list(rules),
        weights=[label for label, _ in weight_objs],
        name1=stream.name1,
        name2=stream.name2,
    )
    x = stream.observations
    for label, w in weight_objs:
        table.proportions[label] = float(np.mean(w._eval(x)))
    for template in rules:
        for label, w in weight_objs:
            rule = _make_rule(template, w)
            diffs = np.array(
                [
                    rule.score(p1, xi) - rule.score(p2, xi)
                    for p1, p2, xi in zip(stream.forecasts1, stream.forecasts2, x)
                ]
            )
            bad = np.flatnonzero(~np.isfinite(diffs))
            if bad.size:
                cell = StreamCell(
                    template, label, math.nan, math.nan, x.size, math.nan,
                    note="non-finite score difference at rows "
                    + ", ".join(str(i + 2) for i in bad[:10]),
                )
            else:
                res = dm_test(diffs, sided="two", alpha=alpha)
                note = "degenerate: zero-variance difference series" if res.degenerate else ""
                cell = StreamCell(
                    template, label, res.statistic, res.p_value, x.size,
                    float(np.mean(diffs)), note=note,
                )
            table.cells[(template, label)] = cell
    return table


def emit_table(table, fmt, path):
    """Write the evaluation grid as CSV (t-statistics plus a proportion row)
    or JSON (full per-cell detail).  `path` may be a file object."""
    if hasattr(path, "write"):
        return _emit_table_to(table, fmt, path)
    with open(path, "w", newline="") as fh:
        return _emit_table_to(table, fmt, fh)


def _emit_table_to(table, fmt, fh):
    if fmt == "csv":
        writer = csv.writer(fh)
        writer.writerow(["rule"] + table.weights)
        for rule in table.rules:
            row = [rule]
            for wlabel in table.weights:
                cell = table.cells[(rule, wlabel)]
                row.append("" if math.isnan(cell.statistic) else f"{cell.statistic:.17g}")
            writer.writerow(row)
        writer.writerow(
            ["proportion"] + [f"{table.proportions[w]:.17g}" for w in table.weights]
        )
    elif fmt == "json":
        payload = {
            "schema": "tailscore.stream_evaluation.v1",
            "forecast1": table.name1,
            "forecast2": table.name2,
            "sign_convention": "positive statistics favor forecast2",
            "weights": table.weights,
            "proportions": table.proportions,
            "cells": [
                {
                    "rule": cell.rule,
                    "weight": cell.weight,
                    "statistic": None if math.isnan(cell.statistic) else cell.statistic,
                    "p_value": None if math.isnan(cell.p_value) else cell.p_value,
                    "n": cell.n,
                    "mean_diff": None if math.isnan(cell.mean_diff) else cell.mean_diff,
                    "note": cell.note,
                }
                for cell in table.cells.values()
            ],
        }
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    else:
        raise ConfigError(f"unknown table format {fmt!r}")
