"""Threshold calibration and the morph attack-success metric family.

Scores are similarities (higher = more alike). A morph "passes" an FRS at
threshold tau only under strict inequality, score > tau; FMR calibration
counts an impostor AT the threshold as a false match (score >= tau), i.e.
tau is the acceptance bound.

The generalized attack-potential metric (``gmap``) comes in two modes
that genuinely disagree on some instances:

* ``eq5-min``: per generator, sum pass-indicators over (attempt, morph)
  pairs separately per FRS, weight each attempt by (1 - FTAR), normalize
  by |T|*|M|, then take the minimum over FRS; average over generators.
* ``and-per-pair``: the indicator requires every FRS to pass the pair,
  the weight uses the per-attempt maximum FTAR across FRS, and there is
  no outer minimum.

All counts are aggregated as exact rationals; results are ``Fraction``
values in [0, 1] so equality against enumeration oracles is exact and
independent of summation order.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import CoverageError, SchemaError

MODE_EQ5_MIN = "eq5-min"
MODE_AND_PER_PAIR = "and-per-pair"
MODES = (MODE_EQ5_MIN, MODE_AND_PER_PAIR)

SCORE_HEADER = ["generator", "frs", "morph_id", "attempt", "slot", "score"]
FTAR_HEADER = ["frs", "attempt", "ftar"]
THRESHOLD_HEADER = ["frs", "tau"]
IMPOSTOR_HEADER = ["frs", "score"]


@dataclass(frozen=True)
class Threshold:
    """Acceptance bound of one FRS.

    target_fmr is the operating point the threshold was calibrated for
    (None for explicit overrides loaded from a file); achieved_fmr is the
    impostor acceptance fraction actually reached at tau.
    """

    frs_id: str
    tau: float
    target_fmr: float | None = None
    achieved_fmr: Fraction | None = None

    def __post_init__(self):
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")
        if self.target_fmr is not None and not 0.0 < self.target_fmr <= 1.0:
            raise ValueError(f"operating FMR must be in (0, 1], got {self.target_fmr}")


class FtarTable:
    """Failure-to-acquire rates keyed by (attempt, frs); default 0."""

    def __init__(self, rates: Mapping[tuple[int, str], float] | None = None):
        self._rates: dict[tuple[int, str], float] = {}
        for (attempt, frs), value in (rates or {}).items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"FTAR({attempt}, {frs}) = {value} outside [0, 1]")
            self._rates[(int(attempt), frs)] = float(value)

    def rate(self, attempt: int, frs: str) -> float:
        return self._rates.get((attempt, frs), 0.0)


class ScoreTable:
    """Similarity scores indexed by (generator, frs, morph, attempt, slot).

    Invariants enforced at construction: scores finite; slot in {1, 2};
    per generator the attempt set is dense from 0 and identical across
    that generator's morphs; every (morph, attempt) carries both slots
    under every FRS present in the table.
    """

    def __init__(self, data, frs_ids):
        # internal constructor; use from_rows / from_csv
        self._data = data
        self._frs = tuple(sorted(frs_ids))

    @classmethod
    def from_rows(cls, rows: Iterable[tuple], declared_frs: Iterable[str] | None = None) -> "ScoreTable":
        """Build and validate a table from (generator, frs, morph_id, attempt, slot, score) rows.

        Rows may carry a trailing source-line number used in error messages.
        """
        data: dict[str, dict[str, dict[int, dict[str, list]]]] = {}
        frs_ids: set[str] = set(declared_frs or ())
        seen: dict[tuple, int | None] = {}

        for row in rows:
            if len(row) == 7:
                generator, frs, morph, attempt, slot, score, line = row
            else:
                generator, frs, morph, attempt, slot, score = row
                line = None
            where = f" (row {line})" if line is not None else ""
            if slot not in (1, 2):
                raise SchemaError(f"slot must be 1 or 2, got {slot!r}{where}")
            if not isinstance(attempt, int) or attempt < 0:
                raise SchemaError(f"attempt must be a non-negative integer, got {attempt!r}{where}")
            score = float(score)
            if not math.isfinite(score):
                raise SchemaError(f"non-finite score for ({generator}, {frs}, {morph}, {attempt}){where}")
            key = (generator, frs, morph, attempt, slot)
            if key in seen:
                raise SchemaError(f"duplicate score for {key}{where}")
            seen[key] = line
            frs_ids.add(frs)
            cell = (
                data.setdefault(generator, {})
                .setdefault(morph, {})
                .setdefault(attempt, {})
                .setdefault(frs, [None, None])
            )
            cell[slot - 1] = score

        table = cls(data, frs_ids)
        table._validate(seen)
        return table

    @classmethod
    def from_csv(cls, path, declared_frs: Iterable[str] | None = None) -> "ScoreTable":
        rows = []
        for parsed in _read_csv(path, SCORE_HEADER):
            line, rec = parsed
            try:
                attempt = int(rec["attempt"])
                slot = int(rec["slot"])
                score = float(rec["score"])
            except ValueError as exc:
                raise SchemaError(f"{path}: row {line}: {exc}") from exc
            rows.append((rec["generator"], rec["frs"], rec["morph_id"], attempt, slot, score, line))
        return cls.from_rows(rows, declared_frs=declared_frs)

    def _validate(self, seen: dict[tuple, int | None]) -> None:
        def cite(generator, morph, attempt):
            for slot in (1, 2):
                for frs in self._frs:
                    line = seen.get((generator, frs, morph, attempt, slot))
                    if line is not None:
                        return f" (first seen at row {line})"
            return ""

        for generator, morphs in self._data.items():
            attempt_sets = {morph: set(cells.keys()) for morph, cells in morphs.items()}
            union: set[int] = set().union(*attempt_sets.values()) if attempt_sets else set()
            if union and union != set(range(len(union))):
                raise SchemaError(
                    f"generator {generator!r}: attempt indices {sorted(union)} are not dense from 0"
                )
            for morph, attempts in attempt_sets.items():
                if attempts != union:
                    missing = sorted(union - attempts)
                    raise SchemaError(
                        f"generator {generator!r}, morph {morph!r}: missing attempts {missing}"
                    )
            for morph, cells in morphs.items():
                for attempt, per_frs in cells.items():
                    for frs in self._frs:
                        pair = per_frs.get(frs)
                        if pair is None:
                            raise SchemaError(
                                f"({generator}, {morph}, attempt {attempt}) has no scores under "
                                f"FRS {frs!r}{cite(generator, morph, attempt)}"
                            )
                        for slot in (1, 2):
                            if pair[slot - 1] is None:
                                raise SchemaError(
                                    f"({generator}, {morph}, attempt {attempt}) is missing slot "
                                    f"{slot} under FRS {frs!r}{cite(generator, morph, attempt)}"
                                )

    @property
    def frs_ids(self) -> tuple[str, ...]:
        return self._frs

    def generators(self) -> tuple[str, ...]:
        return tuple(sorted(self._data.keys()))

    def morphs(self, generator: str) -> tuple[str, ...]:
        return tuple(sorted(self._data[generator].keys()))

    def attempt_count(self, generator: str) -> int:
        morphs = self._data[generator]
        return max((len(cells) for cells in morphs.values()), default=0)

    def pair(self, generator: str, morph: str, attempt: int, frs: str) -> tuple[float, float]:
        s1, s2 = self._data[generator][morph][attempt][frs]
        return s1, s2

    def is_empty(self) -> bool:
        return not self._data

    def morph_ids(self) -> set[str]:
        return {m for morphs in self._data.values() for m in morphs}

    def restrict(
        self,
        generators: Iterable[str] | None = None,
        morphs: Iterable[str] | None = None,
        frs: Iterable[str] | None = None,
    ) -> "ScoreTable":
        """Project onto a subset of generators / morph ids / FRS.

        Dropping whole morphs, generators, or FRS keeps the remaining
        grid complete, so no revalidation is needed.
        """
        keep_gen = set(generators) if generators is not None else None
        keep_morph = set(morphs) if morphs is not None else None
        keep_frs = set(frs) if frs is not None else set(self._frs)
        unknown = keep_frs - set(self._frs)
        if unknown:
            raise SchemaError(f"unknown FRS in restriction: {sorted(unknown)}")

        data = {}
        for generator, gm in self._data.items():
            if keep_gen is not None and generator not in keep_gen:
                continue
            morphs_out = {}
            for morph, cells in gm.items():
                if keep_morph is not None and morph not in keep_morph:
                    continue
                morphs_out[morph] = {
                    attempt: {f: list(pair) for f, pair in per_frs.items() if f in keep_frs}
                    for attempt, per_frs in cells.items()
                }
            if morphs_out:
                data[generator] = morphs_out
        return ScoreTable(data, sorted(keep_frs))


def _tau_of(threshold) -> float:
    return threshold.tau if isinstance(threshold, Threshold) else float(threshold)


def _check_coverage(scores: ScoreTable, thresholds: Mapping[str, object]) -> None:
    missing = [f for f in scores.frs_ids if f not in thresholds]
    if missing:
        raise CoverageError(f"no threshold for FRS: {missing}")


def gmap(
    scores: ScoreTable,
    thresholds: Mapping[str, Threshold | float],
    ftar: FtarTable | None = None,
    mode: str = MODE_EQ5_MIN,
) -> Fraction:
    """Generalized attack potential over generators, FRS, morphs, attempts.

    Returns an exact Fraction in [0, 1]. See the module docstring for the
    two modes; both use strict score > tau.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if scores.is_empty():
        raise ValueError("empty score table")
    _check_coverage(scores, thresholds)
    ftar = ftar if ftar is not None else FtarTable()

    taus = {f: _tau_of(thresholds[f]) for f in scores.frs_ids}
    total = Fraction(0)
    generators = scores.generators()
    for generator in generators:
        morphs = scores.morphs(generator)
        n_attempts = scores.attempt_count(generator)
        denom = n_attempts * len(morphs)
        if mode == MODE_EQ5_MIN:
            best: Fraction | None = None
            for frs in scores.frs_ids:
                tau = taus[frs]
                acc = Fraction(0)
                for attempt in range(n_attempts):
                    count = 0
                    for morph in morphs:
                        s1, s2 = scores.pair(generator, morph, attempt, frs)
                        if s1 > tau and s2 > tau:
                            count += 1
                    if count:
                        acc += count * (1 - Fraction(ftar.rate(attempt, frs)))
                value = acc / denom
                if best is None or value < best:
                    best = value
            total += best
        else:
            acc = Fraction(0)
            for attempt in range(n_attempts):
                weight = 1 - Fraction(max(ftar.rate(attempt, f) for f in scores.frs_ids))
                count = 0
                for morph in morphs:
                    ok = True
                    for frs in scores.frs_ids:
                        s1, s2 = scores.pair(generator, morph, attempt, frs)
                        if not (s1 > taus[frs] and s2 > taus[frs]):
                            ok = False
                            break
                    if ok:
                        count += 1
                if count:
                    acc += count * weight
            total += acc / denom
    return total / len(generators)


def _single_cell(scores: ScoreTable, op: str) -> tuple[str, str]:
    gens = scores.generators()
    if len(gens) != 1 or len(scores.frs_ids) != 1:
        raise ValueError(
            f"{op} needs a table restricted to one generator and one FRS, "
            f"got {len(gens)} generators and {len(scores.frs_ids)} FRS"
        )
    return gens[0], scores.frs_ids[0]


def fmmpmr(scores: ScoreTable, tau: Threshold | float) -> Fraction:
    """Attempt-level success rate: both slots must pass in the same attempt.

    Identical to gmap(eq5-min) with one generator, one FRS, FTAR = 0.
    """
    _, frs = _single_cell(scores, "fmmpmr")
    return gmap(scores, {frs: tau}, FtarTable(), MODE_EQ5_MIN)


def mmpmr(scores: ScoreTable, tau: Threshold | float) -> Fraction:
    """Morph-level success rate using each subject slot's best attempt.

    A morph succeeds iff, for each slot, the maximum score across that
    slot's attempts exceeds tau.
    """
    generator, frs = _single_cell(scores, "mmpmr")
    if scores.is_empty():
        raise ValueError("empty score table")
    t = _tau_of(tau)
    morphs = scores.morphs(generator)
    n_attempts = scores.attempt_count(generator)
    successes = 0
    for morph in morphs:
        pairs = [scores.pair(generator, morph, attempt, frs) for attempt in range(n_attempts)]
        if max(p[0] for p in pairs) > t and max(p[1] for p in pairs) > t:
            successes += 1
    return Fraction(successes, len(morphs))


def calibrate_threshold(
    impostor_scores: Iterable[float],
    target_fmr: float,
    frs_id: str = "",
) -> Threshold:
    """Pick the smallest tau with impostor acceptance FMR(tau) <= target.

    FMR(tau) counts impostor scores >= tau. Candidates are the observed
    score values plus one sentinel just above the maximum (so FMR 0 is
    always reachable, e.g. when every score ties).
    """
    scores = [float(s) for s in impostor_scores]
    if not scores:
        raise ValueError("impostor score list is empty")
    if any(not math.isfinite(s) for s in scores):
        raise ValueError("impostor scores must be finite")
    if not 0.0 < target_fmr <= 1.0:
        raise ValueError(f"target FMR must be in (0, 1], got {target_fmr}")

    scores.sort()
    n = len(scores)
    candidates = sorted(set(scores))
    candidates.append(math.nextafter(scores[-1], math.inf))
    for tau in candidates:
        accepted = n - bisect.bisect_left(scores, tau)
        achieved = Fraction(accepted, n)
        if achieved <= Fraction(target_fmr):
            return Threshold(frs_id=frs_id, tau=tau, target_fmr=target_fmr, achieved_fmr=achieved)
    raise AssertionError("sentinel candidate must satisfy any positive target")


def _read_csv(path, header: list[str]):
    """Yield (line_number, record) dicts after strict header validation."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(header)}") from None
        if first != header:
            raise SchemaError(f"{path}: bad header {first!r}, expected {header!r}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {line}: expected {len(header)} fields, got {len(row)}")
            yield line, dict(zip(header, row))


def load_ftar_csv(path) -> FtarTable:
    rates = {}
    for line, rec in _read_csv(path, FTAR_HEADER):
        try:
            key = (int(rec["attempt"]), rec["frs"])
            value = float(rec["ftar"])
        except ValueError as exc:
            raise SchemaError(f"{path}: row {line}: {exc}") from exc
        if key in rates:
            raise SchemaError(f"{path}: row {line}: duplicate FTAR entry for {key}")
        if not 0.0 <= value <= 1.0:
            raise SchemaError(f"{path}: row {line}: FTAR {value} outside [0, 1]")
        rates[key] = value
    return FtarTable(rates)


def load_threshold_csv(path) -> dict[str, Threshold]:
    thresholds: dict[str, Threshold] = {}
    for line, rec in _read_csv(path, THRESHOLD_HEADER):
        frs = rec["frs"]
        if frs in thresholds:
            raise SchemaError(f"{path}: row {line}: duplicate threshold for FRS {frs!r}")
        try:
            tau = float(rec["tau"])
        except ValueError as exc:
            raise SchemaError(f"{path}: row {line}: {exc}") from exc
        if not math.isfinite(tau):
            raise SchemaError(f"{path}: row {line}: tau must be finite")
        thresholds[frs] = Threshold(frs_id=frs, tau=tau)
    return thresholds


def load_impostor_csv(path) -> dict[str, list[float]]:
    scores: dict[str, list[float]] = {}
    for line, rec in _read_csv(path, IMPOSTOR_HEADER):
        try:
            value = float(rec["score"])
        except ValueError as exc:
            raise SchemaError(f"{path}: row {line}: {exc}") from exc
        if not math.isfinite(value):
            raise SchemaError(f"{path}: row {line}: non-finite impostor score")
        scores.setdefault(rec["frs"], []).append(value)
    return scores
