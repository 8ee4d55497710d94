"""NEM tariff schedules: settlement periods, prices, and timestamp assignment.

A schedule partitions the year into settlement periods, one per
(month, peak-flag) bucket.  Each period carries an import price and an
export price; validation enforces full (month, hour) coverage and the
import > export ordering, repairing equal-price (symmetric) tariffs by
subtracting a small offset from the export price.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

#: Offset subtracted from the export price when a tariff is symmetric
#: (import price equal to export price), in $/kWh.
EQUAL_PRICE_EPS = 1e-6

MONTHS = range(1, 13)
HOURS = range(0, 24)


class TariffError(ValueError):
    """Invalid tariff definition (coverage gap, overlap, bad prices)."""


@dataclass(frozen=True)
class PeriodPrice:
    """Import/export price pair for one settlement period, in $/kWh."""

    import_price: float
    export_price: float

    @property
    def spread(self) -> float:
        return self.import_price - self.export_price


@dataclass(frozen=True)
class AssignmentRule:
    """Maps a set of months and a half-open hour range to a priced bucket."""

    months: frozenset[int]
    hour_start: int
    hour_end: int  # exclusive; ranges never cross midnight (split upstream)
    peak: bool
    import_price: float
    export_price: float

    def covers(self, month: int, hour: int) -> bool:
        return month in self.months and self.hour_start <= hour < self.hour_end


@dataclass(frozen=True)
class TariffSchedule:
    """Raw tariff definition prior to validation."""

    name: str
    rules: tuple[AssignmentRule, ...]
    fixed_charge: float = 0.0


class ValidatedSchedule:
    """Immutable, validated schedule with enumerated settlement periods.

    Periods are identified by integer ids assigned in sorted
    (month, peak) bucket order.  Instances are safe to share across
    parallel workers.
    """

    def __init__(
        self,
        name: str,
        periods: tuple[PeriodPrice, ...],
        assignment: dict[tuple[int, int], int],
        fixed_charge: float,
        period_keys: tuple | None = None,
    ):
        self.name = name
        self.periods = periods
        self.fixed_charge = fixed_charge
        self.period_keys = period_keys
        self._assignment = dict(assignment)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    def price(self, period: int) -> PeriodPrice:
        return self.periods[period]

    def assign(self, month: int, hour: int) -> int:
        return self._assignment[(month, hour)]

    def with_periods(self, periods: tuple[PeriodPrice, ...]) -> "ValidatedSchedule":
        return ValidatedSchedule(
            self.name, periods, self._assignment, self.fixed_charge, self.period_keys
        )

    @classmethod
    def from_period_prices(
        cls,
        prices: list[PeriodPrice] | tuple[PeriodPrice, ...],
        fixed_charge: float = 0.0,
        name: str = "adhoc",
    ) -> "ValidatedSchedule":
        """Build a schedule directly from a list of period prices.

        Months are assigned to periods cyclically so the (month, hour)
        assignment stays total.  Intended for tests and programmatic use
        where the calendar mapping is irrelevant.
        """
        prices = tuple(_repair(p) for p in prices)
        if not prices:
            raise TariffError("at least one period is required")
        for p in prices:
            _check_price(p)
        assignment = {
            (m, h): (m - 1) % len(prices) for m in MONTHS for h in HOURS
        }
        return cls(name, prices, assignment, fixed_charge)


def _check_price(p: PeriodPrice) -> None:
    if p.import_price < 0:
        raise TariffError(f"negative import price: {p.import_price}")
    if p.export_price > p.import_price:
        raise TariffError(
            f"export price {p.export_price} exceeds import price {p.import_price}"
        )


def _repair(p: PeriodPrice) -> PeriodPrice:
    """Apply the equal-price offset when export >= import."""
    if p.export_price >= p.import_price:
        if p.export_price > p.import_price:
            return p  # left for _check_price to reject
        return PeriodPrice(p.import_price, p.import_price - EQUAL_PRICE_EPS)
    return p


def validate_schedule(schedule: TariffSchedule) -> ValidatedSchedule:
    """Validate coverage and price ordering; enumerate settlement periods.

    Every (month, hour) cell must be covered by exactly one rule.  Rules
    sharing a (month, peak) bucket must agree on prices.  Symmetric
    prices are repaired by subtracting ``EQUAL_PRICE_EPS`` from the
    export price; a strictly inverted ordering is rejected.
    """
    cells: dict[tuple[int, int], AssignmentRule] = {}
    for rule in schedule.rules:
        if not rule.months or not set(rule.months) <= set(MONTHS):
            raise TariffError(f"rule months out of range: {sorted(rule.months)}")
        if not (0 <= rule.hour_start < rule.hour_end <= 24):
            raise TariffError(
                f"bad hour range [{rule.hour_start}, {rule.hour_end})"
            )
        if rule.import_price < 0:
            raise TariffError(f"negative import price: {rule.import_price}")
        for m in rule.months:
            for h in range(rule.hour_start, rule.hour_end):
                if (m, h) in cells:
                    raise TariffError(f"overlapping rules at month={m}, hour={h}")
                cells[(m, h)] = rule

    missing = [(m, h) for m in MONTHS for h in HOURS if (m, h) not in cells]
    if missing:
        m, h = missing[0]
        raise TariffError(
            f"uncovered cells ({len(missing)}), first at month={m}, hour={h}"
        )

    # One settlement period per (month, peak) bucket.
    bucket_price: dict[tuple[int, bool], PeriodPrice] = {}
    for (m, _h), rule in cells.items():
        key = (m, rule.peak)
        p = PeriodPrice(rule.import_price, rule.export_price)
        if key in bucket_price and bucket_price[key] != p:
            raise TariffError(
                f"conflicting prices within bucket month={m}, peak={rule.peak}"
            )
        bucket_price[key] = p

    keys = sorted(bucket_price, key=lambda k: (k[0], k[1]))
    index = {k: i for i, k in enumerate(keys)}
    periods = tuple(_repair(bucket_price[k]) for k in keys)
    for p in periods:
        _check_price(p)
    assignment = {
        (m, h): index[(m, rule.peak)] for (m, h), rule in cells.items()
    }
    return ValidatedSchedule(
        schedule.name, periods, assignment, schedule.fixed_charge, tuple(keys)
    )


def assign_period(timestamp: tuple[int, int], schedule: ValidatedSchedule) -> int:
    """Return the settlement period id for a (month, hour) timestamp."""
    month, hour = timestamp
    return schedule.assign(month, hour)


def perturb(
    schedule: ValidatedSchedule,
    dpi_plus: float,
    dpi_minus: float,
    scope: int | None = None,
) -> ValidatedSchedule:
    """Shift import/export prices additively.

    ``scope`` selects a single period id, or all periods when None.  The
    shifted prices are re-validated: equality triggers the epsilon
    repair, a strict inversion raises :class:`TariffError`.
    """
    new = []
    for t, p in enumerate(schedule.periods):
        if scope is None or scope == t:
            p = PeriodPrice(p.import_price + dpi_plus, p.export_price + dpi_minus)
        _check_price(p)
        new.append(_repair(p))
    return schedule.with_periods(tuple(new))


def load_tariff_toml(path: str | Path) -> TariffSchedule:
    """Parse a `[tariff]` TOML file into a raw :class:`TariffSchedule`."""
    path = Path(path)
    with path.open("rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise TariffError(f"{path}: {exc}") from exc
    return parse_tariff_table(doc, source=str(path))


def parse_tariff_table(doc: dict, source: str = "<config>") -> TariffSchedule:
    """Build a :class:`TariffSchedule` from an already-parsed TOML mapping."""
    try:
        tariff = doc["tariff"]
    except KeyError:
        raise TariffError(f"{source}: missing [tariff] table")
    name = tariff.get("name", "unnamed")
    fixed_charge = float(tariff.get("fixed_charge", 0.0))
    rules = []
    for i, raw in enumerate(tariff.get("rule", [])):
        try:
            months = frozenset(int(m) for m in raw["months"])
            start, end = (int(h) for h in raw["hours"])
            peak = bool(raw.get("peak", False))
            imp = float(raw["import_price"])
            exp = float(raw["export_price"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TariffError(f"{source}: malformed [[tariff.rule]] #{i + 1}: {exc}")
        spans = [(start, end)]
        if start >= end:  # crosses midnight: split into two ranges
            if start == end:
                raise TariffError(
                    f"{source}: empty hour range in [[tariff.rule]] #{i + 1}"
                )
            spans = [(start, 24), (0, end)]
        for a, b in spans:
            rules.append(AssignmentRule(months, a, b, peak, imp, exp))
    if not rules:
        raise TariffError(f"{source}: no [[tariff.rule]] entries")
    return TariffSchedule(name, tuple(rules), fixed_charge)
