"""Declarative per-source field mappings.

A mapping config is an INI file describing how one source's delimited
tables translate into the canonical schema:

    [source]
    name = tx
    delimiter = ,

    [columns]
    crash_id = Crash_ID          ; canonical field = source column
    state = const:TX             ; or a declared constant
    unit.vehicle_class = Veh_Body_Styl_ID
    person.injury = Prsn_Injry_Sev_ID

    [dictionary.unit.vehicle_class]
    P2 = Passenger               ; source code -> canonical member
    * = Unknown                  ; explicit fallback, required

    [derive.unit.vehicle_class]
    rule.1 = HeavyVehicle when Cmv_GVWR >= 10000
    rule.2 = Passenger when Veh_Body_Styl_ID in P2|P4|SV

Unprefixed fields are crash-level; ``unit.`` and ``person.`` prefixes
bind the vehicle and person tables.  Derive rules are evaluated in
order against the raw row; the first match wins, and a miss falls back
to the column/dictionary path.  Normalization never fails: unmapped
codes degrade to the Unknown member and are counted.
"""

from __future__ import annotations

import re
from configparser import ConfigParser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

from .model import (
    ConfigError,
    FunctionalClass,
    JunctionRelation,
    KabcoLevel,
    MannerOfCollision,
    VehicleClass,
)

CRASH_REQUIRED = ("crash_id", "state", "county", "year")
UNIT_REQUIRED = ("unit.crash_id", "unit.unit_id")
PERSON_REQUIRED = ("person.crash_id",)
VMT_REQUIRED = ("state", "county", "functional_class", "year", "vmt_miles")

UNKNOWN_TOKEN = "Unknown"
FALLBACK_KEY = "*"


@dataclass(frozen=True)
class Column:
    name: str


@dataclass(frozen=True)
class Const:
    value: str


Binding = Union[Column, Const]


@dataclass(frozen=True)
class Condition:
    column: str
    op: str
    values: tuple[str, ...] = ()

    def matches(self, row: Mapping[str, str]) -> bool:
        raw = row.get(self.column)
        raw = raw.strip() if raw is not None else ""
        if self.op == "missing":
            return raw == ""
        if self.op == "present":
            return raw != ""
        if raw == "":
            return False
        if self.op == "in":
            return raw.upper() in self.values
        if self.op == "not in":
            return raw.upper() not in self.values
        # numeric comparisons
        try:
            left = float(raw)
            right = float(self.values[0])
        except ValueError:
            if self.op == "==":
                return raw.upper() == self.values[0]
            if self.op == "!=":
                return raw.upper() != self.values[0]
            return False
        return {
            "<": left < right,
            "<=": left <= right,
            ">": left > right,
            ">=": left >= right,
            "==": left == right,
            "!=": left != right,
        }[self.op]


@dataclass(frozen=True)
class DeriveRule:
    result: str
    conditions: tuple[Condition, ...]

    def matches(self, row: Mapping[str, str]) -> bool:
        return all(cond.matches(row) for cond in self.conditions)


_COND_RX = re.compile(
    r"^(?P<col>\S+)\s+(?:(?P<setop>not\s+in|in)\s+(?P<set>\S+)"
    r"|(?P<cmp><=|>=|==|!=|<|>)\s*(?P<val>\S+)"
    r"|(?P<nullop>missing|present))$"
)


def _parse_condition(text: str) -> Condition:
    m = _COND_RX.match(text.strip())
    if not m:
        raise ConfigError(f"cannot parse derive condition: {text!r}")
    col = m.group("col")
    if m.group("setop"):
        op = "not in" if m.group("setop").startswith("not") else "in"
        values = tuple(v.strip().upper() for v in m.group("set").split("|") if v.strip())
        return Condition(col, op, values)
    if m.group("cmp"):
        return Condition(col, m.group("cmp"), (m.group("val").upper(),))
    return Condition(col, m.group("nullop"))


def _parse_rule(text: str) -> DeriveRule:
    if " when " not in text:
        raise ConfigError(f"derive rule needs '<result> when <conditions>': {text!r}")
    result, _, conds = text.partition(" when ")
    conditions = tuple(_parse_condition(c) for c in conds.split(" and "))
    return DeriveRule(result.strip(), conditions)


@dataclass
class MappingConfig:
    """Parsed mapping config for one source."""

    name: str
    delimiter: str = ","
    vmt_scale: float = 1.0
    columns: dict[str, Binding] = field(default_factory=dict)
    dictionaries: dict[str, dict[str, str]] = field(default_factory=dict)
    derives: dict[str, tuple[DeriveRule, ...]] = field(default_factory=dict)
    source_path: Optional[str] = None

    @classmethod
    def load(cls, path: str | Path) -> "MappingConfig":
        parser = ConfigParser(interpolation=None)
        parser.optionxform = str  # source column names are case-sensitive
        read = parser.read(path, encoding="utf-8")
        if not read:
            raise ConfigError(f"mapping config not found: {path}")
        if not parser.has_section("source"):
            raise ConfigError(f"{path}: missing [source] section")
        name = parser.get("source", "name", fallback=None)
        if not name:
            raise ConfigError(f"{path}: [source] needs a name")
        delimiter = parser.get("source", "delimiter", fallback=",")
        if delimiter == "tab":
            delimiter = "\t"
        if delimiter not in (",", "\t"):
            raise ConfigError(f"{path}: delimiter must be ',' or tab")
        vmt_scale = parser.getfloat("source", "vmt_scale", fallback=1.0)

        columns: dict[str, Binding] = {}
        if parser.has_section("columns"):
            for fname, raw in parser.items("columns"):
                raw = raw.strip()
                if raw.startswith("const:"):
                    columns[fname] = Const(raw[len("const:"):].strip())
                elif raw:
                    columns[fname] = Column(raw)

        dictionaries: dict[str, dict[str, str]] = {}
        derives: dict[str, tuple[DeriveRule, ...]] = {}
        for section in parser.sections():
            if section.startswith("dictionary."):
                fname = section[len("dictionary."):]
                mapping = {
                    key.strip().upper() if key != FALLBACK_KEY else FALLBACK_KEY: val.strip()
                    for key, val in parser.items(section)
                }
                if FALLBACK_KEY not in mapping:
                    raise ConfigError(
                        f"{path}: [dictionary.{fname}] needs an explicit '*' fallback"
                    )
                dictionaries[fname] = mapping
            elif section.startswith("derive."):
                fname = section[len("derive."):]
                rules = [
                    _parse_rule(parser.get(section, key))
                    for key in sorted(
                        parser.options(section),
                        key=lambda k: [
                            (0, int(p)) if p.isdigit() else (1, p) for p in k.split(".")
                        ],
                    )
                ]
                derives[fname] = tuple(rules)
        return cls(
            name=name,
            delimiter=delimiter,
            vmt_scale=vmt_scale,
            columns=columns,
            dictionaries=dictionaries,
            derives=derives,
            source_path=str(path),
        )

    def validate(self, required: tuple[str, ...]) -> None:
        """Every required canonical field needs a binding or constant."""
        missing = [f for f in required if f not in self.columns]
        if missing:
            raise ConfigError(
                f"mapping {self.name!r}: required fields unbound: {', '.join(missing)}"
            )

    def bound_fields(self, prefix: str = "") -> list[str]:
        if prefix:
            return [f for f in self.columns if f.startswith(prefix)]
        return [f for f in self.columns if "." not in f]

    def resolve(
        self, fname: str, row: Mapping[str, str]
    ) -> tuple[Optional[str], bool]:
        """Resolve one canonical field from a raw row.

        Returns (value, was_unknown): the canonical token (None when the
        field is absent for this row) and whether a dictionary fallback
        or unmatched derive degraded it to Unknown.
        """
        for rule in self.derives.get(fname, ()):
            if rule.matches(row):
                return rule.result, False

        binding = self.columns.get(fname)
        if binding is None:
            return None, False
        if isinstance(binding, Const):
            raw = binding.value
        else:
            raw = row.get(binding.name)
            raw = raw.strip() if raw is not None else ""
        if raw == "":
            return None, False

        dictionary = self.dictionaries.get(fname)
        if dictionary is not None:
            mapped = dictionary.get(raw.upper())
            if mapped is None:
                return dictionary[FALLBACK_KEY], True
            return mapped, False
        return raw, False


# --- canonical token parsers -------------------------------------------------

_ENUM_BY_FIELD = {
    "worst_injury": {m.value: m for m in KabcoLevel} | {"Unknown": KabcoLevel.UNKNOWN},
    "junction_relation": {m.value: m for m in JunctionRelation},
    "manner_of_collision": {m.value: m for m in MannerOfCollision},
    "unit.vehicle_class": {m.value: m for m in VehicleClass},
    "functional_class": {m.value: m for m in FunctionalClass},
    "person.injury": {m.value: m for m in KabcoLevel} | {"Unknown": KabcoLevel.UNKNOWN},
}


def parse_enum_token(fname: str, token: str):
    """Map a canonical token to its enum member; unrecognized tokens
    degrade to the field's Unknown member when it has one."""
    table = _ENUM_BY_FIELD[fname]
    member = table.get(token)
    if member is not None:
        return member
    unknown = table.get(UNKNOWN_TOKEN)
    if unknown is not None:
        return unknown
    raise ConfigError(f"field {fname}: unrecognized canonical token {token!r}")


def parse_bool_token(token: str) -> Optional[bool]:
    """'true'/'false'/'unknown' (case-insensitive) -> bool or None."""
    lowered = token.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    return None
