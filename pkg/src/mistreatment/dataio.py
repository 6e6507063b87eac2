"""CSV ingestion, schema configs and the repeated train/test split plan.

A schema config is a JSON object::

    {
      "label": {"column": "two_year_recid", "positive": "1"},
      "sensitive": {"column": "race", "z0": "African-American"},
      "features": [{"column": "age_cat", "kind": "categorical"},
                   {"column": "priors_count", "kind": "numeric"}],
      "include_sensitive_as_feature": false,
      "filters": [{"column": "race", "in": ["African-American", "Caucasian"]},
                  {"column": "days_b_screening_arrest", "min": -30, "max": 30}]
    }

With ``include_sensitive_as_feature`` set, z is appended as a numeric feature
unless the sensitive column is also listed under ``features``, in which case it
is encoded like any other feature of its kind.

Filters run before any other validation, so rows they drop never raise.
Label and sensitive values are compared as stripped strings. A label other
than ``positive`` maps to -1 unless ``negative`` is given; likewise a sensitive
value other than ``z0`` maps to z=1 unless ``z1`` is given. When the second
value is given, anything outside the pair is an error. Without it, a label
column holding more than two values is still rejected.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset

KINDS = ("numeric", "categorical")


class SchemaError(ValueError):
    """Malformed schema or data that does not fit the schema."""


@dataclass(frozen=True)
class FeatureColumn:
    column: str
    kind: str = "numeric"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"feature {self.column!r}: kind must be one of {KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class RowFilter:
    column: str
    isin: tuple[str, ...] | None = None
    not_in: tuple[str, ...] | None = None
    min: float | None = None
    max: float | None = None

    def keep(self, value: str) -> bool:
        v = value.strip()
        if self.isin is not None and v not in self.isin:
            return False
        if self.not_in is not None and v in self.not_in:
            return False
        if self.min is not None or self.max is not None:
            try:
                x = float(v)
            except ValueError:
                return False
            if math.isnan(x):
                return False
            if self.min is not None and x < self.min:
                return False
            if self.max is not None and x > self.max:
                return False
        return True


@dataclass(frozen=True)
class SchemaConfig:
    label_column: str
    positive_value: str
    sensitive_column: str
    z0_value: str
    features: tuple[FeatureColumn, ...]
    include_sensitive_as_feature: bool = False
    z1_value: str | None = None
    negative_value: str | None = None
    filters: tuple[RowFilter, ...] = field(default=())

    def __post_init__(self):
        if not self.features and not self.include_sensitive_as_feature:
            raise SchemaError("schema needs at least one feature column")
        names = [f.column for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature columns must be distinct")
        if self.label_column in names:
            raise SchemaError(f"label column {self.label_column!r} listed as a feature")
        if self.sensitive_column in names and not self.include_sensitive_as_feature:
            raise SchemaError(
                f"sensitive column {self.sensitive_column!r} listed as a feature; "
                "set include_sensitive_as_feature instead"
            )

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaConfig":
        try:
            label = d["label"]
            sens = d["sensitive"]
            feats = tuple(
                FeatureColumn(f) if isinstance(f, str) else FeatureColumn(f["column"], f.get("kind", "numeric"))
                for f in d["features"]
            )
            filters = tuple(
                RowFilter(
                    f["column"],
                    tuple(map(str, f["in"])) if "in" in f else None,
                    tuple(map(str, f["not_in"])) if "not_in" in f else None,
                    f.get("min"),
                    f.get("max"),
                )
                for f in d.get("filters", [])
            )
            return cls(
                label_column=label["column"],
                positive_value=str(label["positive"]),
                negative_value=None if label.get("negative") is None else str(label["negative"]),
                sensitive_column=sens["column"],
                z0_value=str(sens["z0"]),
                z1_value=None if sens.get("z1") is None else str(sens["z1"]),
                features=feats,
                include_sensitive_as_feature=bool(d.get("include_sensitive_as_feature", False)),
                filters=filters,
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: missing or invalid {exc}") from None

    @classmethod
    def load(cls, path) -> "SchemaConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise SchemaError(f"{path}: schema must be a JSON object")
        return cls.from_dict(raw)

    def with_sensitive_feature(self, flag: bool) -> "SchemaConfig":
        d = dict(self.__dict__)
        d["include_sensitive_as_feature"] = flag
        return SchemaConfig(**d)


def default_schema(columns) -> SchemaConfig:
    """Schema for files written by :func:`write_csv`: numeric features, ``y`` and ``z``."""
    feats = tuple(FeatureColumn(c) for c in columns if c not in ("y", "z"))
    return SchemaConfig("y", "1", "z", "0", feats, z1_value="1", negative_value="-1")


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            # reader.line_num is the physical line of the row just read
            rows.append((reader.line_num, row))
    return header, rows


def load_csv(path, schema: SchemaConfig | None = None) -> Dataset:
    header, rows = _read_rows(path)
    if schema is None:
        schema = default_schema(header)
    col = {name: j for j, name in enumerate(header)}
    needed = [schema.label_column, schema.sensitive_column] + [f.column for f in schema.features]
    needed += [f.column for f in schema.filters]
    missing = [c for c in dict.fromkeys(needed) if c not in col]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}")

    kept = []
    for line, row in rows:
        if len(row) != len(header):
            raise SchemaError(f"{path}, line {line}: expected {len(header)} fields, got {len(row)}")
        if all(f.keep(row[col[f.column]]) for f in schema.filters):
            kept.append((line, row))
    if not kept:
        raise SchemaError(f"{path}: no rows left after filtering")

    labels, sens = [], []
    for line, row in kept:
        lv = row[col[schema.label_column]].strip()
        if lv == schema.positive_value:
            labels.append(1)
        elif schema.negative_value is None or lv == schema.negative_value:
            labels.append(-1)
        else:
            raise SchemaError(f"{path}, line {line}: unmapped label value {lv!r} in column {schema.label_column!r}")
        sv = row[col[schema.sensitive_column]].strip()
        if sv == schema.z0_value:
            sens.append(0)
        elif schema.z1_value is None or sv == schema.z1_value:
            sens.append(1)
        else:
            raise SchemaError(
                f"{path}, line {line}: unmapped sensitive value {sv!r} in column {schema.sensitive_column!r}"
            )
    _check_binary_labels(path, schema, kept, col)

    blocks, names = [], []
    for feat in schema.features:
        cells = [(line, row[col[feat.column]].strip()) for line, row in kept]
        if feat.kind == "numeric":
            vals = []
            for line, cell in cells:
                try:
                    v = float(cell)
                except ValueError:
                    raise SchemaError(
                        f"{path}, line {line}: non-numeric value {cell!r} in column {feat.column!r}"
                    ) from None
                if not math.isfinite(v):
                    raise SchemaError(f"{path}, line {line}: non-finite value in column {feat.column!r}")
                vals.append(v)
            blocks.append(np.array(vals).reshape(-1, 1))
            names.append(feat.column)
        else:
            values = [c for _, c in cells]
            cats = sorted(set(values))
            index = {c: k for k, c in enumerate(cats)}
            onehot = np.zeros((len(values), len(cats)))
            onehot[np.arange(len(values)), [index[v] for v in values]] = 1.0
            blocks.append(onehot)
            names.extend(f"{feat.column}={c}" for c in cats)
    z = np.array(sens)
    listed = schema.sensitive_column in [f.column for f in schema.features]
    if schema.include_sensitive_as_feature and not listed:
        blocks.append(z.reshape(-1, 1).astype(float))
        names.append(schema.sensitive_column)
    X = np.hstack(blocks)
    return Dataset(X, np.array(labels), z, tuple(names))


def _check_binary_labels(path, schema, kept, col):
    seen = {}
    for line, row in kept:
        seen.setdefault(row[col[schema.label_column]].strip(), line)
    negatives = [v for v in seen if v != schema.positive_value]
    if len(negatives) > 1:
        # the first negative value seen is taken as the negative class
        v = negatives[1]
        raise SchemaError(
            f"{path}, line {seen[v]}: unmapped label value {v!r} in column {schema.label_column!r} "
            f"(expected two values, saw {list(seen)})"
        )


def write_csv(data: Dataset, path) -> None:
    """Write features, ``y`` and ``z`` with full float precision."""
    names = list(data.feature_names)
    if "y" in names or "z" in names:
        raise ValueError("feature names 'y' and 'z' are reserved")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["y", "z"])
        for x, y, z in zip(data.features, data.labels, data.sensitive):
            w.writerow([repr(float(v)) for v in x] + [int(y), int(z)])


@dataclass(frozen=True)
class SplitPlan:
    repetitions: int = 5
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def make_splits(data_or_n, plan: SplitPlan = SplitPlan()) -> list[tuple[np.ndarray, np.ndarray]]:
    """One (train, test) index pair per repetition, seeded with ``plan.seed + r``."""
    n = data_or_n if isinstance(data_or_n, (int, np.integer)) else data_or_n.n
    if n < 2:
        raise ValueError("need at least two rows to split")
    cut = int(math.floor(n * plan.train_fraction))
    if cut == 0 or cut == n:
        raise ValueError(f"train fraction {plan.train_fraction} leaves an empty side for N={n}")
    out = []
    for r in range(plan.repetitions):
        perm = np.random.default_rng(plan.seed + r).permutation(n)
        out.append((np.sort(perm[:cut]), np.sort(perm[cut:])))
    return out


FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    p = FIXTURES / name
    if not p.exists():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return p
