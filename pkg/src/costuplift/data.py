"""Datasets: containers, CSV I/O, splitting, scaling, synthetic generation
and the two public-dataset recipes (US Census 1990, Covertype)."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    EvaluationError,
    ParseError,
    RecipeError,
    SchemaError,
    ShapeError,
    ValidationError,
)

logger = logging.getLogger(__name__)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ExperimentDataset:
    """Randomized-experiment rows: features, binary treatment, gain and cost.

    Arrays are copied on construction and made read-only.
    """

    features: np.ndarray
    treatment: np.ndarray
    gain: np.ndarray
    cost: np.ndarray
    ids: Optional[np.ndarray] = None
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ShapeError(f"features must be 2-D, got {X.ndim}-D")
        n = X.shape[0]
        t = np.asarray(self.treatment)
        for name, arr in (("treatment", t), ("gain", self.gain), ("cost", self.cost)):
            if np.shape(arr) != (n,):
                raise ShapeError(f"{name} has shape {np.shape(arr)}, expected ({n},)")
        bad = ~np.isin(t, (0, 1))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise ValidationError(f"treatment value {t[row]!r} at row {row + 1} is not 0 or 1")
        gain = np.asarray(self.gain, dtype=np.float64)
        cost = np.asarray(self.cost, dtype=np.float64)
        for name, arr in (("features", X), ("gain", gain), ("cost", cost)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite values in {name}")
        ids = np.arange(n) if self.ids is None else np.asarray(self.ids)
        if ids.shape != (n,):
            raise ShapeError(f"ids has shape {ids.shape}, expected ({n},)")
        names = self.feature_names
        if names is None:
            names = tuple(f"f{j}" for j in range(X.shape[1]))
        names = tuple(str(c) for c in names)
        if len(names) != X.shape[1]:
            raise ShapeError(f"{len(names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "features", _frozen(X, np.float64))
        object.__setattr__(self, "treatment", _frozen(t, np.int8))
        object.__setattr__(self, "gain", _frozen(gain, np.float64))
        object.__setattr__(self, "cost", _frozen(cost, np.float64))
        object.__setattr__(self, "ids", _frozen(ids, ids.dtype))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def treated_fraction(self) -> float:
        return float(self.treatment.mean()) if self.n else float("nan")

    def subset(self, rows) -> "ExperimentDataset":
        rows = np.asarray(rows)
        return ExperimentDataset(
            self.features[rows], self.treatment[rows], self.gain[rows], self.cost[rows],
            ids=self.ids[rows], feature_names=self.feature_names,
        )

    def with_features(self, features) -> "ExperimentDataset":
        return ExperimentDataset(
            features, self.treatment, self.gain, self.cost,
            ids=self.ids, feature_names=self.feature_names,
        )

    def with_outcome(self, gain) -> "ExperimentDataset":
        """Copy with the gain column replaced (cost kept)."""
        return ExperimentDataset(
            self.features, self.treatment, gain, self.cost,
            ids=self.ids, feature_names=self.feature_names,
        )

    def require_both_groups(self, what="this operation"):
        n_t = int(self.treatment.sum())
        if n_t == 0 or n_t == self.n:
            raise EvaluationError(
                f"{what} needs treated and control rows; got {n_t} treated of {self.n}"
            )

    def equals(self, other: "ExperimentDataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.treatment, other.treatment)
            and np.array_equal(self.gain, other.gain)
            and np.array_equal(self.cost, other.cost)
            and np.array_equal(self.ids.astype(str), other.ids.astype(str))
        )


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

@dataclass
class Schema:
    """Column mapping for CSV ingestion.

    Features come from ``features`` when given, else every column starting
    with ``feature_prefix``, else every column not claimed by another role.
    """

    treatment: str = "treatment"
    gain: str = "gain"
    cost: str = "cost"
    id: Optional[str] = None
    features: Optional[list] = None
    feature_prefix: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "Schema":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def resolve(self, header: Sequence[str]) -> list:
        roles = [self.treatment, self.gain, self.cost] + ([self.id] if self.id else [])
        for col in roles:
            if col not in header:
                raise SchemaError(f"column {col!r} not found in header")
        if self.features is not None:
            missing = [c for c in self.features if c not in header]
            if missing:
                raise SchemaError(f"column {missing[0]!r} not found in header")
            return list(self.features)
        if self.feature_prefix is not None:
            cols = [c for c in header if c.startswith(self.feature_prefix) and c not in roles]
        else:
            cols = [c for c in header if c not in roles]
        if not cols:
            raise SchemaError("schema selects no feature columns")
        return cols


def _cell(value, row, col, is_id=False):
    if is_id:
        return value
    try:
        x = float(value)
    except ValueError:
        raise ParseError(f"non-numeric value {value!r} in column {col!r} at row {row}") from None
    if not math.isfinite(x):
        raise ParseError(f"non-finite value {value!r} in column {col!r} at row {row}")
    return x


def load_csv(path, schema: Optional[Schema] = None) -> ExperimentDataset:
    """Read a header CSV into a validated dataset; row order is preserved.

    Row numbers in error messages count data rows from 1 (header excluded).
    """
    schema = schema or Schema()
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty, no header row") from None
        header = [h.strip() for h in header]
        feat_cols = schema.resolve(header)
        pos = {c: i for i, c in enumerate(header)}
        fidx = [pos[c] for c in feat_cols]
        X, T, G, C, ids = [], [], [], [], []
        for row_no, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"row {row_no} has {len(rec)} fields, header has {len(header)}")
            X.append([_cell(rec[i], row_no, header[i]) for i in fidx])
            t = _cell(rec[pos[schema.treatment]], row_no, schema.treatment)
            if t not in (0.0, 1.0):
                raise ValidationError(f"treatment value {rec[pos[schema.treatment]]!r} at row {row_no} is not 0 or 1")
            T.append(int(t))
            G.append(_cell(rec[pos[schema.gain]], row_no, schema.gain))
            C.append(_cell(rec[pos[schema.cost]], row_no, schema.cost))
            if schema.id:
                ids.append(rec[pos[schema.id]])
    X = np.array(X, dtype=np.float64).reshape(len(T), len(feat_cols))
    return ExperimentDataset(
        X, np.array(T, dtype=np.int8), np.array(G), np.array(C),
        ids=np.array(ids) if schema.id else None, feature_names=tuple(feat_cols),
    )


def write_csv(ds: ExperimentDataset, path, id_column: Optional[str] = "id") -> None:
    """Write ``ds`` so that ``load_csv`` with the matching schema reparses it exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ([id_column] if id_column else []) + list(ds.feature_names) + ["treatment", "gain", "cost"]
        w.writerow(head)
        for i in range(ds.n):
            rec = [repr(float(x)) for x in ds.features[i]]
            rec += [int(ds.treatment[i]), repr(float(ds.gain[i])), repr(float(ds.cost[i]))]
            if id_column:
                rec.insert(0, ds.ids[i])
            w.writerow(rec)


# ---------------------------------------------------------------------------
# splitting and scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    fractions: tuple = (0.6, 0.2, 0.2)
    seed: int = 0
    warning: Optional[str] = None

    def parts(self):
        return self.train, self.validation, self.test


def split_dataset(ds: ExperimentDataset, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> DatasetSplit:
    """Seeded random permutation, then contiguous train/validation/test blocks."""
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or any(f <= 0 for f in fr):
        raise ConfigError(f"split fractions must be three positive numbers, got {fractions!r}")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions sum to {sum(fr)!r}, expected 1")
    n = ds.n
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(n, int(math.floor(fr[0] * n + 0.5)))
    n_val = min(n - n_train, int(math.floor(fr[1] * n + 0.5)))
    cut = (n_train, n_train + n_val)
    train, val, test = np.split(perm, cut)
    warning = None
    if min(len(train), len(val), len(test)) == 0:
        warning = f"degenerate split sizes {(len(train), len(val), len(test))} for N={n}"
        logger.warning(warning)
    return DatasetSplit(np.sort(train), np.sort(val), np.sort(test), fr, int(seed), warning)


@dataclass
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def feature_stats(X) -> FeatureStats:
    X = np.asarray(X, dtype=float)
    return FeatureStats(X.mean(axis=0), X.std(axis=0))


def apply_stats(X, stats: FeatureStats) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[1] != stats.mean.shape[0]:
        raise ShapeError(f"stats cover {stats.mean.shape[0]} features, data has {X.shape[1]}")
    safe = np.where(stats.std > 0, stats.std, 1.0)
    return np.where(stats.std > 0, (X - stats.mean) / safe, 0.0)


def standardize(ds: ExperimentDataset, stats: Optional[FeatureStats] = None):
    """Z-score features; zero-variance columns map to 0.

    Pass the training split's ``stats`` when transforming other splits.
    """
    if stats is None:
        stats = feature_stats(ds.features)
    return ds.with_features(apply_stats(ds.features, stats)), stats


def unstandardize(X, stats: FeatureStats) -> np.ndarray:
    return np.asarray(X, dtype=float) * stats.std + stats.mean


# ---------------------------------------------------------------------------
# synthetic experiments
# ---------------------------------------------------------------------------

@dataclass
class SyntheticSpec:
    """Linear randomized experiment with known per-row effects.

    gain = gain_baseline(x) + T * gain_effect(x) + noise, likewise for cost;
    each function is ``intercept + coeffs @ x``.  With ``effect_link="exp"``
    the two effect functions are exponentiated (positive, log-linear
    effects).  Coefficient lists left as None are zeros.
    """

    n_samples: int = 10000
    n_features: int = 10
    treat_fraction: float = 0.5
    gain_baseline_coeffs: Optional[list] = None
    gain_baseline_intercept: float = 0.0
    gain_effect_coeffs: Optional[list] = None
    gain_effect_intercept: float = 0.0
    cost_baseline_coeffs: Optional[list] = None
    cost_baseline_intercept: float = 0.0
    cost_effect_coeffs: Optional[list] = None
    cost_effect_intercept: float = 0.0
    noise_std: float = 0.0
    seed: int = 0
    effect_link: str = "linear"

    def coeffs(self, name) -> np.ndarray:
        c = getattr(self, name)
        return np.zeros(self.n_features) if c is None else np.asarray(c, dtype=float)

    def validate(self):
        if not isinstance(self.n_samples, (int, np.integer)) or self.n_samples < 1:
            raise ValidationError(f"n_samples must be a positive integer, got {self.n_samples!r}")
        if not isinstance(self.n_features, (int, np.integer)) or self.n_features < 1:
            raise ValidationError(f"n_features must be a positive integer, got {self.n_features!r}")
        if not 0.0 < self.treat_fraction < 1.0:
            raise ValidationError(f"treat_fraction must lie in (0, 1), got {self.treat_fraction!r}")
        if not (self.noise_std >= 0 and math.isfinite(self.noise_std)):
            raise ValidationError(f"noise_std must be finite and nonnegative, got {self.noise_std!r}")
        for name in ("gain_baseline_coeffs", "gain_effect_coeffs", "cost_baseline_coeffs", "cost_effect_coeffs"):
            c = self.coeffs(name)
            if c.shape != (self.n_features,) or not np.all(np.isfinite(c)):
                raise ValidationError(f"{name} must be {self.n_features} finite numbers")
        if self.effect_link not in ("linear", "exp"):
            raise ValidationError(f"effect_link must be 'linear' or 'exp', got {self.effect_link!r}")
        if not isinstance(self.seed, (int, np.integer)):
            raise ValidationError(f"seed must be an integer, got {self.seed!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ValidationError(f"invalid synthetic spec: {exc}") from None


def gen_synthetic(spec: SyntheticSpec):
    """Draw a dataset from ``spec``.

    Returns ``(dataset, tau_gain, tau_cost)`` where the last two are the true
    per-row effects.  Identical specs give bit-identical output.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, d = spec.n_samples, spec.n_features
    X = rng.standard_normal((n, d))
    T = (rng.random(n) < spec.treat_fraction).astype(np.int8)
    noise = rng.standard_normal((2, n)) * spec.noise_std
    tau_r = spec.gain_effect_intercept + X @ spec.coeffs("gain_effect_coeffs")
    tau_c = spec.cost_effect_intercept + X @ spec.coeffs("cost_effect_coeffs")
    base_r = spec.gain_baseline_intercept + X @ spec.coeffs("gain_baseline_coeffs")
    base_c = spec.cost_baseline_intercept + X @ spec.coeffs("cost_baseline_coeffs")
    if spec.effect_link == "exp":
        tau_r, tau_c = np.exp(tau_r), np.exp(tau_c)
    gain = base_r + T * tau_r + noise[0]
    cost = base_c + T * tau_c + noise[1]
    ds = ExperimentDataset(X, T, gain, cost)
    return ds, tau_r, tau_c


# ---------------------------------------------------------------------------
# public-dataset recipes
# ---------------------------------------------------------------------------

USCENSUS_REFERENCE_ROWS = 225814
USCENSUS_REFERENCE_DIM = 46
COVTYPE_REFERENCE_ROWS = 247424
COVTYPE_REFERENCE_DIM = 51

# Income, marital, age and ancestry columns, plus hour/earning/birthplace
# fields that duplicate the treatment, the gain or the filters.
USCENSUS_EXCLUDE = (
    "caseid", "dAge", "dAncstry1", "dAncstry2", "iMarital",
    "dIncome2", "dIncome3", "dIncome4", "dIncome5", "dIncome6", "dIncome7", "dIncome8",
    "dHour89", "dRpincome", "dRearning", "dPoverty", "dPOB", "iRPOB", "iImmigr", "iCitizen",
)

COVTYPE_COLUMNS = (
    ["Elevation", "Aspect", "Slope", "Horizontal_Distance_To_Hydrology",
     "Vertical_Distance_To_Hydrology", "Horizontal_Distance_To_Roadways",
     "Hillshade_9am", "Hillshade_Noon", "Hillshade_3pm",
     "Horizontal_Distance_To_Fire_Points"]
    + [f"Wilderness_Area{i}" for i in range(1, 5)]
    + [f"Soil_Type{i}" for i in range(1, 41)]
    + ["Cover_Type"]
)
SPRUCE_FIR, LODGEPOLE_PINE = 1, 2


def _read_table(path, default_names=None):
    """Numeric CSV (optionally gzipped) -> (column names, float matrix)."""
    path = Path(path)
    if not path.exists():
        raise RecipeError(f"raw file not found: {path}")
    opener = open
    if path.suffix == ".gz":
        import gzip
        opener = gzip.open
    with opener(path, "rt", newline="") as fh:
        first = fh.readline()
    if not first.strip():
        raise RecipeError(f"{path} is empty")
    cells = [c.strip() for c in first.strip().split(",")]
    try:
        [float(c) for c in cells]
        has_header = False
    except ValueError:
        has_header = True
    if has_header:
        names = cells
    elif default_names is not None and len(default_names) == len(cells):
        names = list(default_names)
    else:
        raise RecipeError(f"{path} has no header and {len(cells)} columns; cannot name them")
    data = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    if data.shape[0] == 0:
        raise RecipeError(f"{path} has no data rows")
    return names, data


def _require(names, cols, recipe):
    for c in cols:
        if c not in names:
            raise RecipeError(f"{recipe}: required column {c!r} missing")


def _report(recipe, n, d, ref_n, ref_d):
    msg = f"{recipe}: {n} rows (reference {ref_n}), {d} features (reference {ref_d})"
    if n != ref_n or d != ref_d:
        logger.warning(msg + " -- counts deviate")
    else:
        logger.info(msg)
    return {"recipe": recipe, "rows": n, "features": d, "reference_rows": ref_n, "reference_features": ref_d}


def prep_us_census(raw, exclude: Sequence[str] = USCENSUS_EXCLUDE, max_fertil=2, max_age_bucket=5):
    """US Census 1990 experiment.

    Rows with ``iFertil <= max_fertil``, ``iCitizen == 0`` and
    ``dAge < max_age_bucket``.  Treated = ``dHours`` strictly above the
    filtered median.  Gain = ``dIncome1``; cost = ``-iFertil``.

    Returns ``(dataset, report)``; report carries row/feature counts next to
    the reference counts.
    """
    names, data = _read_table(raw)
    required = ["iFertil", "iCitizen", "dAge", "dHours", "dIncome1"]
    _require(names, required, "us_census")
    col = {c: data[:, i] for i, c in enumerate(names)}
    keep = (col["iFertil"] <= max_fertil) & (col["iCitizen"] == 0) & (col["dAge"] < max_age_bucket)
    if not keep.any():
        raise RecipeError("us_census: filters removed every row")
    hours = col["dHours"][keep]
    treated = (hours > np.median(hours)).astype(np.int8)
    drop = set(exclude) | {"dHours", "dIncome1", "iFertil"}
    feats = [c for c in names if c not in drop]
    X = data[keep][:, [names.index(c) for c in feats]]
    ids = col["caseid"][keep].astype(np.int64) if "caseid" in col else None
    ds = ExperimentDataset(X, treated, col["dIncome1"][keep], -1.0 * col["iFertil"][keep],
                           ids=ids, feature_names=tuple(feats))
    return ds, _report("us_census", ds.n, ds.d, USCENSUS_REFERENCE_ROWS, USCENSUS_REFERENCE_DIM)


def prep_covertype(raw):
    """Covertype experiment.

    Spruce-Fir and Lodgepole Pine rows strictly above the median elevation of
    those two classes.  Treated = hydrology distance at or below its median;
    gain = fire-point distance at or below its median; cost = 1 for
    Lodgepole Pine.  Elevation, hydrology and fire distances are not features.
    """
    names, data = _read_table(raw, default_names=COVTYPE_COLUMNS)
    _require(names, ["Elevation", "Horizontal_Distance_To_Hydrology",
                     "Horizontal_Distance_To_Fire_Points", "Cover_Type"], "covertype")
    col = {c: data[:, i] for i, c in enumerate(names)}
    two = np.isin(col["Cover_Type"], (SPRUCE_FIR, LODGEPOLE_PINE))
    if not two.any():
        raise RecipeError("covertype: no Spruce-Fir or Lodgepole Pine rows")
    elev = col["Elevation"]
    keep = two & (elev > np.median(elev[two]))
    if not keep.any():
        raise RecipeError("covertype: elevation filter removed every row")
    hydro = col["Horizontal_Distance_To_Hydrology"][keep]
    fire = col["Horizontal_Distance_To_Fire_Points"][keep]
    treated = (hydro <= np.median(hydro)).astype(np.int8)
    gain = (fire <= np.median(fire)).astype(float)
    cost = (col["Cover_Type"][keep] == LODGEPOLE_PINE).astype(float)
    drop = {"Elevation", "Horizontal_Distance_To_Hydrology", "Horizontal_Distance_To_Fire_Points", "Cover_Type"}
    feats = [c for c in names if c not in drop]
    X = data[keep][:, [names.index(c) for c in feats]]
    ds = ExperimentDataset(X, treated, gain, cost, feature_names=tuple(feats))
    return ds, _report("covertype", ds.n, ds.d, COVTYPE_REFERENCE_ROWS, COVTYPE_REFERENCE_DIM)
