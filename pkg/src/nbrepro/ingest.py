"""Loading daily district case counts and the weekly aggregates built on them."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .negbin import ThinningRate

DateLike = dt.date | int | str


class PanelError(ValueError):
    """Base class for problems with a case-count input."""


class PanelParseError(PanelError):
    def __init__(self, path: str | Path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class DuplicateRowError(PanelError):
    pass


class NegativeCountError(PanelError):
    pass


class DateGapError(PanelError):
    pass


class DateRangeError(IndexError):
    """A date, or a lag it requires, falls outside the panel."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CasePanel:
    """Daily reported cases, one column per district.

    ``counts[i, j]`` is the number of cases first reported on ``dates[i]`` in
    ``districts[j]``. Dates are contiguous and strictly increasing.
    """

    dates: tuple[dt.date, ...]
    districts: tuple[str, ...]
    counts: NDArray[np.int64]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2 or counts.shape != (len(self.dates), len(self.districts)):
            raise PanelError(
                f"counts shape {counts.shape} does not match "
                f"{len(self.dates)} dates x {len(self.districts)} districts"
            )
        if np.any(counts < 0):
            raise NegativeCountError("case counts must be non-negative")
        for a, b in zip(self.dates, self.dates[1:]):
            if (b - a).days != 1:
                raise DateGapError(f"dates not contiguous between {a} and {b}")
        if len(set(self.districts)) != len(self.districts):
            raise DuplicateRowError("district identifiers must be unique")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "districts", tuple(self.districts))
        object.__setattr__(self, "_index", {d: i for i, d in enumerate(self.dates)})

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_districts(self) -> int:
        return len(self.districts)

    @property
    def national(self) -> NDArray[np.int64]:
        return self.counts.sum(axis=1)

    def index_of(self, t: DateLike) -> int:
        """Row index of ``t`` (a date, ISO string, or an integer row index)."""
        if isinstance(t, (int, np.integer)) and not isinstance(t, bool):
            i = int(t)
            if not 0 <= i < self.n_dates:
                raise DateRangeError(f"row index {i} outside 0..{self.n_dates - 1}")
            return i
        if isinstance(t, str):
            t = dt.date.fromisoformat(t)
        try:
            return self._index[t]
        except KeyError:
            raise DateRangeError(
                f"{t} outside panel range {self.dates[0]}..{self.dates[-1]}"
            ) from None

    def column_of(self, district: str) -> int:
        try:
            return self.districts.index(district)
        except ValueError:
            raise KeyError(f"unknown district {district!r}") from None

    def select_districts(
        self, include: Iterable[str] | None = None, exclude: Iterable[str] | None = None
    ) -> "CasePanel":
        keep = list(self.districts) if include is None else [d for d in self.districts if d in set(include)]
        if exclude is not None:
            drop = set(exclude)
            keep = [d for d in keep if d not in drop]
        cols = [self.column_of(d) for d in keep]
        return CasePanel(self.dates, tuple(keep), self.counts[:, cols])


@dataclass(frozen=True)
class PipelineConfig:
    """Epidemiological constants and selection settings.

    ``tau`` is the infection-to-report delay, ``gen_time`` the generation time,
    ``window`` the length of the weekly sums and of the moment smoothing.
    """

    tau: int = 7
    gen_time: int = 4
    window: int = 7
    p0_grid: tuple[float, ...] = (0.2, 0.35, 0.5)
    gof_band: tuple[float, float] = (15.0, 25.0)
    gof_min_districts: int = 75
    fill_missing: bool = False
    smooth_moments: bool = True
    include: tuple[str, ...] | None = None
    exclude: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.tau < 0:
            raise ConfigError("tau must be >= 0")
        if self.gen_time < 1:
            raise ConfigError("gen_time must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        lo, hi = self.gof_band
        if not lo < hi:
            raise ConfigError("gof_band lower bound must be below the upper bound")
        if self.gof_min_districts < 2:
            raise ConfigError("gof_min_districts must be >= 2")
        for p0 in self.p0_grid:
            ThinningRate(p0)
        object.__setattr__(self, "p0_grid", tuple(float(x) for x in self.p0_grid))
        object.__setattr__(self, "gof_band", (float(lo), float(hi)))

    @property
    def effective_lag(self) -> int:
        """Days between a report date and the infection date its estimate refers to."""
        return self.tau + self.window

    def as_dict(self) -> dict:
        return {
            "tau": self.tau,
            "gen_time": self.gen_time,
            "window": self.window,
            "p0_grid": list(self.p0_grid),
            "gof_band": list(self.gof_band),
            "gof_min_districts": self.gof_min_districts,
            "fill_missing": self.fill_missing,
            "smooth_moments": self.smooth_moments,
            "include": None if self.include is None else list(self.include),
            "exclude": None if self.exclude is None else list(self.exclude),
        }


def read_kv_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def parse_band(s: str) -> tuple[float, float]:
    sep = ":" if ":" in s else ","
    parts = [x.strip() for x in s.strip("[]() ").split(sep)]
    if len(parts) != 2:
        raise ConfigError(f"band must look like 'lo:hi', got {s!r}")
    return float(parts[0]), float(parts[1])


def parse_float_list(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.strip("[]() ").split(",") if x.strip())


_CONFIG_PARSERS = {
    "tau": int,
    "gen_time": int,
    "window": int,
    "p0_grid": parse_float_list,
    "gof_band": parse_band,
    "gof_min_districts": int,
    "fill_missing": _parse_bool,
    "smooth_moments": _parse_bool,
    "include": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
    "exclude": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
}


def config_from_mapping(values: dict[str, str], base: PipelineConfig | None = None) -> PipelineConfig:
    kwargs = {} if base is None else base.as_dict()
    for key, raw in values.items():
        if key not in _CONFIG_PARSERS:
            continue
        try:
            kwargs[key] = _CONFIG_PARSERS[key](raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    for key in ("p0_grid", "gof_band", "include", "exclude"):
        if kwargs.get(key) is not None:
            kwargs[key] = tuple(kwargs[key])
    return PipelineConfig(**kwargs)


def load_config(path: str | Path) -> PipelineConfig:
    values = read_kv_file(path)
    unknown = set(values) - set(_CONFIG_PARSERS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return config_from_mapping(values)


def load_panel(path: str | Path, config: PipelineConfig | None = None) -> CasePanel:
    """Read a ``date,district_id,cases`` file into a validated panel.

    Districts are sorted by identifier so the panel does not depend on row order.
    A date range with holes, or a (date, district) cell absent from the file,
    is an error unless ``config.fill_missing`` is set, in which case it counts
    as zero.
    """
    config = config or PipelineConfig()
    cells: dict[tuple[dt.date, str], int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise PanelParseError(path, 1, "empty file")
        names = [h.strip().lower() for h in header]
        try:
            i_date, i_dist, i_cases = (names.index(c) for c in ("date", "district_id", "cases"))
        except ValueError:
            raise PanelParseError(path, 1, f"header must contain date,district_id,cases; got {header}") from None
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise PanelParseError(path, lineno, f"expected {len(names)} fields, got {len(row)}")
            try:
                day = dt.date.fromisoformat(row[i_date].strip())
            except ValueError:
                raise PanelParseError(path, lineno, f"bad date {row[i_date]!r}") from None
            district = row[i_dist].strip()
            if not district:
                raise PanelParseError(path, lineno, "empty district_id")
            try:
                cases = int(row[i_cases].strip())
            except ValueError:
                raise PanelParseError(path, lineno, f"bad case count {row[i_cases]!r}") from None
            if cases < 0:
                raise NegativeCountError(f"{path}:{lineno}: negative case count {cases}")
            key = (day, district)
            if key in cells:
                raise DuplicateRowError(f"{path}:{lineno}: duplicate row for date {day} district {district}")
            cells[key] = cases
    if not cells:
        raise PanelParseError(path, 2, "no data rows")

    days = sorted({d for d, _ in cells})
    districts = sorted({k for _, k in cells})
    first, last = days[0], days[-1]
    all_days = [first + dt.timedelta(days=i) for i in range((last - first).days + 1)]
    if len(all_days) != len(days) and not config.fill_missing:
        present = set(days)
        missing = next(d for d in all_days if d not in present)
        raise DateGapError(f"{path}: no rows for {missing} (set fill_missing to treat gaps as zero)")
    row_of = {d: i for i, d in enumerate(all_days)}
    col_of = {k: j for j, k in enumerate(districts)}
    counts = np.zeros((len(all_days), len(districts)), dtype=np.int64)
    for (d, k), c in cells.items():
        counts[row_of[d], col_of[k]] = c
    n_expected = len(all_days) * len(districts)
    if len(cells) != n_expected and not config.fill_missing:
        have = np.zeros_like(counts, dtype=bool)
        for d, k in cells:
            have[row_of[d], col_of[k]] = True
        i, j = map(int, np.argwhere(~have)[0])
        raise DateGapError(
            f"{path}: no row for date {all_days[i]} district {districts[j]} "
            "(set fill_missing to treat gaps as zero)"
        )
    panel = CasePanel(tuple(all_days), tuple(districts), counts)
    if config.include is not None or config.exclude is not None:
        panel = panel.select_districts(config.include, config.exclude)
    return panel


def write_panel(panel: CasePanel, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "district_id", "cases"])
        for i, day in enumerate(panel.dates):
            iso = day.isoformat()
            for j, k in enumerate(panel.districts):
                w.writerow([iso, k, int(panel.counts[i, j])])


def rolling_sums(counts: ArrayLike, window: int) -> NDArray[np.float64]:
    """Left-sided rolling sums along axis 0; the first ``window - 1`` rows are NaN."""
    x = np.asarray(counts, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    if x.shape[0] < window:
        return out
    c = np.cumsum(x, axis=0)
    out[window - 1] = c[window - 1]
    out[window:] = c[window:] - c[:-window]
    return out


def weekly_sum(panel: CasePanel, t: DateLike, district: str | None = None, window: int = 7) -> int:
    """Sum of reported cases over ``[t - window + 1, t]``, nationally or for one district."""
    i = panel.index_of(t)
    if i - window + 1 < 0:
        raise DateRangeError(f"{panel.dates[i]}: needs {window - 1} earlier days of data")
    block = panel.counts[i - window + 1 : i + 1]
    if district is None:
        return int(block.sum())
    return int(block[:, panel.column_of(district)].sum())


def moving_average(series: ArrayLike, window: int) -> NDArray[np.float64]:
    """Left-sided moving average; NaN for the first ``window - 1`` entries and
    wherever the window contains a NaN."""
    if window < 1:
        raise ConfigError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    for i in range(window - 1, x.shape[0]):
        out[i] = x[i - window + 1 : i + 1].mean()
    return out


@dataclass(frozen=True)
class GofSample:
    t: dt.date
    districts: tuple[str, ...]
    values: NDArray[np.int64]

    @property
    def size(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class GofRejection:
    """A date whose band selection yields too few districts."""

    t: dt.date
    count: int


def select_gof_districts(panel: CasePanel, t: DateLike, config: PipelineConfig) -> GofSample | GofRejection:
    """Districts whose mean daily count over the lagged week lies in ``gof_band``.

    The lagged week is ``[t - gen_time - window + 1, t - gen_time]``; the
    returned values are the current weekly sums ending at ``t``.
    """
    i = panel.index_of(t)
    g, w = config.gen_time, config.window
    if i - g - w + 1 < 0:
        raise DateRangeError(f"{panel.dates[i]}: needs {g + w - 1} earlier days of data")
    lagged = panel.counts[i - g - w + 1 : i - g + 1].sum(axis=0) / w
    lo, hi = config.gof_band
    mask = (lagged >= lo) & (lagged <= hi)
    n = int(mask.sum())
    if n < config.gof_min_districts:
        return GofRejection(panel.dates[i], n)
    current = panel.counts[i - w + 1 : i + 1].sum(axis=0)
    names = tuple(k for k, m in zip(panel.districts, mask) if m)
    return GofSample(panel.dates[i], names, current[mask].astype(np.int64))

