import datetime as dt
import math

import numpy as np
import pytest

from nbrepro.bootstrap import (
    BootstrapConfig,
    band_from_replicates,
    bootstrap_ci,
    bootstrap_replicates,
    order_indices,
)
from nbrepro.estimators import EstimateRecord, EstimateSeries, P0Estimate, run_pipeline
from nbrepro.ingest import ConfigError, PipelineConfig
from nbrepro.negbin import NegBinParams, nb_pmf, thin_params
from nbrepro.synthetic import synthetic_panel

from conftest import make_panel


def fixed_estimates(panel, params, p0, rows):
    """An estimate series with the same known law at every listed row."""
    cfg = PipelineConfig(p0_grid=(p0,))
    recs = []
    for i in rows:
        t = panel.dates[i]
        recs.append(EstimateRecord(
            t=t, effective_date=t - dt.timedelta(days=14), r0_hat=params.mean, var_s_scaled=None,
            r0_smooth=None, var_s_smooth=None, n_districts=panel.n_districts,
            per_p0={p0: P0Estimate(p0, params)},
        ))
    return EstimateSeries(tuple(recs), cfg)


@pytest.fixture(scope="module")
def synth():
    panel = synthetic_panel(NegBinParams(0.1, 1 / 9), 0.2, n_districts=200, n_days=36, seed=77)
    return panel, run_pipeline(panel, PipelineConfig(p0_grid=(0.2, 0.5)))


def test_config_validation():
    with pytest.raises(ConfigError):
        BootstrapConfig(alpha=0.0)
    with pytest.raises(ConfigError):
        BootstrapConfig(alpha=1.0)
    with pytest.raises(ConfigError):
        BootstrapConfig(B=99)
    with pytest.raises(ConfigError):
        BootstrapConfig(mode="sideways")
    with pytest.raises(ConfigError):
        BootstrapConfig(B=100, alpha=0.01)  # lower order statistic would be index 0


def test_order_indices():
    assert order_indices(1000, 0.05) == (25, 975)
    assert order_indices(999, 0.05) == (24, 974)
    assert order_indices(100, 0.1) == (5, 95)


def test_p0_must_be_in_grid(synth):
    panel, est = synth
    with pytest.raises(ConfigError):
        bootstrap_ci(panel, est, BootstrapConfig(p0=0.35))


def test_determinism(synth, tmp_path):
    panel, est = synth
    for mode in ("fixed", "recursive"):
        cfg = BootstrapConfig(B=500, p0=0.2, mode=mode, seed=42)
        a, b = bootstrap_ci(panel, est, cfg), bootstrap_ci(panel, est, cfg)
        assert a.rows == b.rows and len(a) > 0
        a.write_csv(tmp_path / "a.csv")
        b.write_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    other = bootstrap_ci(panel, est, BootstrapConfig(B=500, p0=0.2, seed=43))
    assert other.rows != a.rows


def test_band_properties(synth):
    panel, est = synth
    cfg = BootstrapConfig(B=1000, p0=0.2, mode="recursive", seed=1)
    reps = bootstrap_replicates(panel, est, cfg)
    wide = band_from_replicates(reps, cfg, alpha=0.05)
    narrow = band_from_replicates(reps, cfg, alpha=0.10)
    assert len(wide) == len(narrow) > 0
    for w, n in zip(wide, narrow):
        assert w.lower <= w.upper
        assert w.lower <= n.lower <= n.upper <= w.upper
    # only dates with solvable parameters get an interval
    solvable = {r.t for r in est if r.params(0.2) is not None}
    assert {row.t for row in wide} == solvable


def test_fixed_mode_matches_nb_law():
    panel = make_panel(np.ones((20, 1), dtype=int))
    prm, p0 = NegBinParams(0.6, 1.0), 0.2
    est = fixed_estimates(panel, prm, p0, [15])
    cfg = BootstrapConfig(B=100_000, p0=p0, mode="fixed", seed=9)
    reps = bootstrap_replicates(panel, est, cfg)
    den = reps.denominator[0]
    assert den == 7
    s = np.rint(reps.ratios[0] * den).astype(np.int64)
    law = NegBinParams(thin_params(prm, p0).p, prm.r * den / p0)
    K = s.max() + 1
    emp = np.bincount(s, minlength=K) / s.size
    pmf = nb_pmf(law, np.arange(K))
    tv = 0.5 * (np.abs(emp - pmf).sum() + max(0.0, 1 - pmf.sum()))
    assert tv < 0.01


def test_fixed_mode_mean_identity():
    panel = make_panel(np.full((20, 3), 40))
    prm, p0 = NegBinParams(0.1, 1 / 9), 0.2
    est = fixed_estimates(panel, prm, p0, [15])
    reps = bootstrap_replicates(panel, est, BootstrapConfig(B=100_000, p0=p0, seed=3))
    x = reps.ratios[0]
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - prm.mean) < 3 * se


def test_interval_shrinks_with_counts():
    prm, p0 = NegBinParams.from_mean_dispersion(1.2, 1e4), 0.5
    widths = []
    for level in (10, 100, 1000, 10000):
        panel = make_panel(np.full((20, 1), level))
        est = fixed_estimates(panel, prm, p0, [15])
        band = bootstrap_ci(panel, est, BootstrapConfig(B=2000, p0=p0, seed=5))
        row = band.rows[0]
        assert row.lower <= 1.2 <= row.upper
        widths.append(row.upper - row.lower)
    assert all(a > b for a, b in zip(widths, widths[1:]))
    assert widths[-1] < 0.02


def test_recursive_uses_resampled_denominators():
    panel = make_panel(np.full((30, 2), 50))
    prm, p0 = NegBinParams(0.3, 0.5), 0.35
    rows = list(range(10, 30))
    est = fixed_estimates(panel, prm, p0, rows)
    fixed = bootstrap_replicates(panel, est, BootstrapConfig(B=2000, p0=p0, mode="fixed", seed=2))
    rec = bootstrap_replicates(panel, est, BootstrapConfig(B=2000, p0=p0, mode="recursive", seed=2))
    # the first generation of dates uses observed starting values, so both modes agree there
    assert np.array_equal(fixed.ratios[:4], rec.ratios[:4])
    assert not np.array_equal(fixed.ratios[4:], rec.ratios[4:])
    # the ratio keeps conditional mean r(1-p)/p whatever the resampled denominator
    for row in rec.ratios[4:]:
        assert abs(row.mean() - prm.mean) < 4 * row.std() / math.sqrt(row.size)


def test_unsolvable_dates_absent():
    panel = make_panel(np.full((20, 1), 10))
    prm, p0 = NegBinParams(0.4, 2.0), 0.2
    est = fixed_estimates(panel, prm, p0, [12, 13])
    recs = list(est.records)
    recs[0] = EstimateRecord(recs[0].t, recs[0].effective_date, 1.0, None, None, None, 1,
                             {p0: P0Estimate(p0, None, "no overdispersion")})
    band = bootstrap_ci(panel, EstimateSeries(tuple(recs), est.config), BootstrapConfig(B=200, p0=p0))
    assert [r.t for r in band] == [panel.dates[13]]
