import numpy as np
import pytest

from three_spin_cp.csvio import read_csv
from three_spin_cp.figures import FIGURES, RunOptions, load_preset, reproduce_figure


def test_fig3_bundle(tmp_path):
    b = reproduce_figure("fig3", tmp_path, RunOptions(quick=True))
    manifest = (tmp_path / "manifest.txt").read_text()
    assert "inverse_buildup.csv" in manifest and "omega1_hz = 340" in manifest
    ts = read_csv(tmp_path / "inverse_buildup.csv")
    assert ts.metadata["label"] == "fig3"
    assert b.summary["peak_anti"] == pytest.approx(float(ts["S1z-S2z"].max()), rel=1e-9)


def test_fig4_bundle_has_member_files(tmp_path):
    b = reproduce_figure("fig4", tmp_path, RunOptions(quick=True))
    brute = sorted(p.name for p in tmp_path.glob("*_brute.csv"))
    assert len(brute) == 4 and len(list(tmp_path.glob("*_aht.csv"))) == 4
    assert all(v >= 0 for k, v in b.summary.items() if k.startswith("relative_rms"))
    for name in brute:
        assert name in (tmp_path / "manifest.txt").read_text()


def test_options_override_powder_and_step():
    cfg = load_preset("fig5").scenario
    out = RunOptions(orientations=(3, 2), seed=5, step=1e-6, workers=2).apply(cfg)
    assert out.orientation_set().count == 6 and out.step == 1e-6 and out.seed == 5 and out.workers == 2
    liquid = RunOptions(orientations=(3, 2)).apply(load_preset("fig2").scenario)
    assert liquid.orientations is None


def test_unknown_figure(tmp_path):
    with pytest.raises(KeyError):
        reproduce_figure("fig9", tmp_path)
    assert set(FIGURES) >= {"fig2", "fig5", "s4"}


def test_s2_bundle(tmp_path):
    b = reproduce_figure("s2", tmp_path, RunOptions(quick=True))
    levels = [b.summary[f"max_Ix_cw_{p}pct"] for p in ("0", "2.5", "5", "10")]
    assert np.all(np.isfinite(levels)) and levels[3] < levels[0]
