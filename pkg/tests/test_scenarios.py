import numpy as np
import pytest

from conftest import l_geometry, liquid_system
from three_spin_cp.config import parse_config
from three_spin_cp.errors import MatchingError, SpinSystemError
from three_spin_cp.figures import load_preset
from three_spin_cp.liquid import LiquidParams, liquid_aht_coefficients
from three_spin_cp.powder import generate_orientations, rf_inhomogeneity
from three_spin_cp.rf import RfProfile
from three_spin_cp.scenarios import (ComparisonReport, InitialPrep, ScenarioConfig, compare_aht_vs_brute,
                                     run_buildup, run_member, scan_offset, scan_rf)
from three_spin_cp.solid import CrystalliteOrientation

TWO_PI = 2 * np.pi


def _opt(system):
    return liquid_aht_coefficients(LiquidParams(system, 0.0)).omega1_opt


def liquid_cfg(delta=450.0, tau=0.5, **kw):
    s = kw.pop("system", None) or liquid_system(delta)
    return ScenarioConfig("liquid", s, RfProfile(_opt(s)), tau, n_out=kw.pop("n_out", 51), **kw)


def solid_cfg(mas_hz=40e3, tau=2e-3, **kw):
    s = l_geometry()
    return ScenarioConfig("solid", s, RfProfile(TWO_PI * 1e3), tau, omega_r=TWO_PI * mas_hz, n_out=21, **kw)


def test_zero_time_echoes_initial_state():
    ts = run_buildup(liquid_cfg(tau=0.0))
    assert ts.times.tolist() == [0.0]
    assert ts["S1z"][0] == pytest.approx(4.0) and ts["S2z"][0] == pytest.approx(-4.0)
    assert ts["Ix"][0] == pytest.approx(0.0)
    lock = run_buildup(liquid_cfg(tau=0.0, prep=InitialPrep("i-spinlock")))
    assert lock["Ix"][0] == pytest.approx(1.0)


def test_prep_superposition():
    def ix(p1, p2):
        return run_buildup(liquid_cfg(prep=InitialPrep("custom", polarizations={"H1": p1, "H2": p2})))["Ix"]
    np.testing.assert_allclose(ix(1, 0), 0.5 * (ix(1, 1) + ix(1, -1)), atol=1e-10)
    # uniform polarization commutes with the matched transfer and yields no rare-spin signal
    assert np.max(np.abs(ix(1, 1))) < 0.05 * np.max(np.abs(ix(1, -1)))


def test_prep_validation():
    with pytest.raises(ValueError):
        InitialPrep("thermal")
    with pytest.raises(ValueError):
        InitialPrep(sign=2)
    with pytest.raises(ValueError):
        InitialPrep("custom")
    assert InitialPrep("custom", polarizations={"H1": 2}).describe() == "custom:H1=2"


def test_glycine_inversion_choice_flips_signal():
    cfg = load_preset("glycine").scenario
    other = cfg.replace(prep=InitialPrep("custom", polarizations={"Ha": 4, "Hb": 4, "N1": -4, "N2": -4, "N3": -4}))
    a, b = run_buildup(cfg)["Ix"], run_buildup(other)["Ix"]
    assert np.max(np.abs(a)) > 0.1
    np.testing.assert_allclose(a, -b, atol=1e-9)


def test_offset_scan_at_zero_matches_buildup():
    cfg = liquid_cfg()
    prof = scan_offset(cfg, [0.0])
    ts = run_buildup(cfg)
    assert prof["max_Ix"][0] == pytest.approx(ts["Ix"].max(), abs=1e-12)
    assert prof["Ix_at_tau"][0] == pytest.approx(ts["Ix"][-1], abs=1e-12)


def test_large_offset_quenches_transfer():
    cfg = liquid_cfg(tau=1.0)
    prof = scan_offset(cfg, TWO_PI * np.array([0.0, 3000.0]))
    assert prof["max_Ix"][1] < 0.05 * prof["max_Ix"][0]
    assert prof.metadata["argmax_i_offset_hz"] == 0.0


def test_offset_mirror_symmetry():
    cfg = liquid_cfg()
    mirrored = cfg.replace(system=cfg.system.replace(shifts=tuple(-x for x in cfg.system.shifts)))
    for off in (TWO_PI * 20, TWO_PI * -35):
        a = run_buildup(cfg.replace(i_offset=off))["Ix"]
        b = run_buildup(mirrored.replace(i_offset=-off))["Ix"]
        np.testing.assert_allclose(b, -a, atol=1e-9)


def test_no_heteronuclear_difference_gives_flat_profile():
    s = liquid_system(450.0, j_h1c=50.0, j_h2c=50.0)
    prof = scan_rf(liquid_cfg(system=s, tau=1.0), TWO_PI * np.array([420.0, 442.0, 460.0]))
    np.testing.assert_allclose(prof["max_Ix"], 0.0, atol=1e-3)


def test_rf_scan_peaks_near_match():
    cfg = liquid_cfg(tau=1.0)
    opt = cfg.rf.nominal / TWO_PI
    prof = scan_rf(cfg, TWO_PI * (opt + np.array([-30.0, 0.0, 30.0])))
    assert int(np.argmax(prof["max_Ix"])) == 1
    assert prof.parameter == "omega1_hz" and prof.values[1] == pytest.approx(opt)


def test_sz_total_is_conserved():
    ts = run_buildup(liquid_cfg())
    assert ts.metadata["sz_total_drift"] < 1e-8
    sol = run_buildup(solid_cfg())
    assert sol.metadata["sz_total_drift"] < 1e-8


def test_solid_grid_is_rotor_synchronized():
    cfg = solid_cfg()
    t = cfg.times()
    tr = TWO_PI / cfg.omega_r
    np.testing.assert_allclose(t / tr, np.round(t / tr), atol=1e-9)


def test_k2_flagged_degenerate():
    rep = compare_aht_vs_brute(solid_cfg(mas_hz=2e3, orientations=generate_orientations("fibonacci", 1, 1)))
    assert rep.degenerate and rep.members[0].degenerate
    assert rep.members[0].analytic is None and rep.members[0].brute is not None


def test_solid_comparison_reports_members():
    o = (CrystalliteOrientation.from_degrees(30, 45, 60), CrystalliteOrientation.from_degrees(45, 60, 120))
    from three_spin_cp.powder import OrientationSet
    rep = compare_aht_vs_brute(solid_cfg(tau=4e-3, orientations=OrientationSet.explicit(o)))
    assert len(rep.members) == 2 and not rep.degenerate
    assert rep.rms["Ix"] == max(m.rms["Ix"] for m in rep.members)


def test_liquid_comparison_needs_match():
    cfg = liquid_cfg()
    with pytest.raises(MatchingError):
        compare_aht_vs_brute(cfg.replace(rf=RfProfile(cfg.rf.nominal + TWO_PI * 10)))
    with pytest.raises(ValueError):
        compare_aht_vs_brute(cfg.replace(inhomogeneity=rf_inhomogeneity(5)))
    with pytest.raises(ValueError):
        ComparisonReport({"Ix": -1.0}, {}, {}, 1.0, None)


def test_config_validation():
    s = liquid_system()
    with pytest.raises(ValueError):
        ScenarioConfig("gas", s, RfProfile(1.0), 0.1)
    with pytest.raises(ValueError):
        ScenarioConfig("solid", s, RfProfile(1.0), 0.1, omega_r=TWO_PI * 1e4)
    with pytest.raises(ValueError):
        ScenarioConfig("liquid", s, RfProfile(1.0), 0.1, orientations=generate_orientations("fibonacci", 2, 2))
    with pytest.raises(SpinSystemError):
        ScenarioConfig("liquid", s, RfProfile(1.0), 0.1, s1="H1", s2="C")
    with pytest.raises(ValueError):
        ScenarioConfig("liquid", s, RfProfile(1.0), 0.1, out_grid=(0.0, 0.2))
    with pytest.raises(ValueError):
        ScenarioConfig("liquid", s, RfProfile(1.0), -1.0)


def test_ramp_outperforms_constant_under_inhomogeneity():
    cfg = liquid_cfg(tau=1.0, out_grid=(0.5, 1.0), step=1e-4, inhomogeneity=rf_inhomogeneity(5))
    cw = run_buildup(cfg)["Ix"]
    ramp = run_buildup(cfg.replace(rf=RfProfile.ramp(cfg.rf.nominal, 0.10)))["Ix"]
    assert ramp[-1] >= cw[-1]


def test_ramp_point_matches_single_lock():
    base = liquid_cfg(tau=0.4, step=1e-4)
    ramp = base.replace(rf=RfProfile.ramp(base.rf.nominal, 0.1), out_grid=(0.2, 0.4))
    both = run_member(ramp)["Ix"]
    single = run_member(ramp.replace(tau_sl=0.2, out_grid=(0.2,)))["Ix"]
    assert both[0] == pytest.approx(single[0], abs=1e-12)


def test_describe_roundtrips_through_config_keys():
    md = liquid_cfg().describe()
    assert md["phase"] == "liquid" and md["transfer"] == "H1,H2,C"
    assert md["omega1_hz"] == pytest.approx(442.61, abs=0.05)
    text = "phase = liquid\nspins = H1:1H, H2:1H, C:13C\ndelta_hz = 450\nj_hz = H1-H2:8.5, H1-C:172, H2-C:8\n" \
           "omega1_hz = match\ntau_sl_s = 0.5\n"
    assert parse_config(text).rf.nominal == pytest.approx(liquid_cfg().rf.nominal)
