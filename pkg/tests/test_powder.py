import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from three_spin_cp.powder import EnsembleSpec, OrientationSet, ensemble_average, generate_orientations, rf_inhomogeneity
from three_spin_cp.series import TimeSeries
from three_spin_cp.solid import CrystalliteOrientation

T = np.linspace(0, 1, 5)


def _member(value):
    return TimeSeries(T, {"Ix": value * np.sin(T + value)})


@pytest.mark.parametrize("scheme", ["fibonacci", "random"])
def test_orientation_set_covers_sphere(scheme):
    o = generate_orientations(scheme, 233, 8, seed=3)
    assert o.count == 233 * 8
    assert sum(o.weights) == pytest.approx(1.0, abs=1e-12)
    sb2 = np.array([np.sin(m.beta) ** 2 for m in o.members[::8]])
    if scheme == "fibonacci":
        assert sb2.mean() == pytest.approx(2 / 3, rel=0.01)
    else:
        assert abs(sb2.mean() - 2 / 3) < 5 * sb2.std() / np.sqrt(sb2.size)


def test_orientation_determinism():
    a = generate_orientations("random", 13, 3, seed=7)
    assert a == generate_orientations("random", 13, 3, seed=7)
    assert a != generate_orientations("random", 13, 3, seed=8)
    assert generate_orientations("fibonacci", 1, 1).members == (CrystalliteOrientation(),)


def test_orientation_validation():
    with pytest.raises(ValueError):
        generate_orientations("lebedev", 3, 3)
    with pytest.raises(ValueError):
        generate_orientations("fibonacci", 0, 3)
    with pytest.raises(ValueError):
        OrientationSet((CrystalliteOrientation(),), (0.5,), "x", 1, 1)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=12), st.randoms(use_true_random=False))
@settings(max_examples=50, deadline=None)
def test_average_is_order_independent(values, rnd):
    n = len(values)
    w = np.full(n, 1.0 / n)
    w[-1] = 1.0 - w[:-1].sum()
    spec = EnsembleSpec("rf-scale", tuple(values), tuple(w))
    perm = list(range(n))
    rnd.shuffle(perm)
    spec2 = EnsembleSpec("rf-scale", tuple(values[p] for p in perm), tuple(w[p] for p in perm))
    a = ensemble_average(_member, spec)["Ix"]
    b = ensemble_average(_member, spec2)["Ix"]
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_average_is_weighted_mean_and_linear():
    spec = EnsembleSpec("rf-scale", (1.0, 2.0, 3.0), (0.2, 0.3, 0.5))
    got = ensemble_average(_member, spec)["Ix"]
    ref = sum(w * _member(v)["Ix"] for v, w in zip(spec.members, spec.weights))
    np.testing.assert_allclose(got, ref, atol=1e-14)
    doubled = ensemble_average(lambda v: _member(v).scaled(2.0), spec)["Ix"]
    np.testing.assert_allclose(doubled, 2 * got, atol=1e-14)


def test_single_member_identity_and_cancellation():
    one = EnsembleSpec("rf-scale", (1.5,), (1.0,))
    np.testing.assert_array_equal(ensemble_average(_member, one)["Ix"], _member(1.5)["Ix"])
    pair = EnsembleSpec("rf-scale", (1.0, -1.0), (0.5, 0.5))
    out = ensemble_average(lambda s: TimeSeries(T, {"Ix": s * np.cos(T)}), pair)
    np.testing.assert_allclose(out["Ix"], 0.0, atol=1e-15)


def test_threads_give_identical_result():
    spec = EnsembleSpec("rf-scale", tuple(np.linspace(0.5, 1.5, 9)), (1 / 9,) * 8 + (1 - 8 / 9,))
    np.testing.assert_array_equal(ensemble_average(_member, spec)["Ix"],
                                  ensemble_average(_member, spec, workers=3)["Ix"])


def test_mismatched_grids_refused():
    spec = EnsembleSpec("rf-scale", (1.0, 2.0), (0.5, 0.5))
    with pytest.raises(ValueError, match="time grids"):
        ensemble_average(lambda v: TimeSeries(T * v, {"Ix": T}), spec)
    with pytest.raises(ValueError, match="channels"):
        ensemble_average(lambda v: TimeSeries(T, {f"c{v}": T}), spec)


@pytest.mark.parametrize("model", ["gaussian", "uniform"])
def test_rf_inhomogeneity(model):
    e = rf_inhomogeneity(5.0, model)
    s, w = np.array(e.members), np.array(e.weights)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.dot(w, s) == pytest.approx(1.0, abs=1e-12)
    if model == "gaussian":
        assert np.sqrt(np.dot(w, (s - 1) ** 2)) == pytest.approx(0.05, rel=0.05)
    else:
        assert s.min() == pytest.approx(0.95) and s.max() == pytest.approx(1.05)
    assert rf_inhomogeneity(0).members == (1.0,)
    with pytest.raises(ValueError):
        rf_inhomogeneity(-1)
    with pytest.raises(ValueError):
        rf_inhomogeneity(5, "lorentzian")
