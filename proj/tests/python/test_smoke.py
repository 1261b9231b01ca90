"""Smoke tests for the python bindings."""

import json

import numpy as np
import pytest

import spurcor


def make_dataset(shift=0.0, seed=0, n=12, p=5, m=1):
    rng = np.random.default_rng(seed)
    groups = [rng.standard_normal((n, p))]
    for _ in range(m):
        g = rng.standard_normal((n, p))
        g[:, : p // 2] += shift
        groups.append(g)
    return spurcor.Dataset(groups)


def test_dataset_shape():
    ds = make_dataset(n=10, p=4, m=2)
    assert ds.m == 2
    assert ds.p == 4
    assert ds.n(0) == 10
    assert len(ds.groups) == 3


def test_dataset_validation():
    with pytest.raises(spurcor.ValidationError):
        spurcor.Dataset([np.zeros((5, 3))])  # one group only
    with pytest.raises(spurcor.ValidationError):
        spurcor.Dataset([np.zeros((1, 3)), np.zeros((5, 3))])  # n < 2


def test_t_statistics_shape_and_sign():
    ds = make_dataset(shift=3.0, seed=1)
    t = spurcor.t_statistics(ds)
    assert t.shape == (1, 5)
    assert np.all(t[0, :2] > 2.0)  # shifted columns


def test_analyze_proposal_reproducible():
    ds = make_dataset(shift=2.0, seed=2)
    out1 = spurcor.analyze(ds, spurcor.Method.proposal, n_draws=20000, seed=7)
    out2 = spurcor.analyze(ds, spurcor.Method.proposal, n_draws=20000, seed=7)
    assert out1.adjusted_p() == out2.adjusted_p()
    assert out1.method == "proposal"
    assert out1.n_rejected >= 2  # the two shifted variables stand out
    parsed = json.loads(out1.to_json())
    assert parsed["schema_version"] == 1
    assert len(parsed["hypotheses"]) == 5


def test_dominance():
    ds = make_dataset(shift=1.5, seed=3)
    kwargs = dict(n_draws=20000, seed=11)
    bon = spurcor.analyze(ds, spurcor.Method.bonferroni, **kwargs)
    ss = spurcor.analyze(ds, spurcor.Method.maxt, **kwargs)
    sd = spurcor.analyze(ds, spurcor.Method.stepdown_maxt, **kwargs)
    assert np.all(np.asarray(ss.adjusted_p()) <= np.asarray(bon.adjusted_p()) + 1e-12)
    assert np.all(np.asarray(sd.adjusted_p()) <= np.asarray(ss.adjusted_p()) + 1e-12)


def test_correlation_matrix():
    ds = make_dataset(seed=4, p=6)
    psi, repaired, clamped = spurcor.correlation_matrix(ds, "spurious", theta=1.0)
    assert psi.shape == (6, 6)
    assert np.allclose(np.diag(psi), 1.0)
    assert np.allclose(psi, psi.T)
    assert not repaired
    with pytest.raises(spurcor.ValidationError):
        spurcor.correlation_matrix(ds, "nope")


def test_critical_value_sidak():
    c = spurcor.critical_value(np.eye(2), alpha=0.05, n_draws=200000, seed=5)
    from math import sqrt

    # two independent variables: the Sidak quantile
    expected = 2.2365  # Phi^{-1}((1 + sqrt(0.95)) / 2)
    assert abs(c - expected) < 0.03


def test_simulate_json():
    scenario = {
        "rho": 0.3,
        "n": 10,
        "p": 4,
        "reps": 20,
        "n_draws": 1000,
        "seed": 9,
        "methods": ["bonferroni", "proposal"],
    }
    report = json.loads(spurcor.simulate(json.dumps(scenario)))
    assert report["reps_completed"] == 20
    assert [m["method"] for m in report["methods"]] == ["bonferroni", "proposal"]
    assert 0.0 <= report["methods"][0]["fwer"] <= 1.0


def test_load_csv(tmp_path):
    path = tmp_path / "data.csv"
    rows = ["group,a,b"]
    rng = np.random.default_rng(6)
    for label in (0, 1):
        for _ in range(8):
            x, y = rng.standard_normal(2)
            rows.append(f"{label},{x:.6f},{y:.6f}")
    path.write_text("\n".join(rows) + "\n")
    ds = spurcor.load_csv(str(path))
    assert ds.m == 1
    assert ds.p == 2
    with pytest.raises(spurcor.ParseError):
        bad = tmp_path / "bad.csv"
        bad.write_text("group,a\n0,1\n0,x\n1,2\n1,3\n")
        spurcor.load_csv(str(bad))
