import json

import numpy as np
import pytest

from pqwalk.errors import ContractError
from pqwalk.ensemble import (Accumulator, RunConfig, merge, read_result, run_ensemble,
                             run_trajectory, write_result)
from pqwalk.observables import DensityMode
from pqwalk.policy import StepPolicy


def small(**kw):
    base = dict(policy=StepPolicy("I", 0.3), T=60, N=10, master_seed=5, snapshot_times=(30, 60))
    base.update(kw)
    return RunConfig(**base)


def test_fixed_two_step_snapshot():
    cfg = RunConfig(StepPolicy("fixed", fixed_l=1), T=2, N=1, snapshot_times=(2,))
    res = run_ensemble(cfg)
    assert res.snapshots[2].as_dict() == {0: pytest.approx(0.5), 2: pytest.approx(0.5)}


def test_p1_records_depend_only_on_first_length():
    cfg = small(policy=StepPolicy("I", 1.0), N=12)
    records = [run_trajectory(cfg, i) for i in range(cfg.N)]
    distinct = {r.lengths[0]: r for r in records}
    assert set(distinct) == {1, 2}
    for r in records:
        np.testing.assert_array_equal(r.series, distinct[r.lengths[0]].series)


def test_trajectory_deterministic():
    cfg = small()
    a, b = run_trajectory(cfg, 3), run_trajectory(cfg, 3)
    np.testing.assert_array_equal(a.series, b.series)
    np.testing.assert_array_equal(a.snapshots, b.snapshots)


def test_trajectory_index_range():
    with pytest.raises(ContractError):
        run_trajectory(small(), 10)


def test_single_config_equals_trajectory():
    cfg = small(N=1)
    rec = run_trajectory(cfg, 0)
    res = run_ensemble(cfg)
    np.testing.assert_array_equal(res.mean_x2, rec.column("m2"))
    np.testing.assert_array_equal(res.snapshots[60].probs,
                                  rec.snapshots[1][np.abs(np.arange(-120, 121)) <= 120])


def test_snapshots_normalized_and_supported():
    res = run_ensemble(small(N=9))
    for t, snap in res.snapshots.items():
        assert abs(snap.probs.sum() - 1) < 1e-9
        assert np.all(np.abs(snap.xs) <= 2 * t)


def test_merge_identity_and_mean():
    cfg = small()
    r0, r1 = run_trajectory(cfg, 0), run_trajectory(cfg, 1)
    a = Accumulator.of(r0)
    assert merge(a, Accumulator()).count == 1
    np.testing.assert_array_equal(merge(Accumulator(), a).sums, a.sums)
    both = merge(a, Accumulator.of(r1))
    mean, _ = both.mean()
    np.testing.assert_allclose(mean, (r0.series + r1.series) / 2, rtol=1e-15)


def test_merge_associative():
    cfg = small()
    accs = [Accumulator.of(run_trajectory(cfg, i)) for i in range(4)]
    seq = Accumulator()
    for acc in accs:
        seq = merge(seq, acc)
    tree = merge(merge(accs[0], accs[1]), merge(accs[2], accs[3]))
    left = merge(merge(accs[0], accs[1]), accs[2])
    right = merge(accs[0], merge(accs[1], accs[2]))
    np.testing.assert_allclose(seq.sums, tree.sums, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(left.sums, right.sums, rtol=1e-12, atol=1e-12)


def test_merge_shape_mismatch():
    a = Accumulator.of(run_trajectory(small(), 0))
    b = Accumulator.of(run_trajectory(small(T=40, snapshot_times=(40,)), 0))
    with pytest.raises(ContractError):
        merge(a, b)


@pytest.mark.parametrize("workers", [2, 4, 16])
def test_worker_count_invariance(workers):
    cfg = small(N=21)
    one = run_ensemble(cfg, workers=1)
    many = run_ensemble(cfg, workers=workers)
    np.testing.assert_array_equal(one.mean_x2, many.mean_x2)
    np.testing.assert_array_equal(one.S_E, many.S_E)
    np.testing.assert_array_equal(one.snapshots[60].probs, many.snapshots[60].probs)


def test_entropy_modes_and_averaging():
    cfg = small(N=6)
    herm = run_ensemble(cfg)
    paper = run_ensemble(small(N=6, density_mode=DensityMode.PAPER_MAGNITUDE))
    mean_s = run_ensemble(small(N=6, entropy_average="mean_entropy"))
    assert np.all(paper.S_E <= herm.S_E + 1e-12)
    # entropy is concave: entropy of the mean density >= mean of entropies
    assert np.all(herm.S_E >= mean_s.S_E - 1e-12)
    pts = herm.entropy_points()
    assert pts[0].S_E == pytest.approx(0.0, abs=1e-12)
    assert all(abs(p.A + p.C - 1) < 1e-10 for p in pts)


def test_config_validation():
    with pytest.raises(ContractError):
        small(snapshot_times=(0,))
    with pytest.raises(ContractError):
        small(T=0)
    with pytest.raises(ContractError):
        small(snapshot_times=(61,))


def test_config_roundtrip():
    cfg = small(policy=StepPolicy("II", 0.2, 0.7), record_every=3)
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_files_roundtrip_and_bytes(tmp_path):
    cfg = small(N=4)
    res = run_ensemble(cfg)
    write_result(res, tmp_path / "a")
    write_result(run_ensemble(cfg), tmp_path / "b")
    for name in ["moments.csv", "density.csv", "snap_t30.csv", "snap_t60.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "moments.csv").read_text().splitlines()[0]
    assert header == "t,mean_x,mean_x2,S_E"
    assert (tmp_path / "a" / "snap_t30.csv").read_text().startswith("x,P\n")
    back = read_result(tmp_path / "a")
    np.testing.assert_array_equal(back.mean_x2, res.mean_x2)
    np.testing.assert_array_equal(back.S_E, res.S_E)
    np.testing.assert_array_equal(back.snapshots[30].probs, res.snapshots[30].probs)
    assert back.config == cfg


def test_manifest_reproduces_run(tmp_path):
    cfg = small(policy=StepPolicy("II", 0.4, 0.2), N=3)
    manifest = write_result(run_ensemble(cfg), tmp_path)
    rebuilt = RunConfig.from_dict(manifest["config"])
    write_result(run_ensemble(rebuilt), tmp_path / "again")
    assert (tmp_path / "moments.csv").read_bytes() == (tmp_path / "again" / "moments.csv").read_bytes()
