import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structreg.data import (
    DataError,
    Dataset,
    DomainSpec,
    SeededRng,
    forward_split,
    hausdorff_distance,
    partition,
    standardize,
)


def test_dataset_validates_shapes_and_finiteness():
    with pytest.raises(DataError):
        Dataset(np.empty((0, 1)), np.empty(0))
    with pytest.raises(DataError):
        Dataset([[1.0], [2.0]], [1.0])
    with pytest.raises(DataError):
        Dataset([[np.nan]], [1.0])
    ds = Dataset([[1.0], [2.0]], [1.0, 2.0], instruments=[[3.0], [4.0]], time_index=[1, 2])
    assert ds.n == 2 and ds.p == 1
    sub = ds.subset([1])
    assert sub.instruments[0, 0] == 4.0 and sub.time_index[0] == 2


def test_standardize_two_point_example():
    ds = Dataset([[1.0], [3.0]], [2.0, 4.0])
    out, tr = standardize(ds)
    assert np.allclose(out.inputs, [[-1.0], [1.0]])
    assert np.allclose(out.outcome, [-1.0, 1.0])
    assert tr.column_means[0] == 2.0
    assert tr.column_scales[0] == 1.0
    assert tr.outcome_mean == 3.0


def test_standardize_identity_on_centered_unit_variance():
    gen = np.random.default_rng(0)
    x = gen.normal(size=200)
    x = (x - x.mean()) / x.std(ddof=0)
    ds = Dataset(x[:, None], np.zeros(200))
    out, tr = standardize(ds)
    assert np.allclose(out.inputs[:, 0], x, atol=1e-12)
    assert abs(tr.column_means[0]) < 1e-12 and abs(tr.column_scales[0] - 1.0) < 1e-12


def test_standardize_roundtrip_and_moments():
    gen = np.random.default_rng(42)
    ds = Dataset(gen.normal(5.0, 3.0, size=(100, 3)), gen.normal(size=100))
    out, tr = standardize(ds)
    assert np.all(np.abs(out.inputs.mean(axis=0)) <= 1e-12 * ds.n)
    assert np.allclose(out.inputs.std(axis=0, ddof=0), 1.0)
    back = tr.invert(out)
    scale = np.abs(ds.inputs).max()
    assert np.abs(back.inputs - ds.inputs).max() <= 1e-12 * scale
    assert np.abs(back.outcome - ds.outcome).max() <= 1e-12


def test_standardize_zero_variance_column_centered_not_scaled():
    ds = Dataset(np.column_stack([np.full(10, 7.0), np.arange(10.0)]), np.zeros(10))
    out, tr = standardize(ds)
    assert tr.column_scales[0] == 1.0
    assert np.allclose(out.inputs[:, 0], 0.0)


def test_standardize_rejects_tiny_samples():
    with pytest.raises(DataError):
        standardize(Dataset([[1.0]], [1.0]))


def test_partition_sizes_and_disjointness():
    ds = Dataset(np.arange(10.0)[:, None], np.zeros(10))
    folds = partition(ds, 2, SeededRng(3))
    assert [f.n for f in folds] == [5, 5]
    ds11 = Dataset(np.arange(11.0)[:, None], np.zeros(11))
    folds11 = partition(ds11, 2, SeededRng(3))
    assert sorted(f.n for f in folds11) == [5, 6]
    values = np.concatenate([f.inputs[:, 0] for f in folds11])
    assert sorted(values.tolist()) == list(map(float, range(11)))


def test_partition_deterministic_in_seed():
    ds = Dataset(np.arange(20.0)[:, None], np.zeros(20))
    a = partition(ds, 4, SeededRng(9, 2))
    b = partition(ds, 4, SeededRng(9, 2))
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.inputs, fb.inputs)
    c = partition(ds, 4, SeededRng(9, 3))
    assert any(not np.array_equal(fa.inputs, fc.inputs) for fa, fc in zip(a, c))


def test_partition_rejects_more_folds_than_rows():
    ds = Dataset(np.arange(3.0)[:, None], np.zeros(3))
    with pytest.raises(DataError):
        partition(ds, 4, SeededRng(0))


@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_partition_union_property(K, seed):
    n = 3 * K + 1
    ds = Dataset(np.arange(float(n))[:, None], np.zeros(n))
    folds = partition(ds, K, SeededRng(seed))
    merged = sorted(float(v) for f in folds for v in f.inputs[:, 0])
    assert merged == [float(i) for i in range(n)]
    sizes = {f.n for f in folds}
    assert max(sizes) - min(sizes) <= 1


def test_seeded_rng_streams_reproducible_and_distinct():
    a = SeededRng(7, 1).generator().uniform(size=5)
    b = SeededRng(7, 1).generator().uniform(size=5)
    c = SeededRng(7, 2).generator().uniform(size=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    d = SeededRng(7, 1).split(4).generator().uniform(size=5)
    assert not np.array_equal(a, d)


def test_hausdorff_identical_intervals_zero():
    box = DomainSpec.interval(0.0, 1.0)
    assert hausdorff_distance(box, box) == 0.0


def test_hausdorff_disjoint_intervals():
    # directed sup-inf by hand: farthest point of [0,1] from [2,3] is 0 -> 2;
    # farthest point of [2,3] from [0,1] is 3 -> 2
    assert hausdorff_distance(DomainSpec.interval(0, 1), DomainSpec.interval(2, 3)) == 2.0


def test_hausdorff_point_sets():
    # directed distances: {0}->({0,5}) = 0, ({0,5})->{0} = 5
    assert hausdorff_distance(np.array([[0.0]]), np.array([[0.0], [5.0]])) == 5.0


def test_hausdorff_dimension_mismatch():
    with pytest.raises(DataError):
        hausdorff_distance(DomainSpec.interval(0, 1), np.zeros((3, 2)))


def test_hausdorff_mixed_interval_vs_points_exact_1d():
    # sup over [0,2] of distance to {0,2} is at the midpoint
    box = DomainSpec([0.0], [2.0])
    pts = np.array([[0.0], [2.0]])
    assert hausdorff_distance(box, pts) == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=6, max_size=6))
@settings(max_examples=50, deadline=None)
def test_hausdorff_metric_properties_on_intervals(raw):
    def interval(a, b):
        return DomainSpec.interval(min(a, b), max(a, b))

    A = interval(raw[0], raw[1])
    B = interval(raw[2], raw[3])
    C = interval(raw[4], raw[5])
    dab = hausdorff_distance(A, B)
    dba = hausdorff_distance(B, A)
    assert dab == pytest.approx(dba, abs=1e-12)
    assert hausdorff_distance(A, A) == 0.0
    dac = hausdorff_distance(A, C)
    dcb = hausdorff_distance(C, B)
    assert dab <= dac + dcb + 1e-9


def test_forward_split_equal_spacing_example():
    ds = Dataset(np.arange(1.0, 7.0)[:, None], np.zeros(6))
    far, near = forward_split(ds, DomainSpec.interval(7.0, 10.0), 1.0 / 6.0)
    assert near.inputs.ravel().tolist() == [6.0]
    assert sorted(far.inputs.ravel().tolist()) == [1.0, 2.0, 3.0, 4.0, 5.0]


def test_forward_split_degenerate_target_uses_center_distance():
    # all points inside the target: the nearest-to-center points go second
    ds = Dataset(np.array([0.0, 4.0, 5.0, 10.0])[:, None], np.zeros(4))
    far, near = forward_split(ds, DomainSpec.interval(0.0, 10.0), 0.25)
    assert near.inputs.ravel().tolist() == [5.0]


def test_forward_split_2d_grid_northeast():
    xs, ys = np.meshgrid(np.arange(4.0), np.arange(4.0))
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    ds = Dataset(pts, np.zeros(16))
    target = DomainSpec(np.array([6.0, 6.0]), np.array([8.0, 8.0]))
    far, near = forward_split(ds, target, 1.0 / 16.0)
    assert near.inputs.tolist() == [[3.0, 3.0]]


def test_forward_split_partition_and_ordering_properties():
    gen = np.random.default_rng(5)
    ds = Dataset(gen.uniform(0, 5, size=(40, 1)), np.zeros(40))
    target = DomainSpec.interval(8.0, 9.0)
    far, near = forward_split(ds, target, 0.2)
    assert far.n + near.n == ds.n
    merged = sorted(np.concatenate([far.inputs[:, 0], near.inputs[:, 0]]).tolist())
    assert merged == sorted(ds.inputs[:, 0].tolist())
    d_far = target.point_distance(far.inputs)
    d_near = target.point_distance(near.inputs)
    assert d_near.max() <= d_far.min() + 1e-12
    # hull of the near part is closer to the target in Hausdorff distance
    h_near = hausdorff_distance(DomainSpec.from_points(near.inputs), target)
    h_far = hausdorff_distance(DomainSpec.from_points(far.inputs), target)
    assert h_near < h_far


def test_forward_split_rejects_bad_fraction():
    ds = Dataset(np.arange(5.0)[:, None], np.zeros(5))
    with pytest.raises(DataError):
        forward_split(ds, DomainSpec.interval(0, 1), 0.0)
    with pytest.raises(DataError):
        forward_split(ds, DomainSpec.interval(0, 1), 1.0)
