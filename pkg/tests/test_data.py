import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.integrate import quad

from bope.core.data import (
    CsvSchema,
    LinearGaussianPolicy,
    PricingDataset,
    TargetPolicySpec,
    apply_target_policy,
    build_instance,
    load_csv,
    write_csv,
)
from bope.core.errors import DataError

SCHEMA = CsvSchema(("fico", "amount"), "rate", "accept")


def _write(tmp_path, text):
    path = tmp_path / "data.csv"
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_maps_columns(tmp_path):
    path = _write(tmp_path, "fico,amount,rate,accept\n700,10000,4.5,1\n650,25000,5.25,0\n720,5000,3.9,1\n")
    ds = load_csv(path, SCHEMA)
    assert ds.n == 3
    assert ds.d == 2
    assert_allclose(ds.logged_prices, [4.5, 5.25, 3.9])
    assert_array_equal(ds.demands, [1, 0, 1])
    assert_allclose(ds.revenues, [4.5, 0.0, 3.9])


def test_load_csv_ignores_unmapped_columns(tmp_path):
    path = _write(tmp_path, "id,fico,amount,rate,accept\na,700,100,4,1\nb,650,200,5,0\n")
    ds = load_csv(path, SCHEMA)
    assert_allclose(ds.features, [[700, 100], [650, 200]])


def test_load_csv_drops_incomplete_rows(tmp_path, caplog):
    path = _write(tmp_path, "fico,amount,rate,accept\n700,100,4,1\n650,,5,0\n640,300,6,0\n")
    ds = load_csv(path, SCHEMA)
    assert ds.n == 2
    assert_allclose(ds.logged_prices, [4.0, 6.0])
    assert "[1]" in caplog.text


def test_load_csv_rejects_unparseable_cell(tmp_path):
    path = _write(tmp_path, "fico,amount,rate,accept\n700,100,4,1\n650,200,abc,0\n")
    with pytest.raises(DataError, match="Row 1, column 'rate'"):
        load_csv(path, SCHEMA)


def test_load_csv_reports_the_first_bad_cell(tmp_path):
    path = _write(tmp_path, "fico,amount,rate,accept\n700,100,4,1\n650,inf,5,0\n640,x,6,0\n")
    with pytest.raises(DataError, match="Row 1, column 'amount'"):
        load_csv(path, SCHEMA)


def test_load_csv_rejects_non_positive_price(tmp_path):
    path = _write(tmp_path, "fico,amount,rate,accept\n700,100,0,1\n")
    with pytest.raises(DataError, match="Row 0: price"):
        load_csv(path, SCHEMA)


def test_load_csv_rejects_non_binary_demand(tmp_path):
    path = _write(tmp_path, "fico,amount,rate,accept\n700,100,4,1\n650,200,5,2\n")
    with pytest.raises(DataError, match="Row 1: demand"):
        load_csv(path, SCHEMA)


def test_load_csv_missing_column(tmp_path):
    path = _write(tmp_path, "fico,rate,accept\n700,4,1\n")
    with pytest.raises(DataError, match="amount"):
        load_csv(path, SCHEMA)


def test_write_csv_reproduces_values_exactly(tmp_path):
    path = _write(tmp_path, "fico,amount,rate,accept\n700.1,0.1,4.123456789012345,1\n650,1e-7,5.25,0\n")
    ds = load_csv(path, SCHEMA)
    again = load_csv(write_csv(ds, tmp_path / "again.csv", SCHEMA), SCHEMA)
    assert_array_equal(again.features, ds.features)
    assert_array_equal(again.logged_prices, ds.logged_prices)
    assert_array_equal(again.demands, ds.demands)


def test_schema_rejects_repeated_column():
    with pytest.raises(DataError):
        CsvSchema(("rate",), "rate", "accept")


def test_dataset_is_read_only():
    ds = PricingDataset(np.ones((2, 1)), [1.0, 2.0], [0, 1])
    with pytest.raises(ValueError):
        ds.logged_prices[0] = 5.0


def test_dataset_row_count_mismatch():
    with pytest.raises(DataError, match="mismatch"):
        PricingDataset(np.ones((3, 2)), [1.0, 2.0], [0, 1])


def test_build_instance_layout_and_standardization(rng):
    features = rng.normal(size=(4, 2))
    logged = np.array([1.0, 2.0, 3.0, 4.0])
    inst = build_instance(features, logged, 2 * logged, [0, 1, 1, 0])
    assert inst.n == 4
    assert inst.d == 2
    assert_allclose(inst.price_vector, [1, 2, 3, 4, 2, 4, 6, 8])
    assert_allclose(inst.features, features)
    assert_allclose(inst.z.mean(axis=0), 0.0, atol=1e-12)
    assert_allclose(inst.z.std(axis=0), 1.0)


def test_build_instance_constant_column_keeps_unit_scale():
    inst = build_instance(np.ones((3, 1)), [1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0, 0, 1])
    assert inst.scale[0] == 1.0
    assert_allclose(inst.z[:, 0], 0.0)


def test_build_instance_rejects_non_positive_target():
    with pytest.raises(DataError, match="Row 1: target price"):
        build_instance(np.ones((2, 1)), [1.0, 2.0], [1.0, -1.0], [0, 1])


def test_with_demands(instance):
    flipped = instance.with_demands(1 - instance.demands)
    assert_array_equal(flipped.demands, 1 - instance.demands)
    assert flipped.points is instance.points
    with pytest.raises(DataError):
        instance.with_demands(np.full(instance.n, 2))


def test_target_policies():
    features = np.zeros((2, 2))
    logged = np.array([2.0, 4.0])
    assert_allclose(TargetPolicySpec.multiplicative(1.5).target_prices(features, logged), [3.0, 6.0])
    assert_allclose(TargetPolicySpec.additive(-1.0).target_prices(features, logged), [1.0, 3.0])
    assert_allclose(TargetPolicySpec.explicit([5.0, 6.0]).target_prices(features, logged), [5.0, 6.0])
    with pytest.raises(DataError, match="length"):
        TargetPolicySpec.explicit([5.0]).target_prices(features, logged)
    with pytest.raises(NotImplementedError):
        TargetPolicySpec(kind="surge").target_prices(features, logged)


def test_linear_gaussian_target_is_seeded():
    spec = TargetPolicySpec.linear_gaussian((0.5, -0.5), 7.0, 2.0, seed=3)
    features = np.zeros((4, 2))
    assert_array_equal(spec.target_prices(features, np.ones(4)), spec.target_prices(features, np.ones(4)))


def test_apply_target_policy_rejects_negative_prices():
    ds = PricingDataset(np.zeros((2, 1)), [1.0, 2.0], [0, 1])
    with pytest.raises(DataError):
        apply_target_policy(ds, TargetPolicySpec.additive(-1.5))


def test_policy_density_matches_normal():
    policy = LinearGaussianPolicy((1.0,), 2.0, 0.5)
    density = policy.density(np.array([3.0]), np.array([[1.0]]))
    assert_allclose(density, [1.0 / (0.5 * np.sqrt(2 * np.pi))])
    with pytest.raises(DataError):
        LinearGaussianPolicy((1.0,), 2.0, 0.0).density(np.array([3.0]), np.array([[1.0]]))


def test_truncated_policy_density():
    policy = LinearGaussianPolicy((1.0,), 0.0, 1.0)
    features = np.zeros((3, 1))
    prices = np.array([-1.0, 0.0, 1.0])
    density = policy.density(prices, features, lower=0.0)
    # half of the mass lies above the mean
    assert_allclose(density, [0.0, 0.0, 2 * policy.density(prices[2:], features[2:])[0]])
    total, _ = quad(lambda p: policy.density(np.array([p]), np.zeros((1, 1)), lower=0.0)[0], 0.0, np.inf)
    assert_allclose(total, 1.0, rtol=1e-6)
    with pytest.raises(DataError, match="no price mass"):
        LinearGaussianPolicy((1.0,), -100.0, 1.0).density(prices, features, lower=0.0)
