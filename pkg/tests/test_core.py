import io
import json
import math

import numpy as np
import pytest

from svridge import (
    CompatibilityError,
    DataError,
    Dataset,
    FitResult,
    GicReport,
    LambdaState,
    ModelParams,
    load_dataset,
    make_basis,
    validate_compatibility,
)


def test_load_simple_csv():
    ds = load_dataset("x1,y\n0,1\n1,2")
    assert ds.n == 2 and ds.p == 1
    np.testing.assert_array_equal(ds.xs[:, 0], [0, 1])
    np.testing.assert_array_equal(ds.ys, [1, 2])
    assert ds.domain == ((0.0, 1.0),)


def test_nan_cell_reports_location():
    with pytest.raises(DataError) as err:
        load_dataset("x1,y\n0,NaN")
    assert err.value.row == 1 and err.value.column == "y"
    assert "non-finite" in str(err.value)


@pytest.mark.parametrize(
    "text, column",
    [("x1,z\n0,1", "y"), ("x1,y\n0,abc", "y"), ("x1,y\n0", "y"), ("y\n1", "x1")],
)
def test_bad_tables_name_the_column(text, column):
    with pytest.raises(DataError) as err:
        load_dataset(text)
    assert err.value.column == column


def test_zero_rows():
    with pytest.raises(DataError, match="zero data rows"):
        load_dataset("x1,y\n")


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="dataset: not found"):
        load_dataset(tmp_path / "absent.csv")


def test_large_file_from_disk(tmp_path):
    rng = np.random.default_rng(1)
    x = np.sort(rng.uniform(0, 10, 3109))
    y = np.sin(x) + rng.normal(0, 0.1, x.size)
    path = tmp_path / "series.csv"
    path.write_text("x1,y\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, y)))
    ds = load_dataset(path)
    assert (ds.n, ds.p) == (3109, 1)
    np.testing.assert_array_equal(ds.ys, y)


def test_two_column_design_and_file_handle():
    ds = load_dataset(io.StringIO("x2,x1,y\n1,0,5\n0,1,6\n"))
    np.testing.assert_array_equal(ds.xs, [[0, 1], [1, 0]])


def test_domain_override_and_violation():
    ds = load_dataset("x1,y\n0,1\n1,2", domain=[(-2, 2)])
    assert ds.domain == ((-2.0, 2.0),)
    with pytest.raises(DataError):
        Dataset([[0.0], [3.0]], [1.0, 2.0], domain=[(-2, 2)])


def test_dataset_is_immutable():
    ds = Dataset([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        ds.ys[0] = 5.0


def test_csv_round_trip_is_idempotent():
    ds = load_dataset("x1,y\n0.1,1.5\n0.7,-2.25\n0.3,3e-5\n")
    again = load_dataset(ds.to_csv())
    np.testing.assert_array_equal(again.xs, ds.xs)
    np.testing.assert_array_equal(again.ys, ds.ys)
    assert load_dataset(again.to_csv()).to_csv() == ds.to_csv()


def test_compatibility_checks():
    ds1 = Dataset(np.linspace(-2, 2, 5), np.zeros(5))
    validate_compatibility(ds1, make_basis((-2, 2), 5))
    with pytest.raises(CompatibilityError, match="dimension"):
        validate_compatibility(ds1, make_basis([(0, 1), (0, 1)], 3))
    far = Dataset([[0.0], [2.5]], [0.0, 0.0])
    with pytest.raises(CompatibilityError) as err:
        validate_compatibility(far, make_basis((-2, 2), 5))
    assert err.value.index == 1


def test_type_invariants():
    with pytest.raises(ValueError):
        ModelParams(0.0, [1.0])
    with pytest.raises(ValueError):
        ModelParams(1.0, [np.inf])
    with pytest.raises(ValueError):
        LambdaState([1.0, 0.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        LambdaState([1.0], 0.0, 1.0)
    with pytest.raises(ValueError):
        GicReport(1.0, 2.0, mode="other")
    with pytest.raises(ValueError):
        FitResult(ModelParams(1.0, [1.0]), 0.1, objective_trace=[], iterations=2)


def test_gic_total_is_exact_sum():
    rep = GicReport(0.1, 0.2)
    assert rep.total == 0.1 + 0.2
    with pytest.raises(ValueError):
        GicReport(0.1, 0.2, total=0.3)


def test_fit_result_json_round_trip():
    fit = FitResult(
        params=ModelParams(0.5, [1.0, -2.0]),
        lambda_state=LambdaState([0.1, 0.2], 1e-3, 2e-2),
        objective_trace=[3.0, 2.0],
        iterations=2,
        converged=True,
        gic=GicReport(10.0, 4.0, info={"j_condition": 12.0}),
        method="svr",
    )
    doc = json.loads(fit.to_json())
    assert doc["lambda_state"]["lambda"] == [0.1, 0.2]
    assert set(doc["gic"]) >= {"neg2_loglik", "bias_term", "total", "mode"}
    back = FitResult.from_dict(doc)
    assert back.gic == fit.gic
    np.testing.assert_array_equal(back.lam, fit.lam)
    assert back.objective_trace == fit.objective_trace
    assert math.isclose(back.alpha, 0.5)
