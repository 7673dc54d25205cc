import numpy as np
import pandas as pd
import pytest

from fvrlab import constants, utils


def test_mean_and_se_ignores_nan():
    values = np.array([[1.0, 2.0, np.nan], [3.0, np.nan, np.nan]])
    mean, se, counts = utils.mean_and_se(values)
    np.testing.assert_allclose(mean[:2], [2.0, 2.0])
    assert np.isnan(mean[2])
    assert se[0] == pytest.approx(np.sqrt(2.0) / np.sqrt(2))
    assert np.isnan(se[1])
    np.testing.assert_array_equal(counts, [2, 1, 0])


def test_rep_rng_streams_differ_by_rep():
    first = utils.rep_rng(123, 0).standard_normal(3)
    again = utils.rep_rng(123, 0).standard_normal(3)
    other = utils.rep_rng(123, 1).standard_normal(3)
    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)


@pytest.mark.parametrize("threads, expected", [(None, 1), (0, -1), (4, 4)])
def test_resolve_n_jobs(monkeypatch, threads, expected):
    monkeypatch.delenv(constants.THREADS_ENV_VAR, raising=False)
    assert utils.resolve_n_jobs(threads) == expected


def test_resolve_n_jobs_from_environment(monkeypatch):
    monkeypatch.setenv(constants.THREADS_ENV_VAR, "0")
    assert utils.resolve_n_jobs() == -1
    assert utils.resolve_n_jobs(3) == 3
    with pytest.raises(ValueError):
        utils.resolve_n_jobs(-2)


def test_save_results_writes_empty_cells_for_nan(tmp_path):
    path = tmp_path / "nested" / "out.csv"
    utils.save_results(pd.DataFrame({"k": [1, 2], "value": [0.1, np.nan]}), path)
    assert path.read_text() == "k,value\n1,0.10000000000000001\n2,\n"
