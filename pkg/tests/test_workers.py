from functools import partial

import numpy as np
import pytest

from melhts.heq import histogram_1d
from melhts.models import Histogram1D
from melhts.storage import read_bytes
from melhts.workers import WorkFailure, batch_exit_code, failures_of, run_pool


def jobs():
    return [("u1", np.arange(10.0)), ("u2", np.array([])), ("u3", np.linspace(-1.0, 1.0, 7))]


@pytest.mark.parametrize("workers", [1, 2])
def test_results_keep_job_order(workers):
    results = run_pool(partial(histogram_1d, bins=4), jobs(), workers=workers)
    assert isinstance(results[0], Histogram1D)
    assert results[0].total == 10
    assert isinstance(results[2], Histogram1D)
    assert results[2].total == 7

    failure = results[1]
    assert isinstance(failure, WorkFailure)
    assert failure.utterance_id == "u2"
    assert failure.error_type == "DataError"
    assert failure.exit_code == 3


def test_storage_failures_exit_two(tmp_path):
    results = run_pool(read_bytes, [("missing", tmp_path / "absent.bin")])
    assert failures_of(results)[0].exit_code == 2


def test_batch_exit_code_is_most_severe():
    io_failure = WorkFailure(utterance_id="a", error_type="StorageError", message="", exit_code=2)
    data_failure = WorkFailure(utterance_id="b", error_type="DataError", message="", exit_code=3)
    assert batch_exit_code(["ok", io_failure]) == 2
    assert batch_exit_code([io_failure, "ok", data_failure]) == 3
    assert batch_exit_code(["ok"]) == 0
    assert batch_exit_code([]) == 0
