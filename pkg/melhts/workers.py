# melhts/workers.py

from multiprocessing import Pool
from typing import Callable, Iterable, List, Sequence, Tuple, TypeVar, Union

from pydantic import BaseModel
from tqdm import tqdm

from melhts.config import EXIT_DATA_ERROR, EXIT_IO_ERROR, EXIT_OK, logger
from melhts.exceptions import MelHtsError

T = TypeVar("T")


class WorkFailure(BaseModel):
    """
    A failed work item. Exceptions are flattened into this record because
    the package exceptions take extra constructor arguments and do not
    survive the trip back from a worker process.
    """
    utterance_id: str
    error_type: str
    message: str
    exit_code: int


class _Guarded:
    """Runs `func(item)` and turns expected failures into WorkFailure records."""

    def __init__(self, func: Callable):
        self.func = func

    def __call__(self, job: Tuple[str, object]):
        utterance_id, item = job
        try:
            return self.func(item)
        except MelHtsError as e:
            return WorkFailure(utterance_id=utterance_id, error_type=type(e).__name__,
                               message=str(e), exit_code=e.exit_code)
        except OSError as e:
            return WorkFailure(utterance_id=utterance_id, error_type=type(e).__name__,
                               message=str(e), exit_code=EXIT_IO_ERROR)
        except ValueError as e:
            # pydantic validation of a record built from bad data
            return WorkFailure(utterance_id=utterance_id, error_type=type(e).__name__,
                               message=str(e), exit_code=EXIT_DATA_ERROR)


def run_pool(func: Callable[[T], object], jobs: Sequence[Tuple[str, T]], workers: int = 1,
             desc: str = "utterances") -> List[Union[object, WorkFailure]]:
    """
    Applies `func` to every (id, item) job, in order, on a bounded process
    pool (in-process when workers == 1). `func` must be picklable.

    Returns:
        One entry per job: the function result or a WorkFailure.
    """
    guarded = _Guarded(func)
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        results = [guarded(job) for job in tqdm(jobs, desc=desc, disable=len(jobs) < 2)]
    else:
        with Pool(processes=min(workers, len(jobs))) as pool:
            results = list(tqdm(pool.imap(guarded, jobs), total=len(jobs), desc=desc))
    for result in results:
        if isinstance(result, WorkFailure):
            logger.error(f"event=utterance_failed id={result.utterance_id} error={result.error_type} "
                         f"detail={result.message}")
    return results


def failures_of(results: Iterable[object]) -> List[WorkFailure]:
    return [r for r in results if isinstance(r, WorkFailure)]


def batch_exit_code(results: Iterable[object]) -> int:
    """Exit code of the most severe failure (data errors outrank I/O errors), 0 when none failed."""
    return max((f.exit_code for f in failures_of(results)), default=EXIT_OK)
