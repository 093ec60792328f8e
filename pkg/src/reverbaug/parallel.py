"""Order-preserving process-pool map used by the batch builders."""
from concurrent.futures import ProcessPoolExecutor


def pmap(fn, tasks, jobs=1):
    """``[fn(t) for t in tasks]``, spread over ``jobs`` processes when ``jobs > 1``.

    Results come back in task order, and every task carries its own seed, so
    the output does not depend on ``jobs``.
    """
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=int(jobs)) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * int(jobs)))))
