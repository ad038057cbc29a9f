"""
Async fan-out of independent lineage jobs.

Jobs run in worker threads (asyncio.to_thread) with at most `jobs` in flight.
A failing job is logged and captured in its outcome; it never cancels the
others.
"""
import asyncio
from dataclasses import dataclass
from typing import Any, Callable, Dict, Generic, Hashable, Mapping, Optional, TypeVar

from scenesketch.core.logging import logger

T = TypeVar("T")


@dataclass
class JobOutcome(Generic[T]):
    key: Hashable
    result: Optional[T] = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class CellRunner:
    """Run keyed callables concurrently and collect their outcomes."""

    def __init__(self, jobs: int = 1):
        if jobs < 1:
            raise ValueError("jobs must be >= 1")
        self.jobs = jobs

    async def _run_one(self, sem: asyncio.Semaphore, key: Hashable, job: Callable[[], Any]) -> JobOutcome:
        async with sem:
            logger.debug(f"Job {key} started")
            try:
                result = await asyncio.to_thread(job)
            except Exception as e:
                logger.error(f"Job {key} failed: {e}")
                return JobOutcome(key=key, error=e)
            logger.debug(f"Job {key} finished")
            return JobOutcome(key=key, result=result)

    async def run(self, tasks: Mapping[Hashable, Callable[[], Any]]) -> Dict[Hashable, JobOutcome]:
        """Outcomes keyed like `tasks`, in the order of `tasks`."""
        sem = asyncio.Semaphore(self.jobs)
        outcomes = await asyncio.gather(*(self._run_one(sem, key, job) for key, job in tasks.items()))
        return {o.key: o for o in outcomes}

    def run_sync(self, tasks: Mapping[Hashable, Callable[[], Any]]) -> Dict[Hashable, JobOutcome]:
        """Blocking wrapper; runs jobs inline when jobs == 1 so tracebacks stay simple."""
        if self.jobs == 1:
            outcomes = {}
            for key, job in tasks.items():
                logger.debug(f"Job {key} started")
                try:
                    outcomes[key] = JobOutcome(key=key, result=job())
                except Exception as e:
                    logger.error(f"Job {key} failed: {e}")
                    outcomes[key] = JobOutcome(key=key, error=e)
            return outcomes
        return asyncio.run(self.run(tasks))
