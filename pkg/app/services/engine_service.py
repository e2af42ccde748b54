# app/services/engine_service.py

"""
Engine Service
--------------

Runs the distributed iteration

    X(n+1) = P X(n) + a(n) (h(X(n)) + M̃(n+1))

and stores every iterate and noise draw, so later analysis works on the
realized noise. Replicas are independent and can be fanned out to a
process pool; each owns a generator seeded with ``master_seed ^ index``.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, Sequence

import numpy as np

from app.core.config import settings
from app.core.exceptions import NonFinite, OutOfDomain
from app.core.run_log import log_run_event
from app.models import GossipModel, ProblemInstance, RunRecord, StepSchedule, TimeGrid


logger = logging.getLogger(__name__)


def _replica_run(args: tuple) -> RunRecord:
    problem, schedule, n_max, seed, cap, replica = args
    return EngineService.run(problem, schedule, n_max, seed, cap, replica)


class EngineService:
    """
    Service executing and replaying runs of the distributed iteration.
    """

    @staticmethod
    def step_update(
        problem: ProblemInstance,
        X: np.ndarray,
        a_n: float,
        noise: np.ndarray,
    ) -> np.ndarray:
        """
        One transition of the iteration.

        :param problem: Problem instance (gossip matrix and drift).
        :type problem: ProblemInstance

        :param X: Current iterate X(n), shape (M, d).
        :type X: np.ndarray

        :param a_n: Step a(n).
        :type a_n: float

        :param noise: Draw M̃(n+1).
        :type noise: np.ndarray

        :return: X(n+1).
        :rtype: np.ndarray
        """

        return problem.gossip.P @ X + a_n * (problem.drift(X) + noise)

    @staticmethod
    def run(
        problem: ProblemInstance,
        schedule: StepSchedule,
        n_max: int,
        seed: int,
        cap: Optional[float] = None,
        replica: int = 0,
        initial: Optional[np.ndarray] = None,
    ) -> RunRecord:
        """
        Iterate ``n_max`` steps from the problem's initial state.

        The run is truncated (and flagged unbounded) at the first n with
        ‖X(n)‖₂ not below ``cap``.

        :param problem: Validated problem.
        :type problem: ProblemInstance

        :param schedule: Step schedule.
        :type schedule: StepSchedule

        :param n_max: Number of steps.
        :type n_max: int

        :param seed: Seed of the replica generator.
        :type seed: int

        :param cap: Boundedness cap; settings.BOUNDEDNESS_CAP when None.
        :type cap: Optional[float]

        :param replica: Replica index stored on the record.
        :type replica: int

        :param initial: Override of the initial state.
        :type initial: Optional[np.ndarray]

        :raises NonFinite: With the index of the first non-finite iterate.

        :return: The record.
        :rtype: RunRecord
        """

        cap = settings.BOUNDEDNESS_CAP if cap is None else cap
        rng = np.random.default_rng(seed)
        a = schedule.steps(np.arange(n_max))
        start = problem.initial if initial is None else np.asarray(initial, dtype=float)

        X = np.empty((n_max + 1,) + start.shape)
        noise = np.empty((n_max,) + start.shape)
        X[0] = start

        for n in range(n_max):
            if not np.linalg.norm(X[n]) < cap:
                log_run_event("capped", "warning", replica=replica, step=n, seed=seed)
                return RunRecord(X[:n + 1].copy(), noise[:n].copy(), a[:n].copy(), seed, False, replica)
            noise[n] = problem.noise.sample(X[n], rng)
            X[n + 1] = EngineService.step_update(problem, X[n], a[n], noise[n])
            if not np.all(np.isfinite(X[n + 1])):
                raise NonFinite("iterate became non-finite", step=n + 1)

        bounded = bool(np.linalg.norm(X[n_max]) < cap)
        return RunRecord(X, noise, a, seed, bounded, replica)

    @staticmethod
    def interpolate(record: RunRecord, grid: TimeGrid, t) -> np.ndarray:
        """
        Piecewise-linear path X̄(t) with X̄(t(n)) = X(n).

        :param record: Simulated run.
        :type record: RunRecord

        :param grid: Time grid covering the run.
        :type grid: TimeGrid

        :param t: Time or array of times.
        :type t: float | np.ndarray

        :raises OutOfDomain: If some t lies outside [t(0), t(n_max)].

        :return: X̄(t), shape (M, d) or (len(t), M, d).
        :rtype: np.ndarray
        """

        times = grid.t[:record.n_steps + 1]
        query = np.asarray(t, dtype=float)
        if np.any(query < times[0]) or np.any(query > times[-1]):
            raise OutOfDomain(f"time outside [{times[0]:.6g}, {times[-1]:.6g}]")
        if record.n_steps == 0:
            return np.broadcast_to(record.X[0], query.shape + record.X.shape[1:]).copy()

        j = np.clip(np.searchsorted(times, query, side="right") - 1, 0, record.n_steps - 1)
        span = times[j + 1] - times[j]
        w = np.where(span > 0, (query - times[j]) / np.where(span > 0, span, 1.0), 0.0)
        w = w[..., None, None]
        left, right = record.X[j], record.X[j + 1]
        return np.where(w == 1.0, right, np.where(w == 0.0, left, left + w * (right - left)))

    @staticmethod
    def disagreement(X: np.ndarray, gossip: GossipModel) -> float:
        """‖X − ΠX‖ in the Frobenius norm."""
        X = np.asarray(X, dtype=float)
        return float(np.linalg.norm(X - gossip.Pi @ X))

    @staticmethod
    def replica_seed(master_seed: int, index: int) -> int:
        return int(master_seed) ^ int(index)

    @staticmethod
    def resolve_workers(workers: Optional[int]) -> int:
        """0 or None means machine parallelism."""
        workers = settings.DEFAULT_WORKERS if workers is None else workers
        return max(1, workers or os.cpu_count() or 1)

    @staticmethod
    def map_replicas(fn: Callable[[Any], Any], tasks: Sequence[Any], workers: Optional[int] = None) -> List[Any]:
        """
        Apply a module-level ``fn`` to every task, in order.

        Runs in-process for one worker or one task, otherwise on a process pool.
        """

        count = EngineService.resolve_workers(workers)
        if count == 1 or len(tasks) <= 1:
            return [fn(task) for task in tasks]
        with ProcessPoolExecutor(max_workers=min(count, len(tasks))) as executor:
            return list(executor.map(fn, tasks))

    @staticmethod
    def run_replicas(
        problem: ProblemInstance,
        schedule: StepSchedule,
        n_max: int,
        master_seed: int,
        replicas: int,
        workers: Optional[int] = None,
        cap: Optional[float] = None,
        indices: Optional[Iterable[int]] = None,
    ) -> List[RunRecord]:
        """
        Run independent replicas with seeds ``master_seed ^ index``.

        :return: Records ordered by replica index.
        :rtype: List[RunRecord]
        """

        indices = list(range(replicas)) if indices is None else list(indices)
        tasks = [
            (problem, schedule, n_max, EngineService.replica_seed(master_seed, i), cap, i)
            for i in indices
        ]
        records = EngineService.map_replicas(_replica_run, tasks, workers)
        log_run_event(
            "replicas_finished", "success",
            replicas=len(records), capped=sum(not r.bounded for r in records),
        )
        return records
