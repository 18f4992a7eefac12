"""In-process executor helper simulating independent distributed workers.

Tasks must not share mutable state; results are collected by submission
index, so the outcome is identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def run_tasks(tasks, max_workers: int = 1) -> list:
    """Run zero-argument callables, returning results in submission order."""
    tasks = list(tasks)
    if max_workers <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]
