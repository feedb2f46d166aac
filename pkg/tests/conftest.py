"""Shared builders for the test suite plus the acceptance summary hook."""

from __future__ import annotations

import numpy as np
import pytest

from enclip.corpus import EmbeddingMatrix, ModelSet
from enclip.search import RetrievalHit

# acceptance tests append (criterion, ok, detail) here; the terminal summary
# hook prints one line per criterion even without -s
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.fixture
def acceptance_log():
    def log(name: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS.append((name, ok, detail))
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        print(line)
        assert ok, line

    return log


def unit_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def make_matrix(
    vectors, model_id: str = "m", epoch: int = 0, ids: list[str] | None = None
) -> EmbeddingMatrix:
    vecs = unit_rows(vectors).astype(np.float32)
    if ids is None:
        ids = [f"it{i:03d}" for i in range(len(vecs))]
    return EmbeddingMatrix(
        model_id=model_id,
        epoch=epoch,
        dim=vecs.shape[1],
        item_ids=list(ids),
        vectors=vecs,
        normalized=True,
    )


def make_model_set(vector_stack, epochs: list[int], ids: list[str] | None = None) -> ModelSet:
    """One matrix per layer of vector_stack (z, n, dim), epoch-tagged."""
    mats = [
        make_matrix(vector_stack[i], model_id=f"m{epochs[i]:03d}", epoch=epochs[i], ids=ids)
        for i in range(len(epochs))
    ]
    return ModelSet(models=mats)


def hits_from_ids(item_ids: list[str], model_index: int, sims: list[float] | None = None) -> list[RetrievalHit]:
    if sims is None:
        sims = [0.9 - 0.1 * i for i in range(len(item_ids))]
    return [
        RetrievalHit(item_id=iid, model_index=model_index, similarity=s, rank=r)
        for r, (iid, s) in enumerate(zip(item_ids, sims), start=1)
    ]
