"""End-to-end runs on Musk1; minutes to an hour, so marked slow."""

import os
from pathlib import Path

import pytest

from citation_mil.config import CnnSearchSettings, StackSearchSettings
from citation_mil.genome import evolve, front_entries
from citation_mil.ingest import load_musk_csv, normalize_minmax
from citation_mil.nsga2 import hypervolume
from citation_mil.stacking import build_meta_dataset, stack_entries, tune_stack

pytestmark = pytest.mark.slow

JOBS = os.cpu_count() or 1
MUSK1_PATH = Path(__file__).resolve().parent.parent / "data" / "clean1.data"


@pytest.fixture(scope="module")
def musk1_run():
    if not MUSK1_PATH.exists():
        pytest.skip("data/clean1.data not present (run scripts/data_collection/download_musk1.py)")
    train = normalize_minmax(load_musk_csv(MUSK1_PATH))
    front = evolve(train, CnnSearchSettings(), seed=0, jobs=JOBS)
    return train, front, front_entries(front, train)


def _points(entries):
    return [(e["acc_pos"], e["acc_neg"]) for e in entries]


def test_cnn_front_reaches_both_extremes(musk1_run):
    _, _, entries = musk1_run
    points = _points(entries)
    assert any(neg == 1.0 and pos >= 0.85 for pos, neg in points)
    assert any(pos == 1.0 and neg >= 0.78 for pos, neg in points)


def test_stacking_keeps_the_trade_off(musk1_run):
    train, front, entries = musk1_run
    meta = build_meta_dataset(train, front, jobs=JOBS)
    stack_points = _points(stack_entries(tune_stack(meta, StackSearchSettings(), seed=0, jobs=JOBS)))
    assert hypervolume(stack_points) >= hypervolume(_points(entries)) - 0.02
    assert max(min(point) for point in stack_points) >= 0.90


def test_front_independent_of_job_count(musk1_run):
    train, _, entries = musk1_run
    serial = front_entries(evolve(train, CnnSearchSettings(), seed=0, jobs=1), train)
    assert serial == entries
