"""Machine-independent cost counters, collected per solver run."""

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class Counters:
    hop_relaxations: int = 0
    dijkstra_pops: int = 0
    edge_scans: int = 0
    aux_edges: int = 0
    aux_vertices: int = 0
    estimate_samples: int = 0
    max_depth: int = 0
    retries: int = 0
    johnson_fallbacks: int = 0

    def as_dict(self):
        return asdict(self)


_active: ContextVar = ContextVar("negsssp_counters", default=None)


@contextmanager
def counting(counters=None):
    """Collect counters for everything run inside the block."""
    c = counters if counters is not None else Counters()
    token = _active.set(c)
    try:
        yield c
    finally:
        _active.reset(token)


def current():
    return _active.get()


def add(**amounts):
    c = _active.get()
    if c is None:
        return
    for name, value in amounts.items():
        setattr(c, name, getattr(c, name) + int(value))


def note_depth(depth):
    c = _active.get()
    if c is not None and depth > c.max_depth:
        c.max_depth = depth


def add_kernel(work):
    """Fold a kernel work array [pops, scans, hop relaxations] into the counters."""
    c = _active.get()
    if c is None:
        return
    w = np.asarray(work)
    c.dijkstra_pops += int(w[0])
    c.edge_scans += int(w[1])
    c.hop_relaxations += int(w[2])
