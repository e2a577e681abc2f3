"""Random LDAG benchmark: combined-context search against the full context split."""

from __future__ import annotations

import csv
import io
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .ldag import LDAG, Variable, is_regular, label_closure
from .search import Limits, QuerySpec, identify

CSV_COLUMNS = ("seed", "n", "mode", "status", "wall_ms", "expansions", "csi_checks")
MODES = ("combined", "fullcs")


@dataclass
class BenchConfig:
    n: int = 7
    avg_degree: float = 3.0
    label_prob: float = 0.5
    latent_count: int = 2
    instances: int = 100
    timeout: float = 1800.0
    seed: int = 1
    descendant: bool = False  # require Y to be a descendant of X
    workers: int = 1
    max_expansions: int | None = None

    @classmethod
    def parse(cls, text: str) -> "BenchConfig":
        """``n=7,instances=100,seed=1`` style overrides of the defaults."""
        cfg = cls()
        types = {f.name: f.type for f in fields(cls)}
        for item in filter(None, (s.strip() for s in text.split(","))):
            key, eq, val = item.partition("=")
            key = key.strip()
            if not eq or key not in types:
                raise ValueError(f"unknown bench setting {item!r}")
            val = val.strip()
            if key == "descendant":
                setattr(cfg, key, val.lower() in ("1", "true", "yes"))
            elif key == "max_expansions":
                setattr(cfg, key, None if val.lower() == "none" else int(val))
            elif key in ("avg_degree", "label_prob", "timeout"):
                setattr(cfg, key, float(val))
            else:
                setattr(cfg, key, int(val))
        cfg.check()
        return cfg

    def check(self):
        if self.n < 2:
            raise ValueError("bench graphs need at least 2 nodes")
        if self.latent_count > self.n - 2:
            raise ValueError("too many latents for the node count")
        if not 0 <= self.label_prob <= 1:
            raise ValueError("label_prob must lie in [0, 1]")
        if self.instances < 0:
            raise ValueError("instances must be nonnegative")


@dataclass(frozen=True)
class Instance:
    seed: int
    graph: LDAG
    query: QuerySpec


def _descendants(parents: list[int], x: int) -> int:
    n = len(parents)
    out = 1 << x
    for v in range(x + 1, n):
        if parents[v] & out:
            out |= 1 << v
    return out & ~(1 << x)


def random_ldag(n: int, rng: np.random.Generator, *, avg_degree: float = 3.0,
                label_prob: float = 0.5, latent_count: int = 2,
                descendant: bool = False, max_tries: int = 1000) -> tuple[LDAG, int, int]:
    """Random regular LDAG in topological id order with a query pair (x, y).

    Each forward edge appears with probability avg_degree / (n - 1); with
    probability label_prob an edge gets one label entry drawn uniformly
    from {0, 1, *} per co-parent.  Latents are drawn among the other nodes.
    """
    p = min(1.0, avg_degree / (n - 1))
    for _ in range(max_tries):
        edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p]
        parents = [0] * n
        for a, b in edges:
            parents[b] |= 1 << a
        labels = {}
        for a, b in edges:
            others = [c for c in range(n) if (parents[b] >> c) & 1 and c != a]
            if rng.random() < label_prob and others:
                entry = tuple((c, [0, 1, None][rng.integers(3)]) for c in others)
                labels[(a, b)] = frozenset([entry])
        x, y = (int(v) for v in rng.choice(n, size=2, replace=False))
        if descendant:
            if x > y:
                x, y = y, x
            if not (_descendants(parents, x) >> y) & 1:
                continue
        rest = [v for v in range(n) if v not in (x, y)]
        latents = {int(v) for v in rng.choice(rest, size=min(latent_count, len(rest)), replace=False)}
        variables = [Variable(v, f"V{v + 1}", v not in latents) for v in range(n)]
        try:
            g = LDAG(variables, edges, labels)
        except ValueError:
            continue
        if not is_regular(label_closure(g)):
            continue
        return g, x, y
    raise RuntimeError("could not draw a regular LDAG")


def make_instance(cfg: BenchConfig, seed: int) -> Instance:
    rng = np.random.default_rng(seed)
    g, x, y = random_ldag(cfg.n, rng, avg_degree=cfg.avg_degree, label_prob=cfg.label_prob,
                          latent_count=cfg.latent_count, descendant=cfg.descendant)
    return Instance(seed, g, QuerySpec(frozenset([y]), do=frozenset([x])))


def run_instance(args) -> list[dict]:
    cfg, seed = args
    inst = make_instance(cfg, seed)
    rows = []
    for mode in MODES:
        res = identify(inst.graph, inst.query, mode=mode,
                       limits=Limits(timeout=cfg.timeout, max_expansions=cfg.max_expansions))
        rows.append({"seed": seed, "n": cfg.n, "mode": mode, "status": res.status,
                     "wall_ms": round(res.stats.wall_ms, 3), "expansions": res.stats.expansions,
                     "csi_checks": res.stats.csi_checks})
    return rows


def instance_seeds(cfg: BenchConfig) -> list[int]:
    return [cfg.seed * 100000 + k for k in range(cfg.instances)]


def run_bench(cfg: BenchConfig) -> list[dict]:
    jobs = [(cfg, s) for s in instance_seeds(cfg)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(run_instance, jobs))
    else:
        chunks = [run_instance(j) for j in jobs]
    rows = [r for c in chunks for r in c]
    rows.sort(key=lambda r: (r["n"], r["seed"], r["mode"]))
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in CSV_COLUMNS})
    return buf.getvalue()


def summarize(rows: list[dict]) -> dict:
    """Terminal fraction and median wall time per mode."""
    out = {}
    for mode in MODES:
        sel = [r for r in rows if r["mode"] == mode]
        if not sel:
            continue
        terminal = sum(r["status"] in ("identified", "na") for r in sel)
        out[mode] = {
            "instances": len(sel),
            "terminal_fraction": terminal / len(sel),
            "identified": sum(r["status"] == "identified" for r in sel),
            "median_wall_ms": statistics.median(r["wall_ms"] for r in sel),
        }
    return out
