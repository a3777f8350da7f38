"""Pruned engine vs. full-materialization baseline on synthetic graphs."""
from __future__ import annotations

import hashlib
import math
import multiprocessing as mp
import random
import statistics
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field

from .querylang import ThresholdQuery, as_threshold, parse_query
from .relcore import Database, atom_bindings
from .threshold import PruneStats, answers_grouped_up_to, build_record_structure, enumerate_tq

TEMPLATES = ("path", "neigh", "conn")


@dataclass
class BenchConfig:
    template: str = "neigh"
    n: int = 1000
    m0: int = 10
    k: int = 3
    threshold: int = 10
    seed: int = 1
    repetitions: int = 5
    timeout: float = 60.0
    max_rows: int = 5_000_000   # baseline intermediate-size budget, reported as T/O

    def __post_init__(self):
        if self.template not in TEMPLATES:
            raise ValueError(f"unknown template {self.template!r}")
        if not self.n > self.m0 >= 1:
            raise ValueError("need n > m0 >= 1")
        if self.k < 1 or self.repetitions < 1 or self.threshold < 1:
            raise ValueError("k, repetitions and threshold must be positive")


def generate_ba(n: int, m0: int, seed: int) -> Database:
    """Preferential attachment: a clique on m0+1 nodes, then m0 edges per new node.

    Edges point from the newer node to the older one.
    """
    if not n > m0 >= 1:
        raise ValueError("need n > m0 >= 1")
    rng = random.Random(seed)
    edges = []
    pool = []  # every node repeated once per incident edge
    for j in range(m0 + 1):
        for i in range(j):
            edges.append((j, i))
            pool += [i, j]
    for v in range(m0 + 1, n):
        targets = set()
        while len(targets) < m0:
            targets.add(pool[rng.randrange(len(pool))])
        for u in sorted(targets):
            edges.append((v, u))
            pool += [u, v]
    return Database({"R": [(f"v{a}", f"v{b}") for a, b in edges]})


def degrees(D: Database) -> dict:
    deg = defaultdict(int)
    for a, b in D.get("R"):
        deg[a] += 1
        deg[b] += 1
    return dict(deg)


def template_query(template: str, k: int, c: int) -> ThresholdQuery:
    if k < 1:
        raise ValueError("k must be positive")
    if template == "path":
        xs = [f"x{i}" for i in range(k + 1)]
        body = ", ".join(f"R({xs[i]},{xs[i + 1]})" for i in range(k))
        return as_threshold(parse_query(f"path(x0,x{k}) :- {body}"))
    if template == "neigh":
        xs = ["x"] + [f"x{i}" for i in range(1, k)] + ["y"]
        chain = ", ".join(f"R({xs[i]},{xs[i + 1]})" for i in range(k))
        return parse_query(f"neigh(x) :- R(x,w) #exists[{c},inf](y) . {chain}")
    if template == "conn":
        ws = ["x"] + [f"w{i}" for i in range(1, k)] + ["z"]
        ys = ["x"] + [f"y{i}" for i in range(1, k)] + ["z"]
        outer = ", ".join(f"R({ws[i]},{ws[i + 1]})" for i in range(k))
        inner = ", ".join(f"R({ys[i]},{ys[i + 1]})" for i in range(k))
        tally = ",".join(ys[1:-1])
        return parse_query(f"conn(x,z) :- {outer} #exists[{c},inf]({tally}) . {inner}")
    raise ValueError(f"unknown template {template!r}")


# -- engines -------------------------------------------------------------------

class Budget(Exception):
    pass


def run_pruned(template: str, t: ThresholdQuery, D: Database, c: int):
    stats = PruneStats()
    if template == "path":
        A = answers_grouped_up_to(t.outer, (), c, D, stats=stats)
        head = t.outer.free_vars
        ans = {tuple(b[x] for x in head) for b in A.bindings()}
        return {"answers": ans, "peak": stats.peak_rows, "max_group": stats.max_group}
    s = build_record_structure(t, D, stats=stats)
    ans = set(enumerate_tq(s))
    peak = max(stats.peak_rows, max((len(r) for r in s.records.values()), default=0))
    return {"answers": ans, "peak": peak, "max_group": stats.max_group}


def _materialize(atoms, D: Database, max_rows: int):
    """Left-deep join of all atoms keeping every variable. Returns (vars, rows, peak)."""
    first = atom_bindings(atoms[0], D)
    vars_ = list(first.vars)
    rows = list(first.rows)
    peak = len(rows)
    for a in atoms[1:]:
        nxt = atom_bindings(a, D)
        shared = [x for x in nxt.vars if x in vars_]
        new = [x for x in nxt.vars if x not in vars_]
        li = [vars_.index(x) for x in shared]
        ri = [nxt.index(x) for x in shared]
        ni = [nxt.index(x) for x in new]
        idx = defaultdict(list)
        for r in nxt.rows:
            idx[tuple(r[i] for i in ri)].append(tuple(r[i] for i in ni))
        out = []
        for r in rows:
            for ext in idx.get(tuple(r[i] for i in li), ()):
                out.append(r + ext)
            if len(out) > max_rows:
                raise Budget()
        rows = out
        vars_ += new
        peak = max(peak, len(rows))
    return vars_, rows, peak


def _project(vars_, rows, head):
    ix = [vars_.index(x) for x in head]
    return {tuple(r[i] for i in ix) for r in rows}


def run_baseline(template: str, t: ThresholdQuery, D: Database, c: int, max_rows: int):
    if template == "path":
        vs, rows, peak = _materialize(list(t.outer.atoms), D, max_rows)
        full = _project(vs, rows, t.outer.free_vars)
        return {"answers": set(sorted(full)[:c]), "full": full, "peak": peak, "max_group": None}
    xs = t.free
    vs, rows, peak = _materialize(list(t.outer.atoms), D, max_rows)
    qd = _project(vs, rows, xs)
    pv, prows, ppeak = _materialize(list(t.inner.atoms), D, max_rows)
    pd = _project(pv, prows, [x for x in t.inner.head if x in pv])
    pos = [x for x in t.inner.head if x in pv]
    ix = [pos.index(x) for x in xs]
    counts = defaultdict(int)
    for r in pd:
        counts[tuple(r[i] for i in ix)] += 1
    ans = {e for e in qd if t.lo <= counts.get(e, 0) and (t.hi is None or counts.get(e, 0) <= t.hi)}
    return {"answers": ans, "peak": max(peak, ppeak), "max_group": None}


# -- timing harness ------------------------------------------------------------

def _child(conn, fn, args):
    try:
        t0 = time.perf_counter()
        out = fn(*args)
        out["seconds"] = time.perf_counter() - t0
        conn.send(("ok", out))
    except Budget:
        conn.send(("T/O", None))
    except BaseException as e:  # pragma: no cover - reported to the parent
        conn.send(("error", repr(e)))
    finally:
        conn.close()


def timed(fn, args, timeout: float):
    """Run fn(*args) in a forked process. Returns (status, result dict or None)."""
    try:
        ctx = mp.get_context("fork")
    except ValueError:  # pragma: no cover - platforms without fork
        t0 = time.perf_counter()
        try:
            out = fn(*args)
        except Budget:
            return "T/O", None
        out["seconds"] = time.perf_counter() - t0
        return "ok", out
    recv, send = ctx.Pipe(duplex=False)
    proc = ctx.Process(target=_child, args=(send, fn, args))
    proc.start()
    send.close()
    status, out = "T/O", None
    if recv.poll(timeout):
        try:
            status, out = recv.recv()
        except EOFError:
            status = "error"
    proc.join(1.0)
    if proc.is_alive():
        proc.kill()
        proc.join()
    if status == "error":
        raise RuntimeError(f"engine failed: {out}")
    return status, out


def answer_hash(answers) -> str:
    h = hashlib.sha256()
    for a in sorted(answers):
        h.update("\t".join(a).encode())
        h.update(b"\n")
    return h.hexdigest()[:16]


@dataclass
class EngineResult:
    engine: str
    status: str
    median_s: float | None
    times: list = field(default_factory=list)
    peak_rows: int | None = None
    max_group: int | None = None
    answers: int | None = None
    hash: str | None = None


@dataclass
class BenchReport:
    config: BenchConfig
    results: list
    agree: bool | None

    def engine(self, name: str) -> EngineResult:
        return next(r for r in self.results if r.engine == name)

    def to_tsv(self, header: bool = True) -> str:
        cols = ["template", "n", "m0", "k", "c", "engine", "status", "median_s",
                "peak_rows", "max_group", "answers", "hash", "agree"]
        lines = ["\t".join(cols)] if header else []
        cfg = self.config
        for r in self.results:
            med = "T/O" if r.status == "T/O" else f"{r.median_s:.4f}"
            vals = [cfg.template, cfg.n, cfg.m0, cfg.k, cfg.threshold, r.engine, r.status, med,
                    r.peak_rows, r.max_group, r.answers, r.hash, self.agree]
            lines.append("\t".join("" if v is None else str(v) for v in vals))
        return "\n".join(lines) + "\n"


def run_comparison(cfg: BenchConfig, D: Database | None = None,
                   engines=("pruned", "baseline")) -> BenchReport:
    D = D if D is not None else generate_ba(cfg.n, cfg.m0, cfg.seed)
    t = template_query(cfg.template, cfg.k, cfg.threshold)
    c = cfg.threshold
    results, outputs = [], {}
    for name in engines:
        if name == "pruned":
            fn, args = run_pruned, (cfg.template, t, D, c)
        else:
            fn, args = run_baseline, (cfg.template, t, D, c, cfg.max_rows)
        times, last, status = [], None, "ok"
        for _ in range(cfg.repetitions):
            status, out = timed(fn, args, cfg.timeout)
            if status != "ok":
                break
            times.append(out["seconds"])
            last = out
        if status != "ok":
            results.append(EngineResult(name, "T/O", None))
            continue
        outputs[name] = last
        results.append(EngineResult(name, "ok", statistics.median(times), times, last["peak"],
                                    last["max_group"], len(last["answers"]), answer_hash(last["answers"])))
    agree = None
    if len(outputs) == 2:
        a, b = outputs["pruned"]["answers"], outputs["baseline"]["answers"]
        if cfg.template == "path":
            full = outputs["baseline"]["full"]
            agree = a <= full and len(a) == min(c, len(full))
        else:
            agree = a == b
    return BenchReport(cfg, results, agree)


def fit_slope(xs, ys, loglog: bool = True) -> float:
    """Least-squares slope of log(y) against log(x) (or against x)."""
    X = [math.log(x) if loglog else float(x) for x in xs]
    Y = [math.log(y) for y in ys]
    mx, my = statistics.fmean(X), statistics.fmean(Y)
    num = sum((a - mx) * (b - my) for a, b in zip(X, Y))
    den = sum((a - mx) ** 2 for a in X)
    return num / den


def config_dict(cfg: BenchConfig) -> dict:
    return asdict(cfg)
