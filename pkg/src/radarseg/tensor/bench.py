"""Micro-benchmark harness comparing implementations of one operator.

Implementations are verified against the first one before anything is timed;
if any output differs beyond tolerance no timings are produced.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import kernels

CSV_COLUMNS = ("op", "impl", "shape", "median_us", "mean_us", "reps", "checksum")


class CorrectnessError(RuntimeError):
    """Implementations disagree; timings withheld."""


@dataclass
class BenchRow:
    op: str
    impl: str
    shape: str
    median_us: float
    mean_us: float
    reps: int
    checksum: str


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def by_impl(self) -> dict:
        return {r.impl: r for r in self.rows}

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.op, r.impl, r.shape, f"{r.median_us:.3f}", f"{r.mean_us:.3f}", r.reps, r.checksum])
        return buf.getvalue()


def checksum(out) -> str:
    return f"{float(np.asarray(out, dtype=np.float64).sum()):.6e}"


def bench(op_name: str, shape, reps: int, implementations: Mapping[str, Callable],
          args: tuple, atol: float = 1e-6, rtol: float = 1e-6, warmup: int = 1) -> BenchReport:
    """Time each implementation ``reps`` times on the same ``args``.

    The checksum column reports the checksum of the verified common output.
    """
    if reps < 10:
        raise ValueError("reps must be at least 10")
    if not implementations:
        raise ValueError("no implementations to benchmark")
    names = list(implementations)
    outs = {n: implementations[n](*args) for n in names}
    ref = np.asarray(outs[names[0]], dtype=np.float64)
    for n in names[1:]:
        o = np.asarray(outs[n], dtype=np.float64)
        if o.shape != ref.shape:
            raise CorrectnessError(f"{n} output shape {o.shape} differs from {ref.shape}")
        diff = np.max(np.abs(o - ref)) if o.size else 0.0
        bound = atol + rtol * (np.max(np.abs(ref)) if ref.size else 0.0)
        if not diff <= bound:
            raise CorrectnessError(f"{n} differs from {names[0]} by {diff:.3g} (> {bound:.3g})")
    sig = checksum(ref)
    shape_str = "x".join(str(s) for s in shape) if not isinstance(shape, str) else shape
    report = BenchReport()
    for n in names:
        fn = implementations[n]
        for _ in range(warmup):
            fn(*args)
        times = np.empty(reps)
        for i in range(reps):
            t0 = time.perf_counter()
            fn(*args)
            times[i] = time.perf_counter() - t0
        report.rows.append(BenchRow(op_name, n, shape_str, float(np.median(times) * 1e6),
                                    float(times.mean() * 1e6), reps, sig))
    return report


def _conv_case(shape, seed):
    b, n, cin, cout = shape
    gen = np.random.default_rng(seed)
    x = gen.standard_normal((b, n, cin), dtype=np.float32)
    w = (gen.standard_normal((cin, cout), dtype=np.float32) / np.sqrt(cin)).astype(np.float32)
    bias = gen.standard_normal(cout, dtype=np.float32)
    return (x, w, bias)


def _concat_fused(local, g, w, bias):
    """Concatenate-then-project without materialising the tiled global feature."""
    c = local.shape[2]
    out = kernels.conv1d_k1(local, w[:c], bias)
    out += (g @ w[c:])[:, None, :]
    return out


def _concat_tiled(local, g, w, bias):
    tiled = np.broadcast_to(g[:, None, :], local.shape[:2] + g.shape[1:])
    return kernels.conv1d_k1(kernels.concat(local, tiled), w, bias)


# Standard operator cases: name -> (default shape, implementations, argument factory)
CASES = {
    "conv1d": ((32, 256, 64, 128),
               {"naive": kernels.conv1d_k1_naive, "matmul": kernels.conv1d_k1},
               _conv_case),
    "matmul": ((512, 256, 256),
               {"reference": kernels.matmul_reference, "blas": kernels.matmul},
               lambda s, seed: tuple(np.random.default_rng(seed).standard_normal(d, dtype=np.float32)
                                     for d in ((s[0], s[1]), (s[1], s[2])))),
    "softmax": ((32, 256, 5),
                {"stable": kernels.softmax,
                 "logsumexp": lambda x: np.exp(kernels.log_softmax(x))},
                lambda s, seed: (np.random.default_rng(seed).standard_normal(s, dtype=np.float32),)),
    "maxpool": ((32, 256, 1024),
                {"argmax": lambda x: kernels.maxpool_points(x)[0], "reduce": lambda x: x.max(axis=1)},
                lambda s, seed: (np.random.default_rng(seed).standard_normal(s, dtype=np.float32),)),
    "concat": ((32, 256, 64, 1024, 512),
               {"tiled": _concat_tiled, "fused": _concat_fused},
               lambda s, seed: (
                   np.random.default_rng(seed).standard_normal((s[0], s[1], s[2]), dtype=np.float32),
                   np.random.default_rng(seed + 1).standard_normal((s[0], s[3]), dtype=np.float32),
                   (np.random.default_rng(seed + 2).standard_normal((s[2] + s[3], s[4]), dtype=np.float32)
                    / np.float32(np.sqrt(s[2] + s[3]))),
                   np.zeros(s[4], np.float32))),
}


def bench_case(op: str, reps: int = 10, shape=None, seed: int = 0) -> BenchReport:
    if op not in CASES:
        raise ValueError(f"unknown bench op {op!r}; choose from {sorted(CASES)}")
    default, impls, factory = CASES[op]
    shape = tuple(shape or default)
    # looser bound for long float32 reductions
    tol = 1e-4 if op in ("matmul", "concat") else 1e-6
    return bench(op, shape, reps, impls, factory(shape, seed), atol=tol, rtol=tol)
