from .bench import BenchReport, CorrectnessError, bench, bench_case
from .kernels import (ShapeError, bmm, bmm_backward, broadcast_binop, broadcast_binop_backward, concat,
                      concat_backward, conv1d_k1, conv1d_k1_backward, conv1d_k1_naive, cross_entropy,
                      log_softmax, matmul, matmul_backward, matmul_reference, maxpool_points,
                      maxpool_points_backward, relu, relu_backward, softmax, softmax_backward)

__all__ = [
    "BenchReport", "CorrectnessError", "ShapeError", "bench", "bench_case", "bmm", "bmm_backward",
    "broadcast_binop", "broadcast_binop_backward", "concat", "concat_backward", "conv1d_k1",
    "conv1d_k1_backward", "conv1d_k1_naive", "cross_entropy", "log_softmax", "matmul",
    "matmul_backward", "matmul_reference", "maxpool_points", "maxpool_points_backward", "relu",
    "relu_backward", "softmax", "softmax_backward",
]
