"""
Finite-difference checks for the tensor operations.

Every check reduces the operation's output to a scalar through a fixed random
projection, so each output element contributes with its own weight.
"""

from typing import Callable

import numpy as np

from inbetween.tensor import (
    Tensor,
    add,
    concat_channels,
    conv2d,
    dense,
    gradient_check,
    leaky_relu,
    mul,
    reduce_mean,
    reduce_sum,
    reshape,
    scale,
    sigmoid,
    slice_channels,
    softmax_channels,
    sub,
    tanh,
    transposed_conv2d,
)

from .registry import gradcheck


SEED_COUNT = 5


def projected(out: Tensor, seed: int = 99) -> Tensor:
    """Scalar ``sum(out * R)`` for a fixed random R."""
    weights = np.random.default_rng(seed).standard_normal(out.shape)
    return reduce_sum(mul(out, Tensor(weights, dtype=out.dtype)))


def away_from_zero(rng: np.random.Generator, shape, margin: float = 0.1) -> np.ndarray:
    """Random values with |x| >= margin, keeping finite differences off the kink at 0."""
    magnitude = rng.uniform(margin, 1.0, size=shape)
    return magnitude * rng.choice([-1.0, 1.0], size=shape)


def over_seeds(base_seed: int, case: Callable[[np.random.Generator], float]) -> float:
    """Worst error of ``case`` over SEED_COUNT generators derived from ``base_seed``."""
    errors = [case(np.random.default_rng([base_seed, s])) for s in range(SEED_COUNT)]
    if not all(np.isfinite(errors)):
        return float("inf")
    return float(max(errors))


@gradcheck("add", "broadcast addition, both operands")
def check_add() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a, b: projected(add(a, b)),
                              [rng.standard_normal((2, 3, 4)), rng.standard_normal((1, 3, 1))])

    return over_seeds(1, case)


@gradcheck("sub", "broadcast subtraction, both operands")
def check_sub() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a, b: projected(sub(a, b)),
                              [rng.standard_normal((2, 3, 4)), rng.standard_normal((4,))])

    return over_seeds(2, case)


@gradcheck("mul", "broadcast multiplication, both operands")
def check_mul() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a, b: projected(mul(a, b)),
                              [rng.standard_normal((2, 3, 4)), rng.standard_normal((2, 1, 4))])

    return over_seeds(3, case)


@gradcheck("scale", "multiplication by a constant")
def check_scale() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a: projected(scale(a, -2.5)), [rng.standard_normal((3, 5))])

    return over_seeds(4, case)


@gradcheck("concat_channels", "concatenation along axis 1")
def check_concat() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a, b: projected(concat_channels([a, b])),
                              [rng.standard_normal((2, 3, 4, 4)), rng.standard_normal((2, 2, 4, 4))])

    return over_seeds(5, case)


@gradcheck("slice_channels", "channel slice")
def check_slice() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a: projected(slice_channels(a, 1, 3)), [rng.standard_normal((2, 4, 3, 3))])

    return over_seeds(6, case)


@gradcheck("reshape", "reshape")
def check_reshape() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a: projected(reshape(a, (6, 4))), [rng.standard_normal((2, 3, 4))])

    return over_seeds(7, case)


@gradcheck("reduce_mean", "mean of all entries")
def check_reduce_mean() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a: scale(reduce_mean(mul(a, a)), 3.0), [rng.standard_normal((3, 4))])

    return over_seeds(8, case)


@gradcheck("reduce_sum", "sum of all entries")
def check_reduce_sum() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a: reduce_sum(mul(a, a)), [rng.standard_normal((3, 4))])

    return over_seeds(9, case)


@gradcheck("leaky_relu", "leaky rectifier, slope 0.2")
def check_leaky_relu() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a: projected(leaky_relu(a, 0.2)), [away_from_zero(rng, (4, 5))])

    return over_seeds(10, case)


@gradcheck("tanh", "hyperbolic tangent")
def check_tanh() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a: projected(tanh(a)), [rng.standard_normal((4, 5))])

    return over_seeds(11, case)


@gradcheck("sigmoid", "logistic sigmoid")
def check_sigmoid() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a: projected(sigmoid(a)), [2.0 * rng.standard_normal((4, 5))])

    return over_seeds(12, case)


@gradcheck("softmax_channels", "softmax over axis 1")
def check_softmax() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda a: projected(softmax_channels(a)), [rng.standard_normal((2, 4, 3, 3))])

    return over_seeds(13, case)


@gradcheck("dense", "affine layer: input, weight and bias")
def check_dense() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda x, w, b: projected(dense(x, w, b)),
                              [rng.standard_normal((3, 5)), rng.standard_normal((4, 5)), rng.standard_normal(4)])

    return over_seeds(14, case)


@gradcheck("conv2d", "convolution, stride 2 padding 1: input, kernel and bias")
def check_conv2d() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda x, k, b: projected(conv2d(x, k, b, stride=2, padding=1)),
                              [rng.standard_normal((2, 3, 8, 8)), rng.standard_normal((4, 3, 4, 4)),
                               rng.standard_normal(4)])

    return over_seeds(15, case)


@gradcheck("conv2d_stride1", "convolution, stride 1 no padding, odd sizes")
def check_conv2d_stride1() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda x, k, b: projected(conv2d(x, k, b, stride=1, padding=0)),
                              [rng.standard_normal((1, 2, 5, 6)), rng.standard_normal((3, 2, 3, 2)),
                               rng.standard_normal(3)])

    return over_seeds(16, case)


@gradcheck("transposed_conv2d", "transposed convolution, stride 2 padding 1: input, kernel and bias")
def check_transposed_conv2d() -> float:
    def case(rng: np.random.Generator) -> float:
        return gradient_check(lambda x, k, b: projected(transposed_conv2d(x, k, b, stride=2, padding=1)),
                              [rng.standard_normal((2, 3, 4, 4)), rng.standard_normal((3, 2, 4, 4)),
                               rng.standard_normal(2)])

    return over_seeds(17, case)
