"""Unit quaternions as points of S^3 in R^4.

Ambient order follows the stereographic embedding ``(x1, x2, x3, x4)`` with
the real part in the last slot: ``q = x4 + x1 i + x2 j + x3 k``.
"""

import jax.numpy as jnp


def mul(a, b):
    """Hamilton product in ambient order (i, j, k, real)."""
    a1, a2, a3, a0 = a[0], a[1], a[2], a[3]
    b1, b2, b3, b0 = b[0], b[1], b[2], b[3]
    return jnp.stack([
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
    ])


def conj(a):
    return jnp.stack([-a[0], -a[1], -a[2], a[3]])


def exp_imaginary(angle, axis):
    """exp(angle * n) for a unit imaginary axis n = (n1, n2, n3)."""
    return jnp.concatenate([jnp.sin(angle) * axis, jnp.reshape(jnp.cos(angle), (1,))])


I = jnp.array([1.0, 0.0, 0.0, 0.0])
J = jnp.array([0.0, 1.0, 0.0, 0.0])
K = jnp.array([0.0, 0.0, 1.0, 0.0])


def left_invariant_frame(q):
    """The three vector fields q*i, q*j, q*k at q (rows)."""
    return jnp.stack([mul(q, I), mul(q, J), mul(q, K)])
