"""Independent straight-loop reference implementations used as test oracles.

Everything here is deliberately written with plain Python loops and the
math module so it shares no code path with the package under test.
"""

import math

BCE_EPS = 1e-7


def matmul_loops(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0.0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            acc = 0.0
            for k in range(inner):
                acc += a[i][k] * b[k][j]
            out[i][j] = acc
    return out


def mlp_forward_loops(x_row, layers, final_sigmoid=False):
    """One sample through (W, b) layers with ReLU between, linear last."""
    h = list(x_row)
    for li, (w, b) in enumerate(layers):
        out = []
        for j in range(len(b)):
            acc = b[j]
            for i in range(len(h)):
                acc += h[i] * w[i][j]
            out.append(acc)
        if li < len(layers) - 1:
            out = [v if v > 0 else 0.0 for v in out]
        h = out
    if final_sigmoid:
        h = [1.0 / (1.0 + math.exp(-v)) for v in h]
    return h


def au_loss_loops(preds, labels):
    b, n = len(preds), len(preds[0])
    total = 0.0
    for i in range(n):
        acc = 0.0
        for r in range(b):
            p = min(max(preds[r][i], BCE_EPS), 1.0 - BCE_EPS)
            y = labels[r][i]
            acc += -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))
        total += acc / b
    return total


def discrepancy_loops(p1, p2):
    b, n = len(p1), len(p1[0])
    acc = 0.0
    for r in range(b):
        for i in range(n):
            acc += abs(p1[r][i] - p2[r][i])
    return acc / b


def pair_moment_distance_loops(e1, e2, moment_order):
    """Single pair of embedding vectors."""
    total = 0.0
    for k in range(1, moment_order + 1):
        sq = 0.0
        for i in range(len(e1)):
            sq += (e1[i] ** k - e2[i] ** k) ** 2
        total += math.sqrt(sq)
    return total


def pair_moment_distance_batch_loops(e1, e2, moment_order):
    dists = [pair_moment_distance_loops(a, b, moment_order) for a, b in zip(e1, e2)]
    return sum(dists) / len(dists)


def pm2_loss_loops(e, ef, em, moment_order):
    acc = 0.0
    for a, f, m in zip(e, ef, em):
        acc += (pair_moment_distance_loops(a, f, moment_order)
                + pair_moment_distance_loops(a, m, moment_order)
                + pair_moment_distance_loops(f, m, moment_order)) / 3.0
    return acc / len(e)


def overall_moment_distance_loops(batch_a, batch_b, moment_order):
    d = len(batch_a[0])
    total = 0.0
    for k in range(1, moment_order + 1):
        sq = 0.0
        for i in range(d):
            ma = sum(row[i] ** k for row in batch_a) / len(batch_a)
            mb = sum(row[i] ** k for row in batch_b) / len(batch_b)
            sq += (ma - mb) ** 2
        total += math.sqrt(sq)
    return total


def adamw_trace_loops(theta, grads, lr, weight_decay,
                      beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar parameter through a sequence of gradients; returns the trace."""
    m = v = 0.0
    trace = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        theta = theta - lr * (m_hat / (math.sqrt(v_hat) + eps) + weight_decay * theta)
        trace.append(theta)
    return trace


def finite_difference(f, x, step=1e-5):
    """Central finite-difference gradient of a scalar function of a flat list."""
    grad = []
    for i in range(len(x)):
        hi = list(x)
        lo = list(x)
        hi[i] += step
        lo[i] -= step
        grad.append((f(hi) - f(lo)) / (2 * step))
    return grad
