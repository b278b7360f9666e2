"""Reference solution for the 4-sample, 2-class kernel regression fixture.

Solves min_a (1/N) sum_j CE(z_j, y_j) + (lam/2) sum_c a_c^T K_cc a_c directly in
alpha with scipy's trust-region Newton solver, then prints alpha, the train
predictions and the predictions on a small test kernel.
"""
import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

N, C, LAM = 4, 2, 0.1
K11 = np.array([[4, 1, 0, 1], [1, 3, 1, 0], [0, 1, 2, 0.5], [1, 0, 0.5, 3]], float)
K22 = np.array([[3, 1, 1, 0], [1, 3, 0, 1], [1, 0, 4, 1], [0, 1, 1, 3]], float)
CROSS = 0.2 * np.eye(N)
LABELS = np.array([1, 2, 1, 2])
# Test-vs-train diagonal blocks for two test points; column i is train sample i.
T11 = np.array([[2, 0.5, 1, 0], [0, 1, 0, 2]], float)
T22 = np.array([[0.5, 2, 0, 1], [1, 0, 3, 0.5]], float)


def interleave(blocks, rows):
    out = np.zeros((rows * C, N * C))
    for (a, b), m in blocks.items():
        for j in range(rows):
            for i in range(N):
                out[j * C + a, i * C + b] = m[j, i]
    return out


def main():
    K = interleave({(0, 0): K11, (1, 1): K22, (0, 1): CROSS, (1, 0): CROSS}, N)
    assert np.linalg.eigvalsh(K).min() > 0
    blocks = [K11, K22]
    y = LABELS - 1

    def parts(a):
        a = a.reshape(N, C)
        z = np.column_stack([blocks[c] @ a[:, c] for c in range(C)])
        return a, z

    def f(a):
        a, z = parts(a)
        ce = np.mean(logsumexp(z, axis=1) - z[np.arange(N), y])
        return ce + 0.5 * LAM * sum(a[:, c] @ blocks[c] @ a[:, c] for c in range(C))

    def grad(a):
        a, z = parts(a)
        r = softmax(z, axis=1)
        r[np.arange(N), y] -= 1
        g = np.column_stack([blocks[c] @ r[:, c] / N + LAM * blocks[c] @ a[:, c] for c in range(C)])
        return g.ravel()

    def hess(a):
        a, z = parts(a)
        p = softmax(z, axis=1)
        H = np.zeros((N * C, N * C))
        for j in range(N):
            W = np.diag(p[j]) - np.outer(p[j], p[j])
            D = np.zeros((C, N * C))
            for c in range(C):
                D[c, c::C] = blocks[c][j]
            H += D.T @ W @ D / N
        for c in range(C):
            H[c::C, c::C] += LAM * blocks[c]
        return H

    res = minimize(f, np.zeros(N * C), jac=grad, hess=hess, method="trust-exact", options={"gtol": 1e-13})
    alpha = res.x
    # trust-exact may stop on "no predicted improvement" once at rounding level.
    assert np.linalg.norm(grad(alpha)) < 1e-9, np.linalg.norm(grad(alpha))
    _, z = parts(alpha)
    test = np.column_stack([[T11, T22][c] @ alpha.reshape(N, C)[:, c] for c in range(C)])
    print("K =", np.array2string(K, separator=", "))
    print("alpha =", ", ".join(f"{v:.15e}" for v in alpha))
    print("objective =", f"{res.fun:.15e}")
    print("train labels =", (np.argmax(z, axis=1) + 1).tolist())
    print("test labels =", (np.argmax(test, axis=1) + 1).tolist())


if __name__ == "__main__":
    main()
