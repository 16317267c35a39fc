"""Reference values for the averaged metric of planar Randers metrics.

The indicatrix y(t) = u(t)/F(u(t)) is integrated against the arclength of the
Riemann-Finsler metric g_y restricted to it, with g the symbolic Hessian of
F^2/2. Derivatives in x use mpmath numerical differentiation.
"""
import mpmath as mp
import sympy as sp

mp.mp.dps = 30

y1, y2, x1, x2 = sp.symbols("y1 y2 x1 x2", real=True)


def randers(a, b):
    alpha = sp.sqrt(a[0][0] * y1**2 + (a[0][1] + a[1][0]) * y1 * y2 + a[1][1] * y2**2)
    F = alpha + b[0] * y1 + b[1] * y2
    E = F**2 / 2
    g = sp.Matrix([[sp.diff(E, p, q) for q in (y1, y2)] for p in (y1, y2)])
    return sp.lambdify((x1, x2, y1, y2), F, "mpmath"), sp.lambdify((x1, x2, y1, y2), g, "mpmath")


def gamma(F, g, x):
    def y_of(t):
        u = (mp.cos(t), mp.sin(t))
        f = F(x[0], x[1], *u)
        return (u[0] / f, u[1] / f)

    def entry(i, j):
        def integrand(t):
            y = y_of(t)
            dy = (mp.diff(lambda s: y_of(s)[0], t), mp.diff(lambda s: y_of(s)[1], t))
            G = g(x[0], x[1], *y)
            ds = mp.sqrt(sum(G[p, q] * dy[p] * dy[q] for p in range(2) for q in range(2)))
            return G[i, j] * ds
        return mp.quad(integrand, [0, mp.pi / 2, mp.pi, 3 * mp.pi / 2, 2 * mp.pi])

    return [[entry(i, j) for j in range(2)] for i in range(2)]


def christoffel(F, g, x):
    G = gamma(F, g, x)
    dG = []
    for k in range(2):
        def comp(i, j, k=k):
            return mp.diff(lambda s: gamma(F, g, [x[0] + s * (k == 0), x[1] + s * (k == 1)])[i][j], 0)
        dG.append([[comp(i, j) for j in range(2)] for i in range(2)])
    Gi = mp.matrix(G) ** -1
    out = {}
    for k in range(2):
        for i in range(2):
            for j in range(2):
                out[(k, i, j)] = sum(Gi[k, l] * (dG[i][j][l] + dG[j][i][l] - dG[l][i][j]) for l in range(2)) / 2
    return G, out


def show(name, F, g, x, with_christoffel):
    if with_christoffel:
        G, C = christoffel(F, g, x)
    else:
        G, C = gamma(F, g, x), {}
    print(name, "x =", x)
    for i in range(2):
        print("  gamma[%d] = %s, %s" % (i, mp.nstr(G[i][0], 17), mp.nstr(G[i][1], 17)))
    for key, v in sorted(C.items()):
        print("  Gamma*^%d_%d%d = %s" % (key[0] + 1, key[1] + 1, key[2] + 1, mp.nstr(v, 17)))


if __name__ == "__main__":
    F, g = randers([[1, 0], [0, 1]], [sp.Rational(3, 10), 0])
    show("minkowski randers", F, g, [0, 0], False)
    F, g = randers([[1, 0], [0, sp.exp(-2 * x1)]], [sp.Rational(3, 10), 0])
    show("frame randers", F, g, [mp.mpf("0.3"), mp.mpf("0.7")], True)
    F, g = randers([[1, 0], [0, 1]], [sp.Rational(3, 10) + sp.Rational(1, 5) * sp.sin(x1), 0])
    show("varying randers", F, g, [mp.mpf("0.4"), mp.mpf("0.2")], True)
    F, g = randers([[2, sp.Rational(1, 2)], [sp.Rational(1, 2), 1]], [sp.Rational(1, 5), -sp.Rational(1, 10)])
    show("tilted randers", F, g, [0, 0], False)
