"""Independent numpy reference values for the frozen constants in the tests.

Rebuilds the seeded families from the generator definition, uses the exact
Jordan chains of the construction (no SVD), explicit matrix inverses for the
resolvent, and a plain Wilson-loop product for the phase.

    python3 tools/oracle.py
"""

import numpy as np

MUL = 6364136223846793005
INC = 1442695040888963407
MASK = (1 << 64) - 1


class Lcg:
    def __init__(self, seed):
        self.state = seed

    def uniform(self):
        self.state = (self.state * MUL + INC) & MASK
        return (self.state >> 11) / float(1 << 53)

    def complex(self):
        re = 2.0 * self.uniform() - 1.0
        im = 2.0 * self.uniform() - 1.0
        return re + 1j * im

    def matrix(self, n):
        return np.array([[self.complex() for _ in range(n)] for _ in range(n)])


def gen(n, seed=7, delta=2.0, delta2=-1.5 + 1.0j, coupling=1.0):
    core = np.zeros((n, n), complex)
    core[0, 1] = 1
    core[2, 2] = delta
    if n == 4:
        core[3, 3] = delta2
    rng = Lcg(seed)
    s = np.eye(n) + 0.5 * rng.matrix(n)
    si = np.linalg.inv(s)
    b1 = coupling * rng.matrix(n)
    b2 = coupling * rng.matrix(n)
    b1[1, 0] = 1
    b2[1, 0] = 1j
    mats = [s @ core @ si, s @ b1 @ si, s @ b2 @ si]
    chains = dict(chi0=s[:, 0], chi1=s[:, 1], l0=si[1, :], l1=si[0, :])
    return mats, chains


def shape_point(kind, t):
    th = 2 * np.pi * t
    if kind == "circle":
        return np.array([np.cos(th), np.sin(th)])
    if kind == "ellipse":
        return np.array([3 * np.cos(th), np.sin(th)])
    raise ValueError(kind)


def shape_velocity(kind, t):
    th = 2 * np.pi * t
    if kind == "circle":
        return 2 * np.pi * np.array([-np.sin(th), np.cos(th)])
    return 2 * np.pi * np.array([-3 * np.sin(th), np.cos(th)])


def a_resolvent(mats, ch, kind, n, exact_tangent=False):
    h = mats[0]
    dim = h.shape[0]
    g = h + np.outer(ch["chi1"], ch["l1"])
    gi = np.linalg.inv(g)
    gi2 = gi @ gi
    gi3 = gi2 @ gi
    bracket = gi3 - np.outer(ch["chi1"], ch["l1"])
    total = 0
    for k in range(n):
        mid = shape_point(kind, (k + 0.5) / n)
        if exact_tangent:
            d = shape_velocity(kind, (k + 0.5) / n) / n
        else:
            d = shape_point(kind, (k + 1) / n) - shape_point(kind, k / n)
        h1 = mid[0] * mats[1] + mid[1] * mats[2]
        dh1 = d[0] * mats[1] + d[1] * mats[2]
        total += 2 * ch["l0"] @ h1 @ bracket @ dh1 @ ch["chi0"]
        total += ch["l0"] @ h1 @ gi2 @ dh1 @ ch["chi1"]
        total += ch["l1"] @ h1 @ gi2 @ dh1 @ ch["chi0"]
    return total


def wilson_phase(mats, eps, n, pair_energy=0.0):
    """Plain Wilson product over two turns, eigenvectors from numpy."""

    def eig_near(x, target):
        h = mats[0] + x[0] * mats[1] + x[1] * mats[2]
        w, v = np.linalg.eig(h)
        wl, vl = np.linalg.eig(h.T)
        i = np.argmin(abs(w - target))
        j = np.argmin(abs(wl - w[i]))
        return w[i], v[:, i], vl[:, j]

    energies = []
    rights = []
    lefts = []
    target = None
    for k in range(2 * n + 1):
        x = eps * shape_point("circle", k / n)
        if target is None:
            h = mats[0] + x[0] * mats[1] + x[1] * mats[2]
            w = np.linalg.eigvals(h)
            near = sorted(w, key=lambda z: abs(z - pair_energy))[:2]
            target = sorted(near, key=lambda z: (z.real, z.imag))[0]
        e, r, l = eig_near(x, target)
        target = e
        energies.append(e)
        rights.append(r)
        lefts.append(l)
    log_w = 0
    for k in range(2 * n):
        nxt = 0 if k + 1 == 2 * n else k + 1
        log_w += np.log((lefts[k] @ rights[nxt]) / (lefts[k] @ rights[k]))
    gamma = 1j * log_w
    return complex((gamma.real + np.pi) % (2 * np.pi) - np.pi, gamma.imag)


def main():
    np.set_printoptions(precision=17)
    rng = Lcg(7)
    print("lcg seed 7 first u64:", [(rng.uniform(), rng.state)[1] for _ in range(3)])
    for n, name in [(3, "gen3"), (4, "gen4")]:
        mats, ch = gen(n)
        h = mats[0] + 0.3 * mats[1] - 0.2 * mats[2]
        ev = sorted(np.linalg.eigvals(h), key=lambda z: (z.real, z.imag))
        print(f"{name} eigenvalues at (0.3, -0.2):", [repr(z) for z in ev])
        for kind in ["circle", "ellipse"]:
            a256 = a_resolvent(mats, ch, kind, 256)
            a_cont = a_resolvent(mats, ch, kind, 8192, exact_tangent=True)
            print(f"{name} {kind} a(N=256) = {a256!r}  continuum = {a_cont!r}")
    mats, ch = gen(3)
    for eps in [0.02, 0.04]:
        g1 = wilson_phase(mats, eps, 4096)
        g2 = wilson_phase(mats, eps, 8192)
        rich = 2 * g2 - g1 - np.pi
        print(f"gen3 eps={eps} gamma-pi: N=4096 {g1 - np.pi!r} N=8192 {g2 - np.pi!r} extrapolated {rich!r}")
    for delta in [0.25, 0.125, 0.0625]:
        m, c = gen(3, delta=delta)
        print(f"gen3 delta={delta} a(N=256) = {a_resolvent(m, c, 'circle', 256)!r}")


if __name__ == "__main__":
    main()
