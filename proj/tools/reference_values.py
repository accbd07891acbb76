"""Arbitrary-precision reference values frozen into the C++ tests."""
import mpmath as mp

mp.mp.dps = 30


def logit_moments(a, b):
    return mp.digamma(a) - mp.digamma(b), mp.polygamma(1, a) + mp.polygamma(1, b)


def binomial(n, s, a, b):
    x1, v1 = logit_moments(a, b)
    x2, v2 = logit_moments(a + s, b + n - s)
    v = 1 / (1 / v2 - 1 / v1)
    return v * (x2 / v2 - x1 / v1), v


def show(label, *xs):
    print(label, " ".join(mp.nstr(x, 17) for x in xs))


for z in [mp.mpf("0.5"), 1, 2, 8, 10, 100, mp.mpf("0.001")]:
    show(f"polygamma z={z}", mp.digamma(z), mp.polygamma(1, z), mp.polygamma(2, z))
for a, b in [(1, 1), (2, 3), (8, 4), (31, 21), (mp.mpf("0.5"), 100)]:
    show(f"beta_to_moments({a},{b})", *logit_moments(a, b))
for n, s, a, b in [(10, 7, 1, 1), (2, 1, 1, 1), (10, 5, 1, 1), (50, 30, 1, 1), (50, 20, 1, 1)]:
    show(f"binomial({n},{s},{a},{b})", *binomial(n, s, a, b))
s2 = mp.log1p(mp.mpf(1) / 4)
show("lognormal forward (mean 2, var 1)", mp.log(2) - s2 / 2, s2)
show("Beta(8,4) mean var", mp.mpf(8) / 12, mp.mpf(32) / (144 * 13))
