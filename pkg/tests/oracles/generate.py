"""Regenerate the frozen reference values used by the tests (mpmath, high precision).

Run: python3 tests/oracles/generate.py
Nothing in the package is imported here, so the numbers are independent of it.
"""

import mpmath as mp


def ml_series(alpha, beta, z, dps=80):
    """E_{alpha,beta}(z) by direct power-series summation at ``dps`` digits."""
    with mp.workdps(dps):
        alpha, beta, z = mp.mpf(alpha), mp.mpf(beta), mp.mpf(z)
        total, k = mp.mpf(0), 0
        while True:
            term = z**k / mp.gamma(alpha * k + beta)
            total += term
            if k > 10 and abs(term) < mp.mpf(10) ** (-dps + 5) * max(1, abs(total)):
                return total
            k += 1


def wright_m(alpha, theta, dps=50):
    """Mainardi density M_alpha(theta) = sum (-theta)^k / (k! Gamma(-alpha k + 1 - alpha))."""
    with mp.workdps(dps):
        alpha, theta = mp.mpf(alpha), mp.mpf(theta)
        total = mp.mpf(0)
        for k in range(400):
            total += (-theta) ** k * mp.rgamma(-alpha * k + 1 - alpha) / mp.factorial(k)
        return total


def main():
    out = {}
    out["gamma_1.75"] = mp.gamma(mp.mpf("1.75"))
    out["inv_gamma_0.75"] = 1 / mp.gamma(mp.mpf("0.75"))
    out["ml_0.75_0.75_m1"] = ml_series("0.75", "0.75", -1)
    for a in ("0.6", "0.75", "0.9"):
        for lam in ("0.5", "1", "5", "25"):
            out[f"ml_{a}_1_m{lam}"] = ml_series(a, 1, -mp.mpf(lam), dps=200)
    out["ml_0.9_1_m30"] = ml_series("0.9", 1, -30, dps=120)
    out["ml_0.6_1_m10"] = ml_series("0.6", 1, -10, dps=120)
    out["ml_0.8_0.8_m3"] = ml_series("0.8", "0.8", -3, dps=80)
    out["ml_0.8_1.8_m3"] = ml_series("0.8", "1.8", -3, dps=80)
    out["ml_0.75_1_m1"] = ml_series("0.75", 1, -1)
    out["ml_0.75_0.75_m1"] = ml_series("0.75", "0.75", -1)
    # Wright/Mainardi function at alpha = 1/2 against the closed form
    out["M_0.5_2"] = wright_m("0.5", 2)
    out["closed_M_0.5_2"] = mp.exp(-1) / mp.sqrt(mp.pi)
    out["M_0.75_0.7"] = wright_m("0.75", "0.7")
    out["one_sided_half_1"] = mp.exp(-mp.mpf(1) / 4) / (2 * mp.sqrt(mp.pi))
    # classical single-mode Gramian on [0, 1]
    out["gramian_classical_T1"] = (1 - mp.exp(-2)) / 2
    for k, v in out.items():
        print(f"{k} = {mp.nstr(v, 17)}")


if __name__ == "__main__":
    main()
