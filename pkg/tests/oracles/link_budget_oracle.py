"""Independent high-precision evaluation of the link-budget closed forms.

Run directly to regenerate the golden values frozen in tests/test_phy.py.
Uses mpmath at 50 digits and shares no code with the package.
"""
from mpmath import mp, mpf, log10, pi, sqrt, exp, log

mp.dps = 50

C = mpf(299792458)
FC = mpf("5.8e9")
BW = mpf("100e6")
PT_DBM, GT_DBI, GR_DBI, RCS_DBSM, PN_DBM, GPROC_DB = 20, 2, 2, 0, -90, 8
LAM = C / FC


def lin(db):
    return mpf(10) ** (mpf(db) / 10)


def echo_w(r):
    pt = lin(PT_DBM) / 1000
    return pt * lin(GT_DBI) * lin(GR_DBI) * LAM**2 * lin(RCS_DBSM) / ((4 * pi) ** 3 * mpf(r) ** 4)


def sens_snr_db(r):
    pn = lin(PN_DBM) / 1000
    dres = C / (2 * BW)
    return 10 * log10(echo_w(r) / pn) + GPROC_DB - 10 * log10(1 + mpf(r) / dres)


def comm_snr_db(d, n=2):
    pl0 = 20 * log10(4 * pi / LAM)
    return PT_DBM + GT_DBI + GR_DBI - (pl0 + 10 * n * log10(mpf(d))) - PN_DBM


def threshold_distance(snr_db):
    # invert comm_snr_db for n=2
    return mpf(10) ** ((comm_snr_db(1) - snr_db) / 20)


if __name__ == "__main__":
    gamma = sens_snr_db(150)
    print("echo_w(100)        =", mp.nstr(echo_w(100), 20))
    print("sens_snr_db(100)   =", mp.nstr(sens_snr_db(100), 20))
    print("gamma_det(150)     =", mp.nstr(gamma, 20))
    print("comm_snr_db(1)     =", mp.nstr(comm_snr_db(1), 20))
    print("edge dist @10dB    =", mp.nstr(threshold_distance(10), 20))
    print("range res          =", mp.nstr(C / (2 * BW), 20))
    for r in (10, 50, 100, 150, 200, 250):
        m = sens_snr_db(r) - 0.99 - gamma
        p = 1 / (1 + exp(-mpf("0.25") * m))
        print(f"p(R={r}, load 0.99) =", mp.nstr(p, 15))
    # 3 agents at 10 m, pilot 0.30 (load 0.70): P(all three detect)
    m = sens_snr_db(10) - mpf("0.7") - gamma
    p = 1 / (1 + exp(-mpf("0.25") * m))
    print("p3 joint @10m      =", mp.nstr(p**3, 15))
    print("snr for log2=6 dB  =", mp.nstr(10 * log10(63), 20))
    print("ln9/0.25           =", mp.nstr(log(9) / mpf("0.25"), 20))
