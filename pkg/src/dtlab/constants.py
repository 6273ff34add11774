"""Frozen constants for every tester.

The theory fixes only asymptotic orders.  Each value below was chosen by a
brute-force error-rate sweep (``scripts/calibrate.py``) and frozen here.
The comment beside each constant records what it controls and how it was
settled.
"""

# Rejection screen in the bipartite collision tester: reject when some
# element appears more than this many times in S1.
MAX_MULTIPLICITY = 10

# The bipartite threshold is (N1/n)(1 + eps^2 / THRESHOLD_SLACK).
THRESHOLD_SLACK = 50

# Bipartite collision tester: N1 * N2 = K_BIP * n / eps^4.
# The acceptance gap above the null mean is only eps^2/50 of it, so the
# completeness z-score is (eps^2/50) * sqrt(N1 N2 / n) = sqrt(K_BIP)/50.
# K_BIP = 4096 gives z = 1.28, about 10% false rejections.  Sweep over
# 400 uniform trials (false-rejection rate at n = 2^10 / 2^12):
#   40: 0.46 / 0.44   400: 0.35 / 0.35   1600: 0.21 / 0.24   4096: 0.12 / 0.10
K_BIP = 4096

# Streaming tester: N2 = K_STREAM * n * ceil(log2 n) / (m * eps^4).  With
# N1 = m / (2 ceil(log2 n)) this makes N1 * N2 = (K_STREAM / 2) n / eps^4,
# the same product as the central tester.
K_STREAM = 2 * K_BIP

# Central tester default for N1 when the caller does not fix it: the
# largest value under the n^(9/10) screen regime, capped at sqrt(K n)/eps^2.
CENTRAL_N1_EXPONENT = 0.9

# Distributed bipartite tester.  m1 = c / (eps^2 l^1.5) * sqrt(n / log2 n)
# and m2 = c' n / (eps^4 l^2 m1), so (m1 l) (m2 l) = c' n / eps^4 and c'
# plays the role of K_BIP.  c = sqrt(c') keeps m1 l near the geometric
# middle of its allowed regime.
DIST_BIP_C_PRIME = K_BIP
DIST_BIP_C = 64

# Communication of the distributed bipartite tester on uniform inputs is
# at most COMM_BOUND_CONSTANT * (1/eps^2) * sqrt((n / l) log2 n).  Measured
# worst case over 400 uniform trials at n = 2^14, l = 4, eps = 0.5 was
# 196.8 in these units; 256 leaves headroom.
COMM_BOUND_CONSTANT = 256

# Distributed aggregate tester: m = AGGREGATE_CONSTANT * n / (l^2 eps^4).
AGGREGATE_CONSTANT = 12800

# l2 tester sample intensity n_param = L2_SAMPLE_CONSTANT * b / eps'^2.
# Two-bucket worst case, 400 trials, errors (equal / at distance eps'):
#   4: 0.20 / 0.47   8: 0.09 / 0.37   16: 0.03 / 0.21   40: 0.00 / 0.07
L2_SAMPLE_CONSTANT = 40

# Flattening: with m samples from p, ||p'||_2 <= FLATTEN_NORM_C / sqrt(m).
# Over 400 runs on uniform and Zipf at n = 4096, m in {64, 256, 1024}, the
# largest observed sqrt(m) ||p'||_2 was 0.85, so 4 holds with wide margin.
FLATTEN_NORM_C = 4

# Memory closeness tester.  Flattening takes CLOSENESS_MEM_C1 * m samples
# from each side; the Poisson intensity per side is
# CLOSENESS_MEM_C2 * n / (sqrt(m) eps^2).  The comparison threshold is
# eps / (2 sqrt(n')) with the midpoint rule, so the null z-score is about
# CLOSENESS_MEM_C2 / 32.
CLOSENESS_MEM_C1 = 1
CLOSENESS_MEM_C2 = 64

# Distributed closeness tester: the one shared constant C.
CLOSENESS_C = 10
# The final l2 step also requires the estimate to clear this many plug-in
# null standard deviations.  At n = 2^14, l = 8, eps = 0.5 the bare
# midpoint rule falsely rejects 45% of equal pairs; the guard brings that
# to 7% / 2.5% / 1.5% for z = 1.5 / 2 / 2.5 while disjoint halves and Zipf
# vs uniform are still rejected in every run.
CLOSENESS_NULL_Z = 2.5
# Share of the W-samples (per side) used for the second flattening.
CLOSENESS_SECOND_FLATTEN_FRACTION = 0.25

# Ledger peak for the memory closeness tester is asserted to stay below
# MEMORY_FOOTPRINT_CONSTANT * m * ceil(log2 n).
MEMORY_FOOTPRINT_CONSTANT = 64
