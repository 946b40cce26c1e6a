"""Numeric constants used across modules.

CLOSURE_THRESHOLD is the per-edge closure-probability budget under which
the dual-contour weight series stays at or below one; every comparison
argument in the package is run against it or against half of it.  It is a
dyadic rational, so the float below is exact.
"""

# 2**-8 == 0.00390625 exactly.
CLOSURE_THRESHOLD = 2.0 ** -8

# Half the budget: the target for renewal window masses (the atomic part
# and the full measure are each given half of CLOSURE_THRESHOLD).
HALF_CLOSURE_THRESHOLD = CLOSURE_THRESHOLD / 2.0

# Default truncation tolerance for atomic renewal series.
DEFAULT_MASS_TOLERANCE = 1e-9

# Guard against runaway renewal-mark generation: an estimator refuses to
# start when the expected number of marks across all processes exceeds
# this cap.
DEFAULT_MARK_CAP = 50_000_000
