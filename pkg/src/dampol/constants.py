"""Natural units used throughout: hbar = eps0 = mu0 = c = 1.

All model identities are unit-covariant, so working in natural units keeps
cross-checks exact.  An I/O layer may rescale on the way in or out.
"""

HBAR = 1.0
EPS0 = 1.0
MU0 = 1.0
C_LIGHT = 1.0
