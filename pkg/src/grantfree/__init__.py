"""Error-rate analysis for grant-free massive random access with short packets.

AMP-based joint activity detection and channel estimation, finite-blocklength
BLER under zero-forcing reception, and pilot-length optimization, each paired
with a Monte-Carlo check.
"""

__version__ = "0.1.0"
