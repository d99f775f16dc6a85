"""Fair randomized gossip consensus: protocol core, simulator, and
experiment harness for studying coalition deviations at desk scale."""

from fairgossip.protocol import (
    Certificate,
    ConfigError,
    Ledger,
    Params,
    derive_params,
    payoff,
    verify_certificate,
)

__all__ = [
    "Certificate",
    "ConfigError",
    "Ledger",
    "Params",
    "derive_params",
    "payoff",
    "verify_certificate",
]

__version__ = "0.1.0"
