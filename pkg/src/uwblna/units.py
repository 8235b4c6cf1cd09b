"""Engineering-notation values: ``0.28n``, ``1.5meg``, ``50``, ``2.2pF``."""

import re
from decimal import Decimal

# power-of-ten exponents; scaling goes through Decimal so "0.28n" is exactly 2.8e-10
SUFFIXES = {"f": -15, "p": -12, "n": -9, "u": -6, "m": -3,
            "k": 3, "meg": 6, "g": 9, "t": 12}

_VALUE_RE = re.compile(
    r"""^(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
        (?P<suffix>meg|[fpnumkgt])?
        (?P<unit>[a-z]*)$""",
    re.IGNORECASE | re.VERBOSE,
)


def parse_value(text):
    """Parse a number with an optional SPICE suffix into a float (SI units).

    Suffixes are case-insensitive, so ``M`` is milli and mega is spelled
    ``meg``. Trailing unit letters after the suffix are ignored (``2.2pF``).
    ``inf`` is accepted (an infinite beta or r_o). Raises ``ValueError`` for
    anything else.
    """
    if text.strip().lower() in ("inf", "+inf"):
        return float("inf")
    m = _VALUE_RE.match(text.strip())
    if m is None:
        raise ValueError(f"not a numeric value: {text!r}")
    suffix = m.group("suffix")
    if not suffix:
        return float(m.group("num"))
    # as in SPICE, the first letter is always a prefix: "1F" is 1 fF
    return float(Decimal(m.group("num")).scaleb(SUFFIXES[suffix.lower()]))


def format_value(value):
    """Round-trip-exact textual form of a float for netlist output."""
    return repr(float(value))
