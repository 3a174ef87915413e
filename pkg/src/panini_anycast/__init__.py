"""Anonymous anycast over simulated channels.

A sender delivers a message to n receivers drawn uniformly from a chosen
set of l candidates, without anyone (the sender included) learning who was
picked. The package contains the cryptographic building blocks (linkable
ring signatures, a tag-selecting symmetric cipher), a deterministic
discrete-event network with an interposing adversary, the protocol state
machines, executable privacy games with toy leaky fixtures, and a
microbenchmark harness.
"""

from . import bench, channels, cipher, games, lrs, protocol, util

__all__ = ["bench", "channels", "cipher", "games", "lrs", "protocol", "util"]

__version__ = "0.1.0"
