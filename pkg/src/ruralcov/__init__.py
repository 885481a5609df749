"""Monte Carlo coverage of UAV-assisted rural cellular networks with grid and renewable charging stations."""

__version__ = "0.1.0"
