"""rolesim: deterministic role-affinity scheduling simulator over hierarchical edge networks."""

__version__ = "0.1.0"
