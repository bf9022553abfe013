"""Exact matching sequences of regular bipartite graphs and certified
finite-difference positivity checks of u(i) = -ln(i! m_i)."""

__version__ = "0.1.0"
