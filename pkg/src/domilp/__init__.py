"""Exact 0-1 / finite-domain ILP feasibility via meet-in-the-middle and vector domination."""
