"""Singular and near-singular double-layer integrals over curved triangles."""
