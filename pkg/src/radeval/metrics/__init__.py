"""Metric families: lexical overlap, embedding similarity, clinical structure."""
