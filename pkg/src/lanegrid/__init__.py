"""Headland-bounded lane fitting: freeform lanes versus straight lanes."""
