"""Conic relaxations of quantum entropies, channel/supermap min-entropies and conversion tests."""
