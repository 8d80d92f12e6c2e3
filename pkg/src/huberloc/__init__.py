"""Huber-loss distributed localization with bootstrap range refinement."""
