"""Regret laboratory."""
