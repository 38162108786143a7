"""Scenario runner, simulated clients, trace format and consistency checks."""
