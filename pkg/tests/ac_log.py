"""Shared record of acceptance outcomes, echoed in the pytest terminal summary."""

RESULTS: list[str] = []
