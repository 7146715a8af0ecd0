"""Shared record of acceptance outcomes, printed at the end of the session."""

from __future__ import annotations

RESULTS: dict[int, str] = {}
