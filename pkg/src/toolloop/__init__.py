"""toolloop: an agentic tool-calling engine and evaluation harness.

The engine keeps a registry of described tools, retrieves candidate tools
for a (rewritten) question with sparse or dense ranking, lets a language
model emit JSON function calls, validates and executes them with feedback,
and records every session as a replayable trace.  The bench side loads
question datasets, permutes answer options, drives sessions across
retrieval settings, and scores accuracy into CSV/JSON reports.
"""

__version__ = "0.1.0"
