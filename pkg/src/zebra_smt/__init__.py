"""Logic grid puzzles solved by an LLM agent loop with SMT solver feedback."""

__version__ = "0.1.0"
