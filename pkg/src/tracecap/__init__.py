"""tracecap: trace-driven web capture into WARC archives, plus the tooling
to measure how complete those captures are and what they cost."""

__version__ = "0.1.0"
