"""Reference model runner for the critical-band-masking toolkit.

Reads a stimulus manifest, evaluates a classifier (real or built-in) over
every stimulus, and writes the JSON-lines prediction-record format the
toolkit ingests.  The file formats are the only coupling to the toolkit.
"""

__version__ = "0.1.0"
