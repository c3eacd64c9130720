"""Room-based synchronization server and load harness for web-delivered virtual worlds."""

__version__ = "0.1.0"

# Wire protocol revision, negotiated at Hello. A mismatch is fatal.
PROTOCOL_VERSION = 1
