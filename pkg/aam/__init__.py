"""
AAM - atomic active messages over a simulated distributed-memory machine.
"""

__version__ = "0.1.0"
