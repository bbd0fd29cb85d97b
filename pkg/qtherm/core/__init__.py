"""
Core components: settings, logging, exceptions and random streams
"""
