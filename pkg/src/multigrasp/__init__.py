"""Two-contact grasp synthesis on arbitrary hand surfaces and multi-object planning."""
__version__ = "0.1.0"
