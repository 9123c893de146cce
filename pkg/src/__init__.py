"""bksim - perfect simulation and non-uniqueness certification for Bramson-Kalikow chains."""

__version__ = "0.3.0"
