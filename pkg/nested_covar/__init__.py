# Nested Monte Carlo CoVaR estimation library
__version__ = "1.0.0"
