"""Hawkes simulation, causal effect estimation and neural intensity models for event sequences under out-of-domain interventions."""
__version__ = "0.1.0"
