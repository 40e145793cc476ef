"""Small random instances shared by the test modules."""

from stallbound.experiments import random_instance  # noqa: F401
