"""Forecasting benchmark: lagged macroeconomic indicators predicting health-capacity targets."""

__version__ = "0.1.0"
