"""Movable-antenna multi-receiver downlink: channels, robust rates and multi-agent DDPG."""

__version__ = "0.1.0"
